#pragma once

#include <string>
#include <vector>

#include "oracles.hpp"

namespace suite {

struct NamedNet {
  std::string name;
  oracle::NetSpec spec;
  std::vector<std::string> labels;  // alphabet used to enumerate traces
};

inline oracle::NetSpec chain3() {
  oracle::NetSpec n;
  n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
  n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
  n.trans("tB", "B", {{"p1", 1}}, {{"p2", 1}});
  n.trans("tC", "C", {{"p2", 1}}, {{"p3", 1}});
  return n;
}

inline std::vector<NamedNet> nets() {
  std::vector<NamedNet> out;
  out.push_back({"chain", chain3(), {"A", "B", "C"}});
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").fin("p2");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tB", "B", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tC", "C", {{"p1", 1}}, {{"p2", 1}});
    out.push_back({"choice", n, {"A", "B", "C"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").place("p4").place("p5").fin("p5");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}, {"p2", 1}});
    n.trans("tB", "B", {{"p1", 1}}, {{"p3", 1}});
    n.trans("tC", "C", {{"p2", 1}}, {{"p4", 1}});
    n.trans("tD", "D", {{"p3", 1}, {"p4", 1}}, {{"p5", 1}});
    out.push_back({"parallel", n, {"A", "B", "C", "D"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tB", "B", {{"p1", 1}}, {{"p2", 1}});
    n.trans("tau_skip", "", {{"p1", 1}}, {{"p2", 1}});
    n.trans("tC", "C", {{"p2", 1}}, {{"p3", 1}});
    out.push_back({"silent_skip", n, {"A", "B", "C"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tB", "B", {{"p1", 1}}, {{"p2", 1}});
    n.trans("tau_back", "", {{"p2", 1}}, {{"p1", 1}});
    n.trans("tC", "C", {{"p2", 1}}, {{"p3", 1}});
    out.push_back({"silent_loop", n, {"A", "B", "C"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
    n.trans("tA1", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tB", "B", {{"p1", 1}}, {{"p2", 1}});
    n.trans("tA2", "A", {{"p2", 1}}, {{"p3", 1}});
    out.push_back({"duplicate_sequence", n, {"A", "B"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
    n.trans("tA1", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tA2", "A", {{"p0", 1}}, {{"p2", 1}});
    n.trans("tB", "B", {{"p1", 1}}, {{"p3", 1}});
    n.trans("tC", "C", {{"p2", 1}}, {{"p3", 1}});
    out.push_back({"duplicate_choice", n, {"A", "B", "C"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").place("p3").place("p4").place("p5").fin("p5");
    n.trans("tau_split", "", {{"p0", 1}}, {{"p1", 1}, {"p2", 1}});
    n.trans("tA", "A", {{"p1", 1}}, {{"p3", 1}});
    n.trans("tB", "B", {{"p2", 1}}, {{"p4", 1}});
    n.trans("tau_join", "", {{"p3", 1}, {"p4", 1}}, {{"p5", 1}});
    out.push_back({"silent_parallel", n, {"A", "B"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").fin("p2");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 2}});
    n.trans("tB", "B", {{"p1", 2}}, {{"p2", 1}});
    out.push_back({"weighted", n, {"A", "B"}});
  }
  {
    oracle::NetSpec n;
    n.place("p0", 2).place("p1").fin("p1", 2);
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
    out.push_back({"two_tokens", n, {"A"}});
  }
  {
    // B sits 3 silent steps behind A; C needs 11 and is out of search range.
    oracle::NetSpec n;
    n.place("p0", 1).place("q0").place("end").fin("end");
    n.trans("tA", "A", {{"p0", 1}}, {{"q0", 1}});
    for (int i = 0; i < 11; ++i) n.place("q" + std::to_string(i + 1));
    for (int i = 0; i < 11; ++i)
      n.trans("tau" + std::string(1, char('a' + i)), "", {{"q" + std::to_string(i), 1}},
              {{"q" + std::to_string(i + 1), 1}});
    n.trans("tB", "B", {{"q3", 1}}, {{"end", 1}});
    n.trans("tC", "C", {{"q11", 1}}, {{"end", 1}});
    out.push_back({"silent_depth", n, {"A", "B", "C"}});
  }
  {
    // Two silent routes of equal length enable B; the lower ids win.
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("x").place("y").place("p2").place("p3").fin("p3");
    n.trans("tA", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tau_2", "", {{"p1", 1}}, {{"y", 1}});
    n.trans("tau_1", "", {{"p1", 1}}, {{"x", 1}});
    n.trans("tau_x", "", {{"x", 1}}, {{"p2", 1}});
    n.trans("tau_y", "", {{"y", 1}}, {{"p2", 1}, {"p3", 1}});
    n.trans("tB", "B", {{"p2", 1}}, {{"p3", 1}});
    out.push_back({"silent_tie", n, {"A", "B"}});
  }
  return out;
}

// Every sequence over `labels` plus the foreign label Z up to `max_len`.
inline std::vector<std::vector<std::string>> all_traces(std::vector<std::string> labels, std::size_t max_len) {
  labels.push_back("Z");
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> level{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& t : level)
      for (const auto& l : labels) {
        auto u = t;
        u.push_back(l);
        next.push_back(u);
      }
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

}  // namespace suite
