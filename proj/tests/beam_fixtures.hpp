#pragma once

#include <random>
#include <vector>

#include "kbmod/predictor.hpp"
#include "oracles.hpp"

namespace fixtures {

inline const kbmod::Vocabulary& ab_vocab() {
  static const kbmod::Vocabulary v = kbmod::Vocabulary::from_alphabet({"A", "B"});
  return v;
}

// Random counts over random contexts; unseen contexts stay uniform, which
// exercises the tie rules.
inline kbmod::NGramModel random_ngram(std::mt19937_64& rng) {
  const std::size_t order = 1 + rng() % 3;
  const double alphas[] = {0.01, 0.3, 1.0};
  kbmod::NGramModel m(ab_vocab(), order, alphas[rng() % 3]);
  const std::size_t contexts = rng() % 12;
  for (std::size_t c = 0; c < contexts; ++c) {
    std::vector<kbmod::LabelIndex> ctx(1 + rng() % order);
    for (auto& l : ctx) l = rng() % 2;
    for (kbmod::LabelIndex next = 0; next < 3; ++next) {
      const std::size_t n = rng() % 4;
      if (n) m.add(ctx, next, n);
    }
  }
  return m;
}

inline std::vector<oracle::NetSpec> ab_nets() {
  std::vector<oracle::NetSpec> out;
  auto chain = [](const std::string& first, const std::string& second) {
    oracle::NetSpec n;
    n.place("p0", 1).place("p1").place("p2").fin("p2");
    n.trans("t1", first, {{"p0", 1}}, {{"p1", 1}});
    n.trans("t2", second, {{"p1", 1}}, {{"p2", 1}});
    return n;
  };
  out.push_back(chain("A", "B"));
  out.push_back(chain("B", "A"));
  {
    oracle::NetSpec n;  // A or B, then end
    n.place("p0", 1).place("p1").fin("p1");
    n.trans("ta", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tb", "B", {{"p0", 1}}, {{"p1", 1}});
    out.push_back(n);
  }
  {
    oracle::NetSpec n;  // A, then B repeated, silent exit
    n.place("p0", 1).place("p1").place("p2").fin("p2");
    n.trans("ta", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tb", "B", {{"p1", 1}}, {{"p1", 1}});
    n.trans("tau", "", {{"p1", 1}}, {{"p2", 1}});
    out.push_back(n);
  }
  {
    oracle::NetSpec n;  // A and B in parallel
    n.place("p0", 1).place("pa").place("pb").place("qa").place("qb").place("end").fin("end");
    n.trans("tau_split", "", {{"p0", 1}}, {{"pa", 1}, {"pb", 1}});
    n.trans("ta", "A", {{"pa", 1}}, {{"qa", 1}});
    n.trans("tb", "B", {{"pb", 1}}, {{"qb", 1}});
    n.trans("tau_join", "", {{"qa", 1}, {"qb", 1}}, {{"end", 1}});
    out.push_back(n);
  }
  {
    oracle::NetSpec n;  // optional A, then B twice via duplicate labels
    n.place("p0", 1).place("p1").place("p2").place("p3").fin("p3");
    n.trans("ta", "A", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tau_skip", "", {{"p0", 1}}, {{"p1", 1}});
    n.trans("tb1", "B", {{"p1", 1}}, {{"p2", 1}});
    n.trans("tb2", "B", {{"p2", 1}}, {{"p3", 1}});
    out.push_back(n);
  }
  {
    oracle::NetSpec n;  // A never appears in this net
    n.place("p0", 1).place("p1").fin("p1");
    n.trans("tb", "B", {{"p0", 1}}, {{"p1", 1}});
    out.push_back(n);
  }
  return out;
}

inline std::vector<std::string> random_prefix(std::mt19937_64& rng) {
  std::vector<std::string> p(1 + rng() % 3);
  for (auto& l : p) l = rng() % 2 ? "B" : "A";
  return p;
}

inline double random_w(std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: return 0.0;
    case 1: return 1.0;
    case 2: return 0.05 * double(rng() % 20);
    default: return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
}

// Compliance through the independent replayer.
inline oracle::ComplianceFn oracle_compliance(const oracle::NetSpec& spec) {
  return [&spec](const std::vector<std::string>& trace, bool complete) {
    const oracle::Counts k = oracle::Replayer(spec).run(trace, !complete);
    if (k.c <= 0 || k.p <= 0) return 0.0;
    return k.fitness();
  };
}

}  // namespace fixtures
