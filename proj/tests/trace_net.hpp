#pragma once

#include <set>
#include <string>

#include "kbmod/event_log.hpp"
#include "kbmod/petri_net.hpp"

namespace fixtures {

// Exclusive choice between one chain per distinct variant of `log`, sharing
// source and sink. Stands in for an externally discovered model.
inline kbmod::PetriNet trace_net(const kbmod::EventLog& log) {
  std::set<kbmod::Variant> variants;
  for (const auto& t : log.traces()) variants.insert(kbmod::variant_of(t));
  kbmod::NetBuilder b;
  b.place("source", 1).place("sink");
  std::size_t v = 0;
  for (const auto& var : variants) {
    std::string prev = "source";
    for (std::size_t i = 0; i < var.size(); ++i) {
      const std::string t = "t" + std::to_string(v) + "_" + std::to_string(i);
      const std::string next = i + 1 == var.size() ? "sink" : "p" + std::to_string(v) + "_" + std::to_string(i);
      if (next != "sink") b.place(next);
      b.transition(t, var[i]).arc(prev, t).arc(t, next);
      prev = next;
    }
    ++v;
  }
  return b.final_tokens("sink").build();
}

}  // namespace fixtures
