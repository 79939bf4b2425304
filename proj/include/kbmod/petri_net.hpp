#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kbmod/event_log.hpp"

namespace kbmod {

using PlaceIndex = std::size_t;
using TransitionIndex = std::size_t;
using TokenCount = std::int64_t;

// Token count per place, indexed by PlaceIndex. Counts never go negative.
struct Marking {
  std::vector<TokenCount> tokens;

  TokenCount total() const;
  bool operator==(const Marking&) const = default;
  auto operator<=>(const Marking&) const = default;
};

struct Place {
  std::string id;
  std::string name;
};

struct Transition {
  std::string id;
  std::optional<std::string> label;  // nullopt: silent

  bool silent() const { return !label.has_value(); }
};

struct WeightedPlace {
  PlaceIndex place;
  TokenCount weight;
  auto operator<=>(const WeightedPlace&) const = default;
};

class PetriNet {
 public:
  const std::vector<Place>& places() const { return places_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  std::span<const WeightedPlace> inputs(TransitionIndex t) const { return inputs_[t]; }
  std::span<const WeightedPlace> outputs(TransitionIndex t) const { return outputs_[t]; }
  const Marking& initial_marking() const { return initial_; }
  const Marking& final_marking() const { return final_; }

  // Transitions carrying `label`, sorted by identifier. Empty if none.
  std::span<const TransitionIndex> transitions_with_label(std::string_view label) const;
  // Silent transitions sorted by identifier.
  std::span<const TransitionIndex> silent_transitions() const { return silent_; }

  std::optional<PlaceIndex> find_place(std::string_view id) const;
  std::optional<TransitionIndex> find_transition(std::string_view id) const;
  Marking empty_marking() const { return Marking{std::vector<TokenCount>(places_.size(), 0)}; }

  // Equality on ids, labels, arcs and markings (order-insensitive).
  bool structurally_equal(const PetriNet& other) const;

 private:
  friend class NetBuilder;

  std::vector<Place> places_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<WeightedPlace>> inputs_;
  std::vector<std::vector<WeightedPlace>> outputs_;
  Marking initial_;
  Marking final_;
  std::unordered_map<std::string, std::vector<TransitionIndex>> by_label_;
  std::vector<TransitionIndex> silent_;
  std::unordered_map<std::string, PlaceIndex> place_index_;
  std::unordered_map<std::string, TransitionIndex> transition_index_;
};

class NetBuilder {
 public:
  NetBuilder& place(std::string id, TokenCount initial_tokens = 0, std::string name = {});
  NetBuilder& transition(std::string id, std::optional<std::string> label);
  NetBuilder& silent(std::string id) { return transition(std::move(id), std::nullopt); }
  // Either place->transition or transition->place, resolved by id.
  NetBuilder& arc(std::string_view source, std::string_view target, TokenCount weight = 1);
  NetBuilder& final_tokens(std::string_view place_id, TokenCount tokens = 1);

  // Validates; infers the final marking from sink places when none was given.
  PetriNet build() const;

 private:
  struct PendingArc {
    std::string source;
    std::string target;
    TokenCount weight;
  };
  std::vector<std::pair<std::string, TokenCount>> places_;
  std::vector<std::string> place_names_;
  std::vector<std::pair<std::string, std::optional<std::string>>> transitions_;
  std::vector<PendingArc> arcs_;
  std::vector<std::pair<std::string, TokenCount>> final_;
};

PetriNet parse_pnml(std::istream& in);
void write_pnml(std::ostream& out, const PetriNet& net, std::string_view net_id = "net1");
PetriNet load_pnml(const std::string& path);
void save_pnml(const std::string& path, const PetriNet& net);

bool is_enabled(const PetriNet& net, const Marking& marking, TransitionIndex t);
std::vector<TransitionIndex> enabled_transitions(const PetriNet& net, const Marking& marking);
// Forced firing: inputs floored at zero, outputs always produced.
Marking fire(const PetriNet& net, const Marking& marking, TransitionIndex t);

struct ReplayResult {
  TokenCount produced = 0;
  TokenCount consumed = 0;
  TokenCount missing = 0;
  TokenCount remaining = 0;
  std::optional<bool> final_reached;  // not evaluated for partial replay

  bool operator==(const ReplayResult&) const = default;
};

// Running replay position: current marking plus counters. Cheap to copy, so
// beam candidates extend it one label at a time.
struct ReplayState {
  Marking marking;
  TokenCount produced = 0;
  TokenCount consumed = 0;
  TokenCount missing = 0;
};

inline constexpr std::size_t kSilentSearchDepth = 10;

ReplayState start_replay(const PetriNet& net);
void replay_step(const PetriNet& net, ReplayState& state, std::string_view label);
// partial: skip final-marking consumption and the remaining-token count.
ReplayResult finish_replay(const PetriNet& net, const ReplayState& state, bool partial);

ReplayResult token_replay(const PetriNet& net, const Variant& variant, bool partial);
double fitness(const ReplayResult& result);
// Strips a trailing completion label; its presence forces complete replay.
double compliance(const PetriNet& net, const Variant& variant, bool partial);

}  // namespace kbmod
