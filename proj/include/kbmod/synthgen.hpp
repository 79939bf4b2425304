#pragma once

#include <cstdint>
#include <string>

#include "kbmod/event_log.hpp"
#include "kbmod/petri_net.hpp"

namespace kbmod {

// Where the Unexpected, Repairing pair sits inside a branch.
enum class ExceptionPlacement { after_first, after_last };

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_train_normal = 800;
  std::size_t n_train_exceptional = 200;
  double branch_probability = 0.5;  // probability of branch 1
  ExceptionPlacement placement = ExceptionPlacement::after_last;

  void validate() const;  // throws ConfigError
};

struct SynthDataset {
  EventLog train;
  EventLog test;  // the exceptional traces of `train`
  PetriNet exceptional_model;
};

// Start, then branch 1 (B1a, then B1b and B1c in either order) or branch 2
// (B2a, B2b, B2c). Exceptional traces add Unexpected, Repairing inside the
// branch.
SynthDataset generate(const SynthConfig& config);

// Net accepting exactly the exceptional traces.
PetriNet exceptional_net(ExceptionPlacement placement);

// Writes train.xes, test.xes and exceptional.pnml into `dir`.
void write_dataset(const std::string& dir, const SynthDataset& data);

ExceptionPlacement parse_placement(const std::string& name);
std::string to_string(ExceptionPlacement placement);

}  // namespace kbmod
