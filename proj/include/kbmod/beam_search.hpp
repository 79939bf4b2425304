#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "kbmod/event_log.hpp"
#include "kbmod/petri_net.hpp"
#include "kbmod/predictor.hpp"

namespace kbmod {

struct BeamConfig {
  std::size_t b_size = 3;    // next labels per candidate, and candidates kept per step
  std::size_t max_size = 3;  // queue cap of the boolean-check search only
  std::size_t max_iter = 10;
  double w = 0.0;  // modulation weight

  void validate() const;  // throws ConfigError
};

// Predictor probabilities are clamped to this floor inside the searches.
inline constexpr double kProbabilityFloor = 1e-12;

struct BeamResult {
  Variant suffix;            // predicted labels, completion label stripped
  double score = 0.0;        // exp(log_score)
  double log_score = 0.0;
  bool forced_termination = false;
};

// parent * prob
double score_extend_baseline(double parent_score, double prob);
// parent * prob^(1-w) * compliance^w, with 0^0 = 1
double score_extend_modulated(double parent_score, double prob, double compliance, double w);

// Modulated search with w = 0 and no net.
BeamResult baseline_beam(const Variant& prefix, const Predictor& predictor, const BeamConfig& config);

// Scores every candidate with the predictor and the replay compliance of the
// extended trace, keeps the best b_size per step, and returns when the top
// candidate is complete. Completed candidates below rank 0 are dropped. When
// max_iter runs out, the best candidate seen is closed with the completion
// label and flagged as forced.
BeamResult kb_modulation(const Variant& prefix, const PetriNet& net, const Predictor& predictor,
                         const BeamConfig& config);

// Receives the full trace (prefix + suffix) without the completion label.
using ComplianceCheck = std::function<bool(const Variant& trace)>;

// Unmodulated search returning the first completed candidate, in rank order,
// that passes `check`. nullopt when the queue empties or max_iter runs out.
std::optional<BeamResult> sota_bs(const Variant& prefix, const ComplianceCheck& check, const Predictor& predictor,
                                  const BeamConfig& config);

// check(trace) == (complete-trace compliance is exactly 1)
ComplianceCheck perfect_fitness_check(const PetriNet& net);

}  // namespace kbmod
