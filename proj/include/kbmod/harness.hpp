#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbmod/attention_net.hpp"
#include "kbmod/beam_search.hpp"
#include "kbmod/evaluation.hpp"
#include "kbmod/event_log.hpp"
#include "kbmod/parallel.hpp"
#include "kbmod/petri_net.hpp"
#include "kbmod/predictor.hpp"
#include "kbmod/synthgen.hpp"

namespace kbmod {

// No cluster of the length-k prefixes has two variants.
class EmptySplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSplit {
  std::size_t k = 0;
  EventLog train;  // the entire log
  EventLog test;   // traces of each cluster's second most frequent variant
  EventLog discovery_export;
};

// Clusters traces longer than k by their length-k prefix and takes the second
// variant of every cluster by (count desc, variant asc). Throws
// EmptySplitError when no cluster qualifies.
ExperimentSplit build_split(const EventLog& log, std::size_t k);

struct PredictionCase {
  std::string case_id;
  Variant prefix;
  Variant truth;  // remaining suffix
};

// One case per trace longer than k, in log order.
std::vector<PredictionCase> make_cases(const EventLog& log, std::size_t k);

// kb_modulation when `net` is given and config.w > 0, baseline_beam otherwise.
// Results follow case order for either execution mode.
std::vector<BeamResult> predict_suffixes(const std::vector<PredictionCase>& cases, const Predictor& predictor,
                                         const PetriNet* net, const BeamConfig& config,
                                         Execution exec = Execution::parallel);

struct SweepRow {
  std::string dataset;
  std::string k;  // prefix length, or "micro"
  double w = 0.0;
  double mean_similarity = 0.0;
  std::size_t n_cases = 0;
  std::size_t forced_terminations = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  // Row for (k, w); nullptr if absent. w is matched to 1e-9.
  const SweepRow* find(const std::string& k, double w) const;
};

// dataset,k,w,mean_similarity,n_cases,forced_terminations
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
SweepResult read_sweep_csv(std::istream& in);

// Baseline at w = 0 and BK at the w with the best micro average (ties to the
// smaller w), one row per k plus the micro row.
std::vector<SummaryRow> summarize(const SweepResult& sweep);

// "start:stop:step" or a comma-separated list.
std::vector<double> parse_w_grid(const std::string& spec);
std::vector<double> default_w_grid();  // 0, 0.05, ..., 0.95

enum class PredictorKind { ngram, attention };
PredictorKind parse_predictor_kind(const std::string& name);

struct ExperimentConfig {
  std::string dataset = "synthetic";
  std::vector<std::size_t> prefix_lengths{3, 4, 5, 6, 7};
  std::vector<double> w_grid = default_w_grid();
  std::size_t b_size = 3;
  std::optional<std::size_t> max_iter;  // default: maximum trace length of the log
  PredictorKind predictor = PredictorKind::ngram;
  std::size_t ngram_order = NGramModel::kDefaultOrder;
  double ngram_alpha = NGramModel::kDefaultAlpha;
  AttentionConfig attention;  // l_max and vocab_size are filled from the log
  TrainOptions training;
  Execution exec = Execution::parallel;

  void validate() const;
};

std::unique_ptr<Predictor> train_predictor(const EventLog& log, const ExperimentConfig& config);

struct ExperimentOutcome {
  SweepResult sweep;
  std::vector<SummaryRow> summary;
};

// Evaluates every w of the grid on the per-k cases. A k without cases or
// without a net is skipped with a warning.
SweepResult run_sweep(const std::string& dataset, const std::map<std::size_t, std::vector<PredictionCase>>& cases,
                      const std::map<std::size_t, const PetriNet*>& nets, const Predictor& predictor,
                      const std::vector<double>& w_grid, const BeamConfig& beam, Execution exec);

// Generates the synthetic data, trains on the train log and evaluates the
// exceptional traces against the exceptional net.
ExperimentOutcome run_synthetic_experiment(const SynthConfig& synth, const ExperimentConfig& config);
ExperimentOutcome run_synthetic_experiment(const SynthDataset& data, const ExperimentConfig& config);

// Per-k split, training on the whole log and evaluation against the supplied
// net of each k.
ExperimentOutcome run_reallife_experiment(const EventLog& log, const std::map<std::size_t, PetriNet>& nets,
                                          const ExperimentConfig& config);

}  // namespace kbmod
