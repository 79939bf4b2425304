#include "kbmod/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kbmod/error.hpp"

namespace kbmod {

void BeamConfig::validate() const {
  if (b_size < 1) throw ConfigError("b_size must be >= 1");
  if (max_size < 1) throw ConfigError("max_size must be >= 1");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("w must be in [0, 1]");
}

double score_extend_baseline(double parent_score, double prob) { return parent_score * prob; }

double score_extend_modulated(double parent_score, double prob, double compliance, double w) {
  // std::pow(0, 0) == 1 gives the 0^0 convention.
  return parent_score * std::pow(prob, 1.0 - w) * std::pow(compliance, w);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Candidate {
  std::vector<LabelIndex> labels;  // predicted suffix, completion label included when terminated
  double log_score = 0.0;
  ReplayState replay;
  bool terminated = false;
};

// Score desc, then label sequence lexicographically by vocabulary index.
bool ranks_before(double la, const std::vector<LabelIndex>& a, double lb, const std::vector<LabelIndex>& b) {
  if (la != lb) return la > lb;
  return a < b;
}

bool candidate_before(const Candidate& a, const Candidate& b) {
  return ranks_before(a.log_score, a.labels, b.log_score, b.labels);
}

double log_term(double prob, double w) {
  if (w == 1.0) return 0.0;
  return (1.0 - w) * std::log(std::max(prob, kProbabilityFloor));
}

double log_compliance(double c, double w) {
  if (w == 0.0) return 0.0;
  if (c <= 0.0) return kNegInf;
  return w * std::log(c);
}

// Top `count` labels by probability, ties by index.
std::vector<LabelIndex> top_labels(const ProbabilityVector& p, std::size_t count) {
  std::vector<LabelIndex> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(count), idx.end(),
                    [&](LabelIndex a, LabelIndex b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
  idx.resize(count);
  return idx;
}

BeamResult make_result(const Vocabulary& vocab, const std::vector<LabelIndex>& labels, double log_score,
                       bool forced) {
  BeamResult r;
  for (LabelIndex l : labels)
    if (l != vocab.end_index()) r.suffix.labels.push_back(vocab.label(l));
  r.log_score = log_score;
  r.score = std::exp(log_score);
  r.forced_termination = forced;
  return r;
}

class Search {
 public:
  Search(const Variant& prefix, const Predictor& predictor, const PetriNet* net, const BeamConfig& config)
      : predictor_(predictor), vocab_(predictor.vocabulary()), net_(net), config_(config) {
    config_.validate();
    if (prefix.empty()) throw BoundsError("beam search needs a non-empty prefix");
    prefix_ = vocab_.encode(prefix);
    modulated_ = net_ != nullptr && config_.w > 0.0;
    root_.replay = modulated_ ? start_replay(*net_) : ReplayState{};
    if (modulated_)
      for (const auto& l : prefix.labels) replay_step(*net_, root_.replay, l);
  }

  const Candidate& root() const { return root_; }

  // Children of `parent` for its top b_size next labels.
  void expand(const Candidate& parent, double w, std::vector<Candidate>& out) {
    std::vector<LabelIndex> context(prefix_);
    context.insert(context.end(), parent.labels.begin(), parent.labels.end());
    const ProbabilityVector probs = predictor_.predict(std::span<const LabelIndex>(context));
    for (LabelIndex label : top_labels(probs, config_.b_size)) {
      Candidate child;
      child.labels = parent.labels;
      child.labels.push_back(label);
      child.terminated = label == vocab_.end_index();
      double lc = 0.0;
      if (modulated_) {
        child.replay = parent.replay;
        if (child.terminated) {
          lc = log_compliance(fitness(finish_replay(*net_, child.replay, false)), w);
        } else {
          replay_step(*net_, child.replay, vocab_.label(label));
          lc = log_compliance(fitness(finish_replay(*net_, child.replay, true)), w);
        }
      }
      child.log_score = parent.log_score + log_term(probs[label], w) + lc;
      out.push_back(std::move(child));
    }
  }

  BeamResult modulated() {
    std::vector<Candidate> queue{root_};
    std::vector<Candidate> observed;
    for (std::size_t h = 0; h <= config_.max_iter && !queue.empty(); ++h) {
      std::vector<Candidate> next;
      for (const auto& c : queue) expand(c, config_.w, next);
      std::sort(next.begin(), next.end(), candidate_before);
      if (!next.empty() && next.front().terminated)
        return make_result(vocab_, next.front().labels, next.front().log_score, false);
      queue.clear();
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (i < config_.b_size && !next[i].terminated) queue.push_back(next[i]);
        observed.push_back(std::move(next[i]));
      }
    }
    return forced(observed);
  }

  std::optional<BeamResult> checked(const ComplianceCheck& check, const Variant& prefix) {
    std::vector<Candidate> queue{root_};
    for (std::size_t h = 0; h <= config_.max_iter && !queue.empty(); ++h) {
      std::vector<Candidate> next;
      for (const auto& c : queue) expand(c, 0.0, next);
      std::sort(next.begin(), next.end(), candidate_before);
      if (next.size() > config_.max_size) next.resize(config_.max_size);
      queue.clear();
      for (auto& c : next) {
        if (!c.terminated) {
          queue.push_back(std::move(c));
          continue;
        }
        Variant trace = prefix;
        for (std::size_t i = 0; i + 1 < c.labels.size(); ++i) trace.labels.push_back(vocab_.label(c.labels[i]));
        if (check(trace)) return make_result(vocab_, c.labels, c.log_score, false);
      }
    }
    return std::nullopt;
  }

 private:
  // Best generated candidate, open ones closed with the completion label and
  // their complete-trace compliance.
  BeamResult forced(std::vector<Candidate>& observed) {
    std::sort(observed.begin(), observed.end(), candidate_before);
    bool found = false;
    double best_log = kNegInf;
    std::vector<LabelIndex> best_labels;
    for (auto& c : observed) {
      if (found && c.log_score < best_log) break;  // closing never raises a score
      double final_log = c.log_score;
      std::vector<LabelIndex> labels = c.labels;
      if (!c.terminated) {
        if (modulated_) final_log += log_compliance(fitness(finish_replay(*net_, c.replay, false)), config_.w);
        labels.push_back(vocab_.end_index());
      }
      if (!found || ranks_before(final_log, labels, best_log, best_labels)) {
        found = true;
        best_log = final_log;
        best_labels = std::move(labels);
      }
    }
    return make_result(vocab_, best_labels, best_log, true);
  }

  const Predictor& predictor_;
  const Vocabulary& vocab_;
  const PetriNet* net_;
  BeamConfig config_;
  std::vector<LabelIndex> prefix_;
  bool modulated_ = false;
  Candidate root_;
};

}  // namespace

BeamResult baseline_beam(const Variant& prefix, const Predictor& predictor, const BeamConfig& config) {
  BeamConfig c = config;
  c.w = 0.0;
  return Search(prefix, predictor, nullptr, c).modulated();
}

BeamResult kb_modulation(const Variant& prefix, const PetriNet& net, const Predictor& predictor,
                         const BeamConfig& config) {
  return Search(prefix, predictor, &net, config).modulated();
}

std::optional<BeamResult> sota_bs(const Variant& prefix, const ComplianceCheck& check, const Predictor& predictor,
                                  const BeamConfig& config) {
  BeamConfig c = config;
  c.w = 0.0;
  return Search(prefix, predictor, nullptr, c).checked(check, prefix);
}

ComplianceCheck perfect_fitness_check(const PetriNet& net) {
  return [&net](const Variant& trace) { return fitness(token_replay(net, trace, false)) == 1.0; };
}

}  // namespace kbmod
