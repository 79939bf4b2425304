#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kbmod/encoding.hpp"
#include "kbmod/event_log.hpp"

namespace kbmod {

// Next-activity distribution, indexed like the predictor's Vocabulary.
struct ProbabilityVector {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  // Non-negative entries summing to one within `tolerance`.
  bool is_valid(double tolerance = 1e-9) const;
};

// Highest-probability index; ties go to the lowest index.
LabelIndex argmax(const ProbabilityVector& p);

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  // `prefix` is non-empty and holds vocabulary indices.
  virtual ProbabilityVector predict(std::span<const LabelIndex> prefix) const = 0;
  virtual void save(const std::string& path) const = 0;

  ProbabilityVector predict(const Variant& prefix) const;
};

std::string next_activity(const Predictor& model, const Variant& prefix);

// Fixed-order Markov model with Laplace smoothing. Contexts shorter than the
// order use every available label; unseen contexts predict uniformly.
class NGramModel final : public Predictor {
 public:
  static constexpr std::size_t kDefaultOrder = 3;
  static constexpr double kDefaultAlpha = 0.01;

  NGramModel(Vocabulary vocab, std::size_t order, double alpha);

  using Predictor::predict;

  const Vocabulary& vocabulary() const override { return vocab_; }
  ProbabilityVector predict(std::span<const LabelIndex> prefix) const override;
  void save(const std::string& path) const override;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t context_count() const { return counts_.size(); }

  void add(std::span<const LabelIndex> context, LabelIndex next, std::size_t count);

  std::string to_json() const;
  static NGramModel from_json(const std::string& json);

 private:
  std::span<const LabelIndex> context_of(std::span<const LabelIndex> prefix) const;

  Vocabulary vocab_;
  std::size_t order_;
  double alpha_;
  std::map<std::vector<LabelIndex>, std::vector<double>> counts_;
};

// Trains on a prefix log built with the completion label. The vocabulary
// defaults to the prefix log's alphabet.
NGramModel train_ngram(const PrefixLog& prefix_log, std::size_t order = NGramModel::kDefaultOrder,
                       double alpha = NGramModel::kDefaultAlpha, const Vocabulary* vocab = nullptr);

// Reads either model format by its "format" field.
std::unique_ptr<Predictor> load_predictor(const std::string& path);

}  // namespace kbmod
