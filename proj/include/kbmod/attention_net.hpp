#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "kbmod/encoding.hpp"
#include "kbmod/parallel.hpp"
#include "kbmod/predictor.hpp"

namespace kbmod {

struct AttentionConfig {
  std::size_t num_layers = 2;
  std::size_t model_dim = 32;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 64;
  double dropout_rate = 0.1;
  std::size_t l_max = 2;
  std::size_t vocab_size = 2;
  std::uint64_t seed = 42;
  bool positional_encoding = true;

  // Throws ConfigError.
  void validate() const;
  std::size_t head_dim() const { return model_dim / num_heads; }
  std::size_t rows() const { return l_max - 1; }
};

// Encoder stack (self-attention + feed-forward, each with a residual
// connection and layer norm), global max pooling over the real rows,
// dropout, and a softmax output layer. Padding rows never reach attention or
// pooling.
class AttentionModel {
 public:
  explicit AttentionModel(AttentionConfig config);

  const AttentionConfig& config() const { return config_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  ProbabilityVector forward(const EncodedPrefix& input) const;
  // `dropout_seed` fixes the masks per example index, independent of threads.
  std::vector<ProbabilityVector> forward(std::span<const EncodedPrefix> batch, bool training,
                                         std::uint64_t dropout_seed = 0,
                                         Execution exec = Execution::parallel) const;

 private:
  friend struct AttentionKernels;

  AttentionConfig config_;
  std::vector<double> params_;
};

struct LossAndGradients {
  double loss = 0.0;  // mean cross-entropy over the batch
  std::vector<double> gradients;
};

LossAndGradients loss_and_gradients(const AttentionModel& model, std::span<const EncodedPrefix> batch,
                                    std::span<const LabelIndex> targets, bool training,
                                    std::uint64_t dropout_seed = 0, Execution exec = Execution::parallel);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  Execution exec = Execution::parallel;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainingResult {
  AttentionModel model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
};

struct TrainingSet {
  std::vector<EncodedPrefix> inputs;
  std::vector<LabelIndex> targets;
};

// One example per prefix-log occurrence; over-long prefixes keep their most
// recent l_max - 1 labels.
TrainingSet make_training_set(const PrefixLog& prefix_log, const Vocabulary& vocab, std::size_t l_max);

// Adam; returns the parameters of the epoch with the lowest validation loss.
TrainingResult train_attention(const PrefixLog& prefix_log, const Vocabulary& vocab, AttentionConfig config,
                               const TrainOptions& options);

double mean_cross_entropy(const AttentionModel& model, const TrainingSet& data,
                          Execution exec = Execution::parallel);

class AttentionPredictor final : public Predictor {
 public:
  AttentionPredictor(AttentionModel model, Vocabulary vocab);
  AttentionPredictor(const AttentionPredictor& other);

  using Predictor::predict;

  const Vocabulary& vocabulary() const override { return vocab_; }
  ProbabilityVector predict(std::span<const LabelIndex> prefix) const override;
  void save(const std::string& path) const override;

  const AttentionModel& model() const { return model_; }

  nlohmann::json to_json() const;
  static AttentionPredictor from_json(const nlohmann::json& j);

 private:
  AttentionModel model_;
  Vocabulary vocab_;
  mutable std::atomic<bool> warned_truncation_{false};
};

}  // namespace kbmod
