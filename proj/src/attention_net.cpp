#include "kbmod/attention_net.hpp"

#include "json.hpp"
#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "kbmod/error.hpp"

namespace kbmod {

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

void AttentionConfig::validate() const {
  if (num_layers < 1 || model_dim < 1 || num_heads < 1 || ff_dim < 1 || vocab_size < 2)
    throw ConfigError("attention dimensions must be >= 1 (vocabulary >= 2)");
  if (model_dim % num_heads != 0)
    throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  if (l_max < 2) throw ConfigError("l_max must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
}

namespace {

constexpr double kLayerNormEps = 1e-5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct LayerOffsets {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
};

struct Layout {
  std::size_t w_in = 0, b_in = 0, w_out = 0, b_out = 0, total = 0;
  std::vector<LayerOffsets> layers;

  explicit Layout(const AttentionConfig& c) {
    const std::size_t d = c.model_dim, f = c.ff_dim, v = c.vocab_size;
    auto take = [this](std::size_t n) {
      const std::size_t at = total;
      total += n;
      return at;
    };
    w_in = take(v * d);
    b_in = take(d);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      LayerOffsets o{};
      o.wq = take(d * d);
      o.bq = take(d);
      o.wk = take(d * d);
      o.bk = take(d);
      o.wv = take(d * d);
      o.bv = take(d);
      o.wo = take(d * d);
      o.bo = take(d);
      o.ln1_g = take(d);
      o.ln1_b = take(d);
      o.w1 = take(d * f);
      o.b1 = take(f);
      o.w2 = take(f * d);
      o.b2 = take(d);
      o.ln2_g = take(d);
      o.ln2_b = take(d);
      layers.push_back(o);
    }
    w_out = take(d * v);
    b_out = take(v);
  }
};

// y (n x out) = x (n x in) * w (in x out) + b
void linear(const double* x, const double* w, const double* b, double* y, std::size_t n, std::size_t in,
            std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    double* yr = y + r * out;
    for (std::size_t j = 0; j < out; ++j) yr[j] = b[j];
    const double* xr = x + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      const double* wi = w + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wi[j];
    }
  }
}

// Accumulates dW += x^T dy, db += colsum(dy) and (when dx != nullptr) dx += dy w^T.
void linear_backward(const double* x, const double* w, const double* dy, double* dx, double* dw, double* db,
                     std::size_t n, std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy + r * out;
    const double* xr = x + r * in;
    for (std::size_t j = 0; j < out; ++j) db[j] += dyr[j];
    for (std::size_t i = 0; i < in; ++i) {
      const double* wi = w + i * out;
      double* dwi = dw + i * out;
      const double xi = xr[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        dwi[j] += xi * dyr[j];
        acc += dyr[j] * wi[j];
      }
      if (dx != nullptr) dx[r * in + i] += acc;
    }
  }
}

void layer_norm(const double* x, const double* gamma, const double* beta, double* xhat, double* inv_std, double* y,
                std::size_t n, std::size_t d) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mean) * inv;
      y[r * d + j] = xhat[r * d + j] * gamma[j] + beta[j];
    }
  }
}

// dx = d(LN)/dx^T dy; accumulates dgamma, dbeta. dx is overwritten.
void layer_norm_backward(const double* dy, const double* xhat, const double* inv_std, const double* gamma,
                         double* dx, double* dgamma, double* dbeta, std::size_t n, std::size_t d) {
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0, sum_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dy[r * d + j];
      dgamma[j] += g * xhat[r * d + j];
      dbeta[j] += g;
      dxhat[j] = g * gamma[j];
      sum += dxhat[j];
      sum_xhat += dxhat[j] * xhat[r * d + j];
    }
    const double dd = static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j)
      dx[r * d + j] = inv_std[r] / dd * (dd * dxhat[j] - sum - xhat[r * d + j] * sum_xhat);
  }
}

struct LayerTape {
  std::vector<double> input, q, k, v, probs, context, xhat1, inv1, h1, pre_act, act, xhat2, inv2, output;
};

struct ExampleTape {
  std::size_t n = 0;
  std::vector<double> x;  // n x V
  std::vector<LayerTape> layers;
  std::vector<double> pooled;
  std::vector<std::size_t> pooled_row;
  std::vector<double> mask;  // dropout scale per pooled unit
  std::vector<double> dropped;
  std::vector<double> probs;
};

std::vector<double> dropout_mask(const AttentionConfig& c, bool training, std::uint64_t seed, std::size_t example) {
  std::vector<double> mask(c.model_dim, 1.0);
  if (!training || c.dropout_rate <= 0.0) return mask;
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(example + 1)));
  const double keep_scale = 1.0 / (1.0 - c.dropout_rate);
  for (auto& m : mask) m = unit_uniform(rng) < c.dropout_rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

struct AttentionKernels {
  static void check_input(const AttentionConfig& c, const EncodedPrefix& in) {
    if (in.rows != c.rows() || in.cols != c.vocab_size || in.matrix.size() != in.rows * in.cols)
      throw ShapeError("encoded prefix is " + std::to_string(in.rows) + "x" + std::to_string(in.cols) +
                       ", model expects " + std::to_string(c.rows()) + "x" + std::to_string(c.vocab_size));
    if (in.true_length < 1 || in.true_length > in.rows) throw ShapeError("encoded prefix has no real rows");
  }

  static void run_forward(const AttentionModel& m, const Layout& lay, const EncodedPrefix& in,
                          std::vector<double> mask, ExampleTape& t) {
    const auto& c = m.config_;
    const double* p = m.params_.data();
    const std::size_t n = in.true_length, d = c.model_dim, f = c.ff_dim, v = c.vocab_size, hd = c.head_dim();
    t.n = n;
    t.x.assign(in.matrix.begin(), in.matrix.begin() + static_cast<long>(n * v));
    std::vector<double> h(n * d);
    linear(t.x.data(), p + lay.w_in, p + lay.b_in, h.data(), n, v, d);
    if (c.positional_encoding) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double freq = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(d));
          h[i * d + j] += j % 2 == 0 ? std::sin(static_cast<double>(i) * freq) : std::cos(static_cast<double>(i) * freq);
        }
    }
    t.layers.resize(c.num_layers);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      const auto& o = lay.layers[l];
      auto& L = t.layers[l];
      L.input = h;
      L.q.resize(n * d);
      L.k.resize(n * d);
      L.v.resize(n * d);
      linear(h.data(), p + o.wq, p + o.bq, L.q.data(), n, d, d);
      linear(h.data(), p + o.wk, p + o.bk, L.k.data(), n, d, d);
      linear(h.data(), p + o.wv, p + o.bv, L.v.data(), n, d, d);
      L.probs.assign(c.num_heads * n * n, 0.0);
      L.context.assign(n * d, 0.0);
      for (std::size_t head = 0; head < c.num_heads; ++head) {
        const std::size_t off = head * hd;
        double* P = L.probs.data() + head * n * n;
        for (std::size_t i = 0; i < n; ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t e = 0; e < hd; ++e) s += L.q[i * d + off + e] * L.k[j * d + off + e];
            P[i * n + j] = s * scale;
            mx = std::max(mx, P[i * n + j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            P[i * n + j] = std::exp(P[i * n + j] - mx);
            z += P[i * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) P[i * n + j] /= z;
          for (std::size_t j = 0; j < n; ++j)
            for (std::size_t e = 0; e < hd; ++e) L.context[i * d + off + e] += P[i * n + j] * L.v[j * d + off + e];
        }
      }
      std::vector<double> r1(n * d);
      linear(L.context.data(), p + o.wo, p + o.bo, r1.data(), n, d, d);
      for (std::size_t i = 0; i < n * d; ++i) r1[i] += h[i];
      L.xhat1.resize(n * d);
      L.inv1.resize(n);
      L.h1.resize(n * d);
      layer_norm(r1.data(), p + o.ln1_g, p + o.ln1_b, L.xhat1.data(), L.inv1.data(), L.h1.data(), n, d);
      L.pre_act.resize(n * f);
      linear(L.h1.data(), p + o.w1, p + o.b1, L.pre_act.data(), n, d, f);
      L.act.resize(n * f);
      for (std::size_t i = 0; i < n * f; ++i) L.act[i] = std::max(0.0, L.pre_act[i]);
      std::vector<double> r2(n * d);
      linear(L.act.data(), p + o.w2, p + o.b2, r2.data(), n, f, d);
      for (std::size_t i = 0; i < n * d; ++i) r2[i] += L.h1[i];
      L.xhat2.resize(n * d);
      L.inv2.resize(n);
      L.output.resize(n * d);
      layer_norm(r2.data(), p + o.ln2_g, p + o.ln2_b, L.xhat2.data(), L.inv2.data(), L.output.data(), n, d);
      h = L.output;
    }
    t.pooled.assign(d, -std::numeric_limits<double>::infinity());
    t.pooled_row.assign(d, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (h[i * d + j] > t.pooled[j]) {
          t.pooled[j] = h[i * d + j];
          t.pooled_row[j] = i;
        }
    t.mask = std::move(mask);
    t.dropped.resize(d);
    for (std::size_t j = 0; j < d; ++j) t.dropped[j] = t.pooled[j] * t.mask[j];
    t.probs.resize(v);
    linear(t.dropped.data(), p + lay.w_out, p + lay.b_out, t.probs.data(), 1, d, v);
    const double mx = *std::max_element(t.probs.begin(), t.probs.end());
    double z = 0.0;
    for (auto& x : t.probs) {
      x = std::exp(x - mx);
      z += x;
    }
    for (auto& x : t.probs) x /= z;
  }

  static void run_backward(const AttentionModel& m, const Layout& lay, const ExampleTape& t, LabelIndex target,
                           double weight, double* g) {
    const auto& c = m.config_;
    const double* p = m.params_.data();
    const std::size_t n = t.n, d = c.model_dim, f = c.ff_dim, v = c.vocab_size, hd = c.head_dim();
    std::vector<double> dlogits(t.probs);
    dlogits[target] -= 1.0;
    for (auto& x : dlogits) x *= weight;
    std::vector<double> ddropped(d, 0.0);
    linear_backward(t.dropped.data(), p + lay.w_out, dlogits.data(), ddropped.data(), g + lay.w_out, g + lay.b_out, 1, d,
                    v);
    std::vector<double> dh(n * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) dh[t.pooled_row[j] * d + j] = ddropped[j] * t.mask[j];

    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t l = c.num_layers; l-- > 0;) {
      const auto& o = lay.layers[l];
      const auto& L = t.layers[l];
      std::vector<double> dr2(n * d);
      layer_norm_backward(dh.data(), L.xhat2.data(), L.inv2.data(), p + o.ln2_g, dr2.data(), g + o.ln2_g, g + o.ln2_b,
                          n, d);
      std::vector<double> dh1(dr2);
      std::vector<double> dact(n * f, 0.0);
      linear_backward(L.act.data(), p + o.w2, dr2.data(), dact.data(), g + o.w2, g + o.b2, n, f, d);
      for (std::size_t i = 0; i < n * f; ++i)
        if (L.pre_act[i] <= 0.0) dact[i] = 0.0;
      linear_backward(L.h1.data(), p + o.w1, dact.data(), dh1.data(), g + o.w1, g + o.b1, n, d, f);
      std::vector<double> dr1(n * d);
      layer_norm_backward(dh1.data(), L.xhat1.data(), L.inv1.data(), p + o.ln1_g, dr1.data(), g + o.ln1_g,
                          g + o.ln1_b, n, d);
      std::vector<double> dinput(dr1);
      std::vector<double> dcontext(n * d, 0.0);
      linear_backward(L.context.data(), p + o.wo, dr1.data(), dcontext.data(), g + o.wo, g + o.bo, n, d, d);
      std::vector<double> dq(n * d, 0.0), dk(n * d, 0.0), dv(n * d, 0.0), dp(n), ds(n);
      for (std::size_t head = 0; head < c.num_heads; ++head) {
        const std::size_t off = head * hd;
        const double* P = L.probs.data() + head * n * n;
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t e = 0; e < hd; ++e) s += dcontext[i * d + off + e] * L.v[j * d + off + e];
            dp[j] = s;
            dot += s * P[i * n + j];
            for (std::size_t e = 0; e < hd; ++e) dv[j * d + off + e] += P[i * n + j] * dcontext[i * d + off + e];
          }
          for (std::size_t j = 0; j < n; ++j) ds[j] = P[i * n + j] * (dp[j] - dot) * scale;
          for (std::size_t j = 0; j < n; ++j)
            for (std::size_t e = 0; e < hd; ++e) {
              dq[i * d + off + e] += ds[j] * L.k[j * d + off + e];
              dk[j * d + off + e] += ds[j] * L.q[i * d + off + e];
            }
        }
      }
      linear_backward(L.input.data(), p + o.wq, dq.data(), dinput.data(), g + o.wq, g + o.bq, n, d, d);
      linear_backward(L.input.data(), p + o.wk, dk.data(), dinput.data(), g + o.wk, g + o.bk, n, d, d);
      linear_backward(L.input.data(), p + o.wv, dv.data(), dinput.data(), g + o.wv, g + o.bv, n, d, d);
      dh = std::move(dinput);
    }
    linear_backward(t.x.data(), p + lay.w_in, dh.data(), nullptr, g + lay.w_in, g + lay.b_in, n, v, d);
  }
};

AttentionModel::AttentionModel(AttentionConfig config) : config_(config) {
  config_.validate();
  const Layout lay(config_);
  params_.assign(lay.total, 0.0);
  std::mt19937_64 rng(config_.seed);
  auto glorot = [&](std::size_t at, std::size_t fan_in, std::size_t fan_out, double gain) {
    const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) params_[at + i] = (2.0 * unit_uniform(rng) - 1.0) * limit;
  };
  const std::size_t d = config_.model_dim, f = config_.ff_dim, v = config_.vocab_size;
  glorot(lay.w_in, v, d, 1.0);
  for (const auto& o : lay.layers) {
    glorot(o.wq, d, d, 1.0);
    glorot(o.wk, d, d, 1.0);
    glorot(o.wv, d, d, 1.0);
    glorot(o.wo, d, d, 1.0);
    glorot(o.w1, d, f, 1.0);
    glorot(o.w2, f, d, 1.0);
    std::fill_n(params_.begin() + static_cast<long>(o.ln1_g), d, 1.0);
    std::fill_n(params_.begin() + static_cast<long>(o.ln2_g), d, 1.0);
  }
  // Small output weights keep the untrained distribution close to uniform.
  glorot(lay.w_out, d, v, 0.1);
}

ProbabilityVector AttentionModel::forward(const EncodedPrefix& input) const {
  AttentionKernels::check_input(config_, input);
  const Layout lay(config_);
  ExampleTape tape;
  AttentionKernels::run_forward(*this, lay, input, dropout_mask(config_, false, 0, 0), tape);
  return ProbabilityVector{std::move(tape.probs)};
}

std::vector<ProbabilityVector> AttentionModel::forward(std::span<const EncodedPrefix> batch, bool training,
                                                       std::uint64_t dropout_seed, Execution exec) const {
  for (const auto& in : batch) AttentionKernels::check_input(config_, in);
  const Layout lay(config_);
  std::vector<ProbabilityVector> out(batch.size());
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
  auto one = [&](std::ptrdiff_t i) {
    ExampleTape tape;
    AttentionKernels::run_forward(*this, lay, batch[static_cast<std::size_t>(i)],
                                  dropout_mask(config_, training, dropout_seed, static_cast<std::size_t>(i)), tape);
    out[static_cast<std::size_t>(i)].probs = std::move(tape.probs);
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) one(i);
  }
  return out;
}

LossAndGradients loss_and_gradients(const AttentionModel& model, std::span<const EncodedPrefix> batch,
                                    std::span<const LabelIndex> targets, bool training, std::uint64_t dropout_seed,
                                    Execution exec) {
  const auto& c = model.config();
  if (batch.size() != targets.size()) throw ShapeError("batch and target counts differ");
  if (batch.empty()) throw ShapeError("empty batch");
  for (const auto& in : batch) AttentionKernels::check_input(c, in);
  for (auto t : targets)
    if (t >= c.vocab_size) throw VocabularyError("target index out of range");

  const Layout lay(c);
  const std::size_t np = model.parameter_count();
  const double weight = 1.0 / static_cast<double>(batch.size());
  // Per-example buffers summed in index order: identical for any thread count.
  std::vector<double> per_example(batch.size() * np, 0.0);
  std::vector<double> losses(batch.size(), 0.0);
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
  auto one = [&](std::ptrdiff_t ii) {
    const auto i = static_cast<std::size_t>(ii);
    ExampleTape tape;
    AttentionKernels::run_forward(model, lay, batch[i], dropout_mask(c, training, dropout_seed, i), tape);
    losses[i] = -std::log(std::max(tape.probs[targets[i]], 1e-300));
    AttentionKernels::run_backward(model, lay, tape, targets[i], weight, per_example.data() + i * np);
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 2)
    for (std::ptrdiff_t i = 0; i < count; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) one(i);
  }
  LossAndGradients out;
  out.gradients.assign(np, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i] * weight;
    const double* gi = per_example.data() + i * np;
    for (std::size_t k = 0; k < np; ++k) out.gradients[k] += gi[k];
  }
  return out;
}

TrainingSet make_training_set(const PrefixLog& prefix_log, const Vocabulary& vocab, std::size_t l_max) {
  TrainingSet set;
  for (const auto& e : prefix_log.entries()) {
    const auto idx = vocab.encode(e.prefix);
    const auto window = truncate_to_window(idx, l_max);
    const EncodedPrefix enc = encode_indices(window, vocab.size(), l_max);
    const LabelIndex target = vocab.index_of(e.next);
    for (std::size_t k = 0; k < e.count; ++k) {
      set.inputs.push_back(enc);
      set.targets.push_back(target);
    }
  }
  return set;
}

double mean_cross_entropy(const AttentionModel& model, const TrainingSet& data, Execution exec) {
  if (data.inputs.empty()) return 0.0;
  const auto probs = model.forward(data.inputs, false, 0, exec);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) sum -= std::log(std::max(probs[i][data.targets[i]], 1e-300));
  return sum / static_cast<double>(probs.size());
}

TrainingResult train_attention(const PrefixLog& prefix_log, const Vocabulary& vocab, AttentionConfig config,
                               const TrainOptions& options) {
  if (prefix_log.entries().empty()) throw ConfigError("cannot train on an empty prefix log");
  if (config.vocab_size != vocab.size())
    throw VocabularyError("config vocab_size " + std::to_string(config.vocab_size) + " != vocabulary size " +
                          std::to_string(vocab.size()));
  if (options.batch_size < 1 || options.epochs < 1) throw ConfigError("epochs and batch size must be >= 1");
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in [0, 1)");

  TrainingSet all = make_training_set(prefix_log, vocab, config.l_max);
  std::mt19937_64 rng(splitmix64(config.seed));
  std::vector<std::size_t> order(all.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_val = static_cast<std::size_t>(options.validation_fraction * static_cast<double>(order.size()));
  TrainingSet train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_val ? val : train;
    dst.inputs.push_back(all.inputs[order[i]]);
    dst.targets.push_back(all.targets[order[i]]);
  }
  if (train.inputs.empty()) throw ConfigError("validation split leaves no training data");

  AttentionModel model(config);
  TrainingResult result{model, {}, 0};
  double best = std::numeric_limits<double>::infinity();

  const std::size_t np = model.parameter_count();
  std::vector<double> m1(np, 0.0), m2(np, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::size_t> idx(train.inputs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<EncodedPrefix> batch;
  std::vector<LabelIndex> targets;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < idx.size(); start += options.batch_size) {
      const std::size_t end = std::min(idx.size(), start + options.batch_size);
      batch.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train.inputs[idx[i]]);
        targets.push_back(train.targets[idx[i]]);
      }
      auto lg = loss_and_gradients(model, batch, targets, true, rng(), options.exec);
      epoch_loss += lg.loss * static_cast<double>(end - start);
      seen += end - start;
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t k = 0; k < np; ++k) {
        m1[k] = beta1 * m1[k] + (1.0 - beta1) * lg.gradients[k];
        m2[k] = beta2 * m2[k] + (1.0 - beta2) * lg.gradients[k] * lg.gradients[k];
        params[k] -= options.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + eps);
      }
    }
    EpochStats stats{epoch, epoch_loss / static_cast<double>(seen), 0.0};
    stats.validation_loss = val.inputs.empty() ? mean_cross_entropy(model, train, options.exec)
                                               : mean_cross_entropy(model, val, options.exec);
    spdlog::debug("epoch {}: train {:.4f} validation {:.4f}", epoch, stats.train_loss, stats.validation_loss);
    result.history.push_back(stats);
    if (stats.validation_loss < best) {
      best = stats.validation_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

AttentionPredictor::AttentionPredictor(AttentionModel model, Vocabulary vocab)
    : model_(std::move(model)), vocab_(std::move(vocab)) {
  if (model_.config().vocab_size != vocab_.size()) throw VocabularyError("model and vocabulary sizes differ");
}

AttentionPredictor::AttentionPredictor(const AttentionPredictor& other)
    : model_(other.model_), vocab_(other.vocab_) {}

ProbabilityVector AttentionPredictor::predict(std::span<const LabelIndex> prefix) const {
  if (prefix.empty()) throw BoundsError("prediction needs a non-empty prefix");
  const auto window = truncate_to_window(prefix, model_.config().l_max);
  if (window.size() < prefix.size() && !warned_truncation_.exchange(true))
    spdlog::warn("prefix of length {} truncated to the last {} labels", prefix.size(), window.size());
  return model_.forward(encode_indices(window, vocab_.size(), model_.config().l_max));
}

nlohmann::json AttentionPredictor::to_json() const {
  const auto& c = model_.config();
  nlohmann::json j;
  j["format"] = "kbmod-attention";
  j["version"] = 1;
  j["config"] = {{"num_layers", c.num_layers},   {"model_dim", c.model_dim},     {"num_heads", c.num_heads},
                 {"ff_dim", c.ff_dim},           {"dropout_rate", c.dropout_rate}, {"l_max", c.l_max},
                 {"vocab_size", c.vocab_size},   {"seed", c.seed},               {"positional_encoding", c.positional_encoding}};
  j["vocabulary"] = vocab_.labels();
  j["parameters"] = std::vector<double>(model_.parameters().begin(), model_.parameters().end());
  return j;
}

AttentionPredictor AttentionPredictor::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "kbmod-attention" || j.value("version", 0) != 1)
    throw ParseError("not a version-1 attention checkpoint");
  const auto& cj = j.at("config");
  AttentionConfig c;
  c.num_layers = cj.at("num_layers").get<std::size_t>();
  c.model_dim = cj.at("model_dim").get<std::size_t>();
  c.num_heads = cj.at("num_heads").get<std::size_t>();
  c.ff_dim = cj.at("ff_dim").get<std::size_t>();
  c.dropout_rate = cj.at("dropout_rate").get<double>();
  c.l_max = cj.at("l_max").get<std::size_t>();
  c.vocab_size = cj.at("vocab_size").get<std::size_t>();
  c.seed = cj.at("seed").get<std::uint64_t>();
  c.positional_encoding = cj.at("positional_encoding").get<bool>();
  AttentionModel model(c);
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != model.parameter_count()) throw ParseError("checkpoint parameter count mismatch");
  std::copy(params.begin(), params.end(), model.parameters().begin());
  return AttentionPredictor(std::move(model), Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()));
}

void AttentionPredictor::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json().dump() << '\n';
}

}  // namespace kbmod
