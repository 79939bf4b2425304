// Serial reference vs OpenMP kernel for the two hot paths.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kbmod/attention_net.hpp"
#include "kbmod/harness.hpp"
#include "kbmod/synthgen.hpp"

using namespace kbmod;

namespace {

struct BeamFixture {
  SynthDataset data = generate(SynthConfig{});
  NGramModel model = train_ngram(build_prefix_log(data.train, true), NGramModel::kDefaultOrder, NGramModel::kDefaultAlpha,
                                 nullptr);
  std::vector<PredictionCase> cases = make_cases(data.test, 3);
  BeamConfig config = [] {
    BeamConfig c;
    c.w = 0.9;
    c.max_iter = 12;
    return c;
  }();
};

const BeamFixture& beam_fixture() {
  static const BeamFixture f;
  return f;
}

void BM_predict_suffixes(benchmark::State& state) {
  const auto& f = beam_fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state)
    benchmark::DoNotOptimize(predict_suffixes(f.cases, f.model, &f.data.exceptional_model, f.config, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.cases.size()));
}

struct AttentionFixture {
  AttentionModel model;
  std::vector<EncodedPrefix> batch;
  std::vector<LabelIndex> targets;
};

const AttentionFixture& attention_fixture() {
  static const AttentionFixture f = [] {
    AttentionConfig cfg;
    cfg.vocab_size = 12;
    cfg.l_max = 16;
    AttentionFixture out{AttentionModel(cfg), {}, {}};
    std::mt19937_64 rng(3);
    for (int i = 0; i < 256; ++i) {
      std::vector<LabelIndex> idx(1 + rng() % (cfg.l_max - 1));
      for (auto& l : idx) l = rng() % cfg.vocab_size;
      out.batch.push_back(encode_indices(idx, cfg.vocab_size, cfg.l_max));
      out.targets.push_back(rng() % cfg.vocab_size);
    }
    return out;
  }();
  return f;
}

void BM_attention_forward(benchmark::State& state) {
  const auto& f = attention_fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.forward(f.batch, false, 0, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}

void BM_attention_gradients(benchmark::State& state) {
  const auto& f = attention_fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(f.model, f.batch, f.targets, true, 1, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}

}  // namespace

BENCHMARK(BM_predict_suffixes)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_attention_forward)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_attention_gradients)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
