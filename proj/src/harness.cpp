#include "kbmod/harness.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "kbmod/error.hpp"

namespace kbmod {

ExperimentSplit build_split(const EventLog& log, std::size_t k) {
  if (k == 0) throw ConfigError("prefix length must be >= 1");
  // prefix -> variant -> trace indices
  std::map<Variant, std::map<Variant, std::vector<std::size_t>>> clusters;
  const auto& traces = log.traces();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].size() <= k) continue;
    Variant v = variant_of(traces[i]);
    clusters[prefix(v, k)][v].push_back(i);
  }

  std::vector<std::size_t> picked;
  for (const auto& [pre, variants] : clusters) {
    if (variants.size() < 2) continue;
    std::vector<const std::pair<const Variant, std::vector<std::size_t>>*> ranked;
    for (const auto& entry : variants) ranked.push_back(&entry);
    std::stable_sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) {
      if (a->second.size() != b->second.size()) return a->second.size() > b->second.size();
      return a->first < b->first;
    });
    const auto& v2 = ranked[1]->second;
    picked.insert(picked.end(), v2.begin(), v2.end());
  }
  if (picked.empty()) throw EmptySplitError("no cluster of length-" + std::to_string(k) + " prefixes has two variants");
  std::sort(picked.begin(), picked.end());

  std::vector<Trace> test;
  for (std::size_t i : picked) test.push_back(traces[i]);
  ExperimentSplit split{k, log, EventLog(test), EventLog(test)};
  return split;
}

std::vector<PredictionCase> make_cases(const EventLog& log, std::size_t k) {
  std::vector<PredictionCase> cases;
  for (const auto& t : log.traces()) {
    if (t.size() <= k) continue;
    Variant v = variant_of(t);
    cases.push_back({t.case_id, prefix(v, k), suffix(v, k)});
  }
  return cases;
}

std::vector<BeamResult> predict_suffixes(const std::vector<PredictionCase>& cases, const Predictor& predictor,
                                         const PetriNet* net, const BeamConfig& config, Execution exec) {
  config.validate();
  std::vector<BeamResult> out(cases.size());
  const bool modulated = net != nullptr && config.w > 0.0;
  auto run_one = [&](std::size_t i) {
    out[i] = modulated ? kb_modulation(cases[i].prefix, *net, predictor, config)
                       : baseline_beam(cases[i].prefix, predictor, config);
  };

  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < cases.size(); ++i) run_one(i);
    return out;
  }
  std::exception_ptr error;
  const long n = static_cast<long>(cases.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    try {
      run_one(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(kbmod_predict_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

const SweepRow* SweepResult::find(const std::string& k, double w) const {
  for (const auto& r : rows)
    if (r.k == k && std::abs(r.w - w) < 1e-9) return &r;
  return nullptr;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "dataset,k,w,mean_similarity,n_cases,forced_terminations\n";
  for (const auto& r : sweep.rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g,%.6f", r.w, r.mean_similarity);
    out << r.dataset << ',' << r.k << ',' << buf << ',' << r.n_cases << ',' << r.forced_terminations << '\n';
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  SweepResult sweep;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty sweep file", 1, 1);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 6) throw ParseError("expected 6 sweep columns", row, 1);
    try {
      sweep.rows.push_back({fields[0], fields[1], std::stod(fields[2]), std::stod(fields[3]),
                            static_cast<std::size_t>(std::stoul(fields[4])),
                            static_cast<std::size_t>(std::stoul(fields[5]))});
    } catch (const std::logic_error&) {
      throw ParseError("bad number in sweep row", row, 1);
    }
  }
  return sweep;
}

std::vector<SummaryRow> summarize(const SweepResult& sweep) {
  std::vector<SummaryRow> out;
  std::map<std::string, std::vector<const SweepRow*>> by_dataset;
  std::vector<std::string> order;
  for (const auto& r : sweep.rows) {
    if (!by_dataset.count(r.dataset)) order.push_back(r.dataset);
    by_dataset[r.dataset].push_back(&r);
  }
  for (const auto& dataset : order) {
    const auto& rows = by_dataset[dataset];
    const SweepRow* best = nullptr;
    for (const auto* r : rows)
      if (r->k == "micro" && (!best || r->mean_similarity > best->mean_similarity ||
                              (r->mean_similarity == best->mean_similarity && r->w < best->w)))
        best = r;
    if (!best) continue;
    std::vector<std::string> ks;
    for (const auto* r : rows)
      if (std::find(ks.begin(), ks.end(), r->k) == ks.end()) ks.push_back(r->k);
    for (const auto& k : ks) {
      const SweepRow *base = nullptr, *bk = nullptr;
      for (const auto* r : rows) {
        if (r->k != k) continue;
        if (std::abs(r->w) < 1e-9) base = r;
        if (std::abs(r->w - best->w) < 1e-9) bk = r;
      }
      if (base && bk) out.push_back({dataset, k, base->mean_similarity, bk->mean_similarity, best->w});
    }
  }
  return out;
}

namespace {

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "' in w grid");
  }
  if (used != s.size()) throw ConfigError("bad number '" + s + "' in w grid");
  return v;
}

}  // namespace

std::vector<double> parse_w_grid(const std::string& spec) {
  std::vector<double> grid;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("w grid range must be start:stop:step");
    const double start = parse_double(parts[0]), stop = parse_double(parts[1]), step = parse_double(parts[2]);
    if (!(step > 0.0) || stop < start) throw ConfigError("w grid range needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) grid.push_back(std::round((start + step * i) * 1e9) / 1e9);
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) grid.push_back(parse_double(p));
  }
  if (grid.empty()) throw ConfigError("empty w grid");
  for (double w : grid)
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("w values must be in [0, 1]");
  return grid;
}

std::vector<double> default_w_grid() { return parse_w_grid("0:0.95:0.05"); }

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "ngram") return PredictorKind::ngram;
  if (name == "attention") return PredictorKind::attention;
  throw ConfigError("unknown predictor '" + name + "' (ngram, attention)");
}

void ExperimentConfig::validate() const {
  if (prefix_lengths.empty()) throw ConfigError("no prefix lengths");
  for (auto k : prefix_lengths)
    if (k == 0) throw ConfigError("prefix lengths must be >= 1");
  if (w_grid.empty()) throw ConfigError("empty w grid");
  for (double w : w_grid)
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("w values must be in [0, 1]");
  if (b_size == 0) throw ConfigError("b_size must be >= 1");
  if (max_iter && *max_iter == 0) throw ConfigError("max_iter must be >= 1");
  if (ngram_order == 0) throw ConfigError("ngram order must be >= 1");
  if (!(ngram_alpha > 0.0)) throw ConfigError("ngram alpha must be positive");
}

std::unique_ptr<Predictor> train_predictor(const EventLog& log, const ExperimentConfig& config) {
  const PrefixLog prefixes = build_prefix_log(log, true);
  const Vocabulary vocab = build_vocabulary(log);
  if (config.predictor == PredictorKind::ngram)
    return std::make_unique<NGramModel>(train_ngram(prefixes, config.ngram_order, config.ngram_alpha, &vocab));
  AttentionConfig ac = config.attention;
  ac.vocab_size = vocab.size();
  ac.l_max = log.max_trace_length() + 1;
  TrainOptions opts = config.training;
  opts.exec = config.exec;
  TrainingResult trained = train_attention(prefixes, vocab, ac, opts);
  spdlog::info("attention training done, best epoch {}", trained.best_epoch);
  return std::make_unique<AttentionPredictor>(std::move(trained.model), vocab);
}

SweepResult run_sweep(const std::string& dataset, const std::map<std::size_t, std::vector<PredictionCase>>& cases,
                      const std::map<std::size_t, const PetriNet*>& nets, const Predictor& predictor,
                      const std::vector<double>& w_grid, const BeamConfig& beam, Execution exec) {
  SweepResult sweep;
  // w -> (weighted sum, cases, forced)
  std::map<double, std::tuple<double, std::size_t, std::size_t>> micro;
  for (const auto& [k, ks] : cases) {
    if (ks.empty()) {
      spdlog::warn("{}: no test cases for k = {}, skipped", dataset, k);
      continue;
    }
    auto net = nets.find(k);
    if (net == nets.end() || net->second == nullptr) {
      spdlog::warn("{}: no net for k = {}, skipped", dataset, k);
      continue;
    }
    for (double w : w_grid) {
      BeamConfig cfg = beam;
      cfg.w = w;
      const auto results = predict_suffixes(ks, predictor, net->second, cfg, exec);
      double sum = 0.0;
      std::size_t forced = 0;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        sum += dl_similarity(results[i].suffix, ks[i].truth);
        forced += results[i].forced_termination ? 1 : 0;
      }
      const double mean = sum / static_cast<double>(ks.size());
      sweep.rows.push_back({dataset, std::to_string(k), w, mean, ks.size(), forced});
      auto& [msum, mn, mforced] = micro[w];
      msum += mean * static_cast<double>(ks.size());
      mn += ks.size();
      mforced += forced;
      spdlog::debug("{} k={} w={:.2f} similarity={:.4f}", dataset, k, w, mean);
    }
  }
  for (double w : w_grid) {
    auto it = micro.find(w);
    if (it == micro.end()) continue;
    const auto& [msum, mn, mforced] = it->second;
    sweep.rows.push_back({dataset, "micro", w, msum / static_cast<double>(mn), mn, mforced});
  }
  return sweep;
}

namespace {

BeamConfig beam_for(const EventLog& log, const ExperimentConfig& config) {
  BeamConfig beam;
  beam.b_size = config.b_size;
  beam.max_size = config.b_size;
  beam.max_iter = config.max_iter.value_or(log.max_trace_length());
  return beam;
}

}  // namespace

ExperimentOutcome run_synthetic_experiment(const SynthConfig& synth, const ExperimentConfig& config) {
  return run_synthetic_experiment(generate(synth), config);
}

ExperimentOutcome run_synthetic_experiment(const SynthDataset& data, const ExperimentConfig& config) {
  config.validate();
  const auto predictor = train_predictor(data.train, config);
  std::map<std::size_t, std::vector<PredictionCase>> cases;
  std::map<std::size_t, const PetriNet*> nets;
  for (auto k : config.prefix_lengths) {
    cases[k] = make_cases(data.test, k);
    nets[k] = &data.exceptional_model;
  }
  ExperimentOutcome out;
  out.sweep = run_sweep(config.dataset, cases, nets, *predictor, config.w_grid, beam_for(data.train, config),
                        config.exec);
  out.summary = summarize(out.sweep);
  return out;
}

ExperimentOutcome run_reallife_experiment(const EventLog& log, const std::map<std::size_t, PetriNet>& nets,
                                          const ExperimentConfig& config) {
  config.validate();
  std::map<std::size_t, std::vector<PredictionCase>> cases;
  std::map<std::size_t, const PetriNet*> net_ptrs;
  for (auto k : config.prefix_lengths) {
    auto net = nets.find(k);
    if (net == nets.end()) {
      spdlog::warn("{}: no net for k = {}, skipped", config.dataset, k);
      continue;
    }
    try {
      cases[k] = make_cases(build_split(log, k).test, k);
      net_ptrs[k] = &net->second;
    } catch (const EmptySplitError& e) {
      spdlog::warn("{}: k = {}: {}, skipped", config.dataset, k, e.what());
    }
  }
  const auto predictor = train_predictor(log, config);
  ExperimentOutcome out;
  out.sweep = run_sweep(config.dataset, cases, net_ptrs, *predictor, config.w_grid, beam_for(log, config), config.exec);
  out.summary = summarize(out.sweep);
  return out;
}

}  // namespace kbmod
