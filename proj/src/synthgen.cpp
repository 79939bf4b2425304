#include "kbmod/synthgen.hpp"

#include <cstdio>
#include <filesystem>
#include <random>

#include "kbmod/error.hpp"

namespace kbmod {

void SynthConfig::validate() const {
  if (n_train_normal == 0 || n_train_exceptional == 0) throw ConfigError("trace counts must be positive");
  if (!(branch_probability >= 0.0 && branch_probability <= 1.0))
    throw ConfigError("branch_probability must be in [0, 1]");
}

namespace {

// Uniform in [0, 1) from the top 53 bits, identical on every platform.
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(uniform(rng) * n); }

std::vector<std::string> sample_trace(std::mt19937_64& rng, const SynthConfig& cfg, bool exceptional) {
  std::vector<std::string> body;
  if (uniform(rng) < cfg.branch_probability) {
    body = {"B1a", "B1b", "B1c"};
    if (uniform(rng) < 0.5) std::swap(body[1], body[2]);
  } else {
    body = {"B2a", "B2b", "B2c"};
  }
  if (exceptional) {
    auto at = cfg.placement == ExceptionPlacement::after_first ? body.begin() + 1 : body.end();
    body.insert(at, {"Unexpected", "Repairing"});
  }
  body.insert(body.begin(), "Start");
  return body;
}

Trace make_trace(std::size_t i, const std::vector<std::string>& labels) {
  char id[32];
  std::snprintf(id, sizeof id, "case_%04zu", i + 1);
  Trace t;
  t.case_id = id;
  const TimestampMs start = static_cast<TimestampMs>(i) * 60'000;
  for (std::size_t j = 0; j < labels.size(); ++j)
    t.events.push_back(Event{labels[j], t.case_id, start + static_cast<TimestampMs>(j) * 60'000, {}});
  return t;
}

}  // namespace

PetriNet exceptional_net(ExceptionPlacement placement) {
  NetBuilder b;
  for (const char* p : {"p_start", "p_b1b", "p_b1c", "p_b1b_done", "p_b1c_done", "p_b2a", "p_b2b",
                        "p_join"})
    b.place(p);
  b.place("source", 1);
  for (const char* t : {"Start", "B1a", "B1b", "B1c", "B2a", "B2b", "B2c"}) b.transition(std::string("t_") + t, t);
  b.silent("tau_join");
  b.arc("source", "t_Start").arc("t_Start", "p_start");
  b.arc("p_b1b", "t_B1b").arc("t_B1b", "p_b1b_done");
  b.arc("p_b1c", "t_B1c").arc("t_B1c", "p_b1c_done");
  b.arc("p_b1b_done", "tau_join").arc("p_b1c_done", "tau_join");
  b.arc("p_b2a", "t_B2b").arc("t_B2b", "p_b2b").arc("p_b2b", "t_B2c");

  if (placement == ExceptionPlacement::after_last) {
    b.arc("p_start", "t_B1a").arc("t_B1a", "p_b1b").arc("t_B1a", "p_b1c");
    b.arc("tau_join", "p_join");
    b.arc("p_start", "t_B2a").arc("t_B2a", "p_b2a").arc("t_B2c", "p_join");
    b.place("p_unexpected").place("sink");
    b.transition("t_Unexpected", "Unexpected").transition("t_Repairing", "Repairing");
    b.arc("p_join", "t_Unexpected").arc("t_Unexpected", "p_unexpected");
    b.arc("p_unexpected", "t_Repairing").arc("t_Repairing", "sink");
  } else {
    // One Unexpected/Repairing pair per branch.
    b.place("p_b1_u").place("p_b1_r").place("p_b2_u").place("p_b2_r");
    b.transition("t_Unexpected_1", "Unexpected").transition("t_Repairing_1", "Repairing");
    b.transition("t_Unexpected_2", "Unexpected").transition("t_Repairing_2", "Repairing");
    b.arc("p_start", "t_B1a").arc("t_B1a", "p_b1_u").arc("p_b1_u", "t_Unexpected_1");
    b.arc("t_Unexpected_1", "p_b1_r").arc("p_b1_r", "t_Repairing_1");
    b.arc("t_Repairing_1", "p_b1b").arc("t_Repairing_1", "p_b1c");
    b.arc("p_start", "t_B2a").arc("t_B2a", "p_b2_u").arc("p_b2_u", "t_Unexpected_2");
    b.arc("t_Unexpected_2", "p_b2_r").arc("p_b2_r", "t_Repairing_2").arc("t_Repairing_2", "p_b2a");
    b.arc("tau_join", "p_join").arc("t_B2c", "p_join");
  }
  return b.build();
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t n = config.n_train_normal + config.n_train_exceptional;
  std::vector<bool> exceptional(n, false);
  std::fill(exceptional.begin() + static_cast<long>(config.n_train_normal), exceptional.end(), true);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = below(rng, i + 1);
    bool tmp = exceptional[i];
    exceptional[i] = exceptional[j];
    exceptional[j] = tmp;
  }

  std::vector<Trace> train, test;
  for (std::size_t i = 0; i < n; ++i) {
    Trace t = make_trace(i, sample_trace(rng, config, exceptional[i]));
    if (exceptional[i]) test.push_back(t);
    train.push_back(std::move(t));
  }
  return SynthDataset{EventLog(std::move(train)), EventLog(std::move(test)), exceptional_net(config.placement)};
}

void write_dataset(const std::string& dir, const SynthDataset& data) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  save_xes((d / "train.xes").string(), data.train);
  save_xes((d / "test.xes").string(), data.test);
  save_pnml((d / "exceptional.pnml").string(), data.exceptional_model);
}

ExceptionPlacement parse_placement(const std::string& name) {
  if (name == "after_first") return ExceptionPlacement::after_first;
  if (name == "after_last") return ExceptionPlacement::after_last;
  throw ConfigError("unknown placement '" + name + "' (after_first, after_last)");
}

std::string to_string(ExceptionPlacement placement) {
  return placement == ExceptionPlacement::after_first ? "after_first" : "after_last";
}

}  // namespace kbmod
