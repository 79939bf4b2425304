// kbmod: suffix prediction with Petri-net modulated beam search.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kbmod/error.hpp"
#include "kbmod/evaluation.hpp"
#include "kbmod/harness.hpp"
#include "kbmod/parallel.hpp"
#include "kbmod/petri_net.hpp"
#include "kbmod/synthgen.hpp"

namespace fs = std::filesystem;
using namespace kbmod;

namespace {

struct Options {
  std::string out_dir = ".";
  int threads = 0;
  bool verbose = false;
  bool quiet = false;

  // synthgen / sweep --synthetic
  std::uint64_t seed = 1;
  std::size_t n_normal = 800;
  std::size_t n_exceptional = 200;
  double branch_probability = 0.5;
  std::string placement = "after_last";

  // data
  std::string log_path;
  std::string net_path;
  std::vector<std::string> nets;  // K=FILE
  std::string model_path;
  std::string csv_case = "case_id", csv_activity = "activity", csv_timestamp = "timestamp";

  // split / predict
  std::size_t k = 3;

  // beam
  double w = 0.0;
  std::size_t b_size = 3;
  std::optional<std::size_t> max_iter;

  // sweep
  bool synthetic = false;
  std::string dataset;
  std::string w_grid = "0:0.95:0.05";
  std::vector<std::size_t> prefix_lengths{3, 4, 5, 6, 7};

  // training
  std::string predictor = "ngram";
  std::size_t order = NGramModel::kDefaultOrder;
  double alpha = NGramModel::kDefaultAlpha;
  AttentionConfig attention;
  TrainOptions training;

  // evaluate
  std::string predictions_path;
  std::string sweep_path;
};

CsvMapping mapping(const Options& o) { return CsvMapping{o.csv_case, o.csv_activity, o.csv_timestamp, ','}; }

fs::path out_file(const Options& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  return fs::path(o.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

SynthConfig synth_config(const Options& o) {
  SynthConfig c;
  c.seed = o.seed;
  c.n_train_normal = o.n_normal;
  c.n_train_exceptional = o.n_exceptional;
  c.branch_probability = o.branch_probability;
  c.placement = parse_placement(o.placement);
  c.validate();
  return c;
}

ExperimentConfig experiment_config(const Options& o) {
  ExperimentConfig c;
  c.dataset = o.dataset;
  c.prefix_lengths = o.prefix_lengths;
  c.w_grid = parse_w_grid(o.w_grid);
  c.b_size = o.b_size;
  c.max_iter = o.max_iter;
  c.predictor = parse_predictor_kind(o.predictor);
  c.ngram_order = o.order;
  c.ngram_alpha = o.alpha;
  c.attention = o.attention;
  c.training = o.training;
  c.validate();
  return c;
}

std::map<std::size_t, PetriNet> parse_nets(const std::vector<std::string>& specs) {
  std::map<std::size_t, PetriNet> nets;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--net expects K=FILE, got '" + s + "'");
    std::size_t k = 0;
    try {
      k = std::stoul(s.substr(0, eq));
    } catch (const std::logic_error&) {
      throw ConfigError("--net expects K=FILE, got '" + s + "'");
    }
    nets.emplace(k, load_pnml(s.substr(eq + 1)));
  }
  return nets;
}

void write_outcome(const Options& o, const ExperimentOutcome& outcome) {
  {
    auto f = open_out(out_file(o, "results.csv"));
    write_sweep_csv(f, outcome.sweep);
  }
  auto f = open_out(out_file(o, "summary.csv"));
  write_summary_csv(f, outcome.summary);
  write_summary_csv(std::cout, outcome.summary);
}

void run_synthgen(const Options& o) {
  write_dataset(o.out_dir, generate(synth_config(o)));
  spdlog::info("wrote train.xes, test.xes, exceptional.pnml to {}", o.out_dir);
}

void run_split(const Options& o) {
  const EventLog log = load_log(o.log_path, mapping(o));
  const ExperimentSplit split = build_split(log, o.k);
  const auto path = out_file(o, "test_k" + std::to_string(o.k) + ".xes");
  save_xes(path.string(), split.discovery_export);
  std::cout << "k=" << o.k << " test_traces=" << split.test.size() << " export=" << path.string() << '\n';
}

void run_train(const Options& o) {
  ExperimentConfig c = experiment_config(o);
  const EventLog log = load_log(o.log_path, mapping(o));
  const auto model = train_predictor(log, c);
  const auto path = out_file(o, "model.json");
  model->save(path.string());
  spdlog::info("saved {} model to {}", o.predictor, path.string());
}

void run_predict(const Options& o) {
  BeamConfig beam;
  beam.b_size = o.b_size;
  beam.max_size = o.b_size;
  beam.w = o.w;
  const EventLog log = load_log(o.log_path, mapping(o));
  beam.max_iter = o.max_iter.value_or(log.max_trace_length());
  beam.validate();
  if (o.w > 0.0 && o.net_path.empty()) throw ConfigError("--net is required when --w > 0");
  const auto model = load_predictor(o.model_path);
  std::optional<PetriNet> net;
  if (!o.net_path.empty()) net = load_pnml(o.net_path);

  const auto cases = make_cases(log, o.k);
  const auto results = predict_suffixes(cases, *model, net ? &*net : nullptr, beam);
  auto f = open_out(out_file(o, "predictions.csv"));
  f << "case_id,predicted_suffix,score,forced_termination\n";
  f.precision(17);
  for (std::size_t i = 0; i < cases.size(); ++i)
    f << csv_field(cases[i].case_id) << ',' << csv_field(to_string(results[i].suffix, ';')) << ','
      << results[i].score << ',' << (results[i].forced_termination ? 1 : 0) << '\n';
  spdlog::info("predicted {} suffixes", cases.size());
}

void run_sweep_cmd(const Options& o) {
  Options opts = o;
  if (o.synthetic) {
    if (opts.dataset.empty()) opts.dataset = "synthetic";
    ExperimentConfig c = experiment_config(opts);
    const SynthDataset data = generate(synth_config(opts));
    write_dataset(opts.out_dir, data);
    write_outcome(opts, run_synthetic_experiment(data, c));
    return;
  }
  if (o.log_path.empty()) throw ConfigError("sweep needs --synthetic or --log");
  if (opts.dataset.empty()) opts.dataset = fs::path(o.log_path).stem().string();
  ExperimentConfig c = experiment_config(opts);
  const auto nets = parse_nets(o.nets);
  if (nets.empty()) throw ConfigError("sweep --log needs at least one --net K=FILE");
  write_outcome(opts, run_reallife_experiment(load_log(o.log_path, mapping(o)), nets, c));
}

// Reads predict's CSV: case_id,predicted_suffix,score,forced_termination.
SuffixMap read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  SuffixMap out;
  std::string line;
  std::getline(in, line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields{""};
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          fields.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.emplace_back();
      } else {
        fields.back() += c;
      }
    }
    if (fields.size() != 4) throw ParseError("expected 4 prediction columns", row, 1);
    Variant v;
    std::stringstream ss(fields[1]);
    for (std::string l; std::getline(ss, l, ';');) v.labels.push_back(l);
    out[fields[0]] = v;
  }
  return out;
}

void run_evaluate(const Options& o) {
  if (!o.sweep_path.empty()) {
    std::ifstream in(o.sweep_path);
    if (!in) throw std::runtime_error("cannot read " + o.sweep_path);
    const auto summary = summarize(read_sweep_csv(in));
    auto f = open_out(out_file(o, "summary.csv"));
    write_summary_csv(f, summary);
    write_summary_csv(std::cout, summary);
    return;
  }
  if (o.predictions_path.empty() || o.log_path.empty())
    throw ConfigError("evaluate needs --sweep, or --predictions with --log");
  const auto cases = make_cases(load_log(o.log_path, mapping(o)), o.k);
  SuffixMap truth;
  std::map<std::size_t, std::vector<std::string>> groups;
  for (const auto& c : cases) {
    truth[c.case_id] = c.truth;
    groups[o.k].push_back(c.case_id);
  }
  const MetricsReport report = evaluate(read_predictions(o.predictions_path), truth, groups);
  std::cout << "k,mean_similarity,n_cases\n";
  for (const auto& [k, g] : report.per_prefix_length) std::cout << k << ',' << g.mean << ',' << g.n << '\n';
  std::cout << "micro," << report.micro_average << ",\n";
}

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--case-col", o.csv_case, "CSV case id column")->capture_default_str();
  cmd->add_option("--activity-col", o.csv_activity, "CSV activity column")->capture_default_str();
  cmd->add_option("--time-col", o.csv_timestamp, "CSV timestamp column")->capture_default_str();
}

void add_synth_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  cmd->add_option("--n-normal", o.n_normal, "Normal training traces")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--n-exceptional", o.n_exceptional, "Exceptional training traces")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--branch-probability", o.branch_probability, "Probability of branch 1")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--placement", o.placement, "Unexpected/Repairing position")
      ->capture_default_str()
      ->check(CLI::IsMember({"after_first", "after_last"}));
}

// `train` names the kind --model and the seed --seed; sweep uses
// --predictor and --train-seed since it has its own --seed.
void add_training_options(CLI::App* cmd, Options& o, bool standalone) {
  cmd->add_option(standalone ? "--model" : "--predictor", o.predictor, "ngram or attention")
      ->capture_default_str()
      ->check(CLI::IsMember({"ngram", "attention"}));
  cmd->add_option("--order", o.order, "n-gram order")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", o.alpha, "n-gram smoothing")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--layers", o.attention.num_layers, "Attention layers")->capture_default_str();
  cmd->add_option("--dim", o.attention.model_dim, "Model width")->capture_default_str();
  cmd->add_option("--heads", o.attention.num_heads, "Attention heads")->capture_default_str();
  cmd->add_option("--ff-dim", o.attention.ff_dim, "Feed-forward width")->capture_default_str();
  cmd->add_option("--dropout", o.attention.dropout_rate, "Dropout rate")->capture_default_str()->check(CLI::Range(0.0, 0.99));
  cmd->add_option(standalone ? "--seed" : "--train-seed", o.attention.seed, "Initialization and dropout seed")->capture_default_str();
  cmd->add_option("--epochs", o.training.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", o.training.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.training.learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_beam_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--bsize", o.b_size, "Beam size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", o.max_iter, "Iteration cap (default: longest trace)")->check(CLI::PositiveNumber);
}

bool has_flag(int argc, char** argv, std::string_view flag) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == flag || (a.size() > flag.size() && a.starts_with(flag) && a[flag.size()] == '=')) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("kbmod"));
  spdlog::set_pattern("[%l] %v");

  Options o;
  CLI::App app{"Suffix prediction with Petri-net modulated beam search"};
  app.set_config("--config", "", "INI/TOML file with option values; flags override it");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out", o.out_dir, "Output directory (env KBMOD_OUT_DIR overrides the config file)")
      ->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
  app.add_flag("-q,--quiet", o.quiet, "Warnings and errors only");

  auto* synthgen = app.add_subcommand("synthgen", "Write the synthetic train/test logs and exceptional net");
  add_synth_options(synthgen, o);

  auto* split = app.add_subcommand("split", "Export the second-variant test set of a prefix length");
  split->add_option("--log", o.log_path, "Event log (.xes or .csv)")->required()->check(CLI::ExistingFile);
  split->add_option("--k", o.k, "Prefix length")->required()->check(CLI::PositiveNumber);
  split->add_option("--export", o.out_dir, "Export directory");
  add_data_options(split, o);

  auto* train = app.add_subcommand("train", "Train a next-activity predictor on a whole log");
  train->add_option("--log", o.log_path, "Event log")->required()->check(CLI::ExistingFile);
  add_training_options(train, o, true);
  add_data_options(train, o);

  auto* predict = app.add_subcommand("predict", "Predict the suffix of every length-K prefix of a log");
  predict->add_option("--log", o.log_path, "Event log")->required()->check(CLI::ExistingFile);
  predict->add_option("--model", o.model_path, "Model file from train")->required()->check(CLI::ExistingFile);
  predict->add_option("--net", o.net_path, "PNML net for modulation")->check(CLI::ExistingFile);
  predict->add_option("--prefix-len", o.k, "Prefix length")->required()->check(CLI::PositiveNumber);
  predict->add_option("--w", o.w, "Modulation weight")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  add_beam_options(predict, o);
  add_data_options(predict, o);

  auto* sweep = app.add_subcommand("sweep", "Evaluate a grid of modulation weights");
  sweep->add_flag("--synthetic", o.synthetic, "Generate and use the synthetic dataset");
  sweep->add_option("--log", o.log_path, "Event log")->check(CLI::ExistingFile);
  sweep->add_option("--net", o.nets, "Net per prefix length, K=FILE (repeatable)");
  sweep->add_option("--dataset", o.dataset, "Dataset name in the results");
  sweep->add_option("--w-grid", o.w_grid, "start:stop:step or a comma list")->capture_default_str();
  sweep->add_option("--k", o.prefix_lengths, "Prefix lengths")->capture_default_str()->delimiter(',');
  add_beam_options(sweep, o);
  add_training_options(sweep, o, false);
  add_synth_options(sweep, o);
  add_data_options(sweep, o);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions or summarize a sweep");
  evaluate_cmd->add_option("--sweep", o.sweep_path, "results.csv from sweep")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--predictions", o.predictions_path, "predictions.csv from predict")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--log", o.log_path, "Event log holding the ground truth")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--prefix-len", o.k, "Prefix length used by predict")->check(CLI::PositiveNumber);
  add_data_options(evaluate_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  // flag > KBMOD_OUT_DIR > config file > default
  if (const char* env = std::getenv("KBMOD_OUT_DIR"); env != nullptr && *env != '\0' && !has_flag(argc, argv, "--out") &&
                                                      !has_flag(argc, argv, "--export"))
    o.out_dir = env;

  if (o.verbose) spdlog::set_level(spdlog::level::debug);
  if (o.quiet) spdlog::set_level(spdlog::level::warn);
  set_thread_count(o.threads);

  try {
    if (*synthgen) run_synthgen(o);
    if (*split) run_split(o);
    if (*train) run_train(o);
    if (*predict) run_predict(o);
    if (*sweep) run_sweep_cmd(o);
    if (*evaluate_cmd) run_evaluate(o);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
