#include "kbmod/predictor.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kbmod/attention_net.hpp"
#include "kbmod/error.hpp"

namespace kbmod {

bool ProbabilityVector::is_valid(double tolerance) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

LabelIndex argmax(const ProbabilityVector& p) {
  LabelIndex best = 0;
  for (LabelIndex i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

ProbabilityVector Predictor::predict(const Variant& prefix) const {
  const auto idx = vocabulary().encode(prefix);
  return predict(std::span<const LabelIndex>(idx));
}

std::string next_activity(const Predictor& model, const Variant& prefix) {
  return model.vocabulary().label(argmax(model.predict(prefix)));
}

NGramModel::NGramModel(Vocabulary vocab, std::size_t order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {
  if (order_ < 1) throw ConfigError("n-gram order must be >= 1");
  if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw ConfigError("n-gram alpha must be >= 0");
}

std::span<const LabelIndex> NGramModel::context_of(std::span<const LabelIndex> prefix) const {
  return prefix.size() > order_ ? prefix.subspan(prefix.size() - order_) : prefix;
}

void NGramModel::add(std::span<const LabelIndex> context, LabelIndex next, std::size_t count) {
  if (next >= vocab_.size()) throw VocabularyError("target index out of range");
  const auto ctx = context_of(context);
  auto& row = counts_[std::vector<LabelIndex>(ctx.begin(), ctx.end())];
  if (row.empty()) row.assign(vocab_.size(), 0.0);
  row[next] += static_cast<double>(count);
}

ProbabilityVector NGramModel::predict(std::span<const LabelIndex> prefix) const {
  if (prefix.empty()) throw BoundsError("prediction needs a non-empty prefix");
  for (auto i : prefix)
    if (i >= vocab_.size()) throw VocabularyError("label index out of range");
  const std::size_t n = vocab_.size();
  ProbabilityVector out{std::vector<double>(n, 1.0 / static_cast<double>(n))};
  const auto ctx = context_of(prefix);
  auto it = counts_.find(std::vector<LabelIndex>(ctx.begin(), ctx.end()));
  if (it == counts_.end()) return out;
  const auto& row = it->second;
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  const double denom = total + alpha_ * static_cast<double>(n);
  if (denom <= 0.0) return out;
  for (std::size_t i = 0; i < n; ++i) out.probs[i] = (row[i] + alpha_) / denom;
  return out;
}

std::string NGramModel::to_json() const {
  nlohmann::json j;
  j["format"] = "kbmod-ngram";
  j["version"] = 1;
  j["order"] = order_;
  j["alpha"] = alpha_;
  j["vocabulary"] = vocab_.labels();
  auto& rows = j["counts"] = nlohmann::json::array();
  for (const auto& [ctx, row] : counts_) rows.push_back({{"context", ctx}, {"next", row}});
  return j.dump();
}

NGramModel NGramModel::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "kbmod-ngram") throw ParseError("not an n-gram model file");
  if (j.value("version", 0) != 1) throw ParseError("unsupported n-gram model version");
  NGramModel model(Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()), j.at("order").get<std::size_t>(),
                   j.at("alpha").get<double>());
  for (const auto& row : j.at("counts")) {
    auto ctx = row.at("context").get<std::vector<LabelIndex>>();
    auto next = row.at("next").get<std::vector<double>>();
    if (next.size() != model.vocab_.size() || ctx.size() > model.order_) throw ParseError("malformed n-gram row");
    model.counts_[std::move(ctx)] = std::move(next);
  }
  return model;
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json() << '\n';
}

NGramModel train_ngram(const PrefixLog& prefix_log, std::size_t order, double alpha, const Vocabulary* vocab) {
  if (prefix_log.entries().empty()) throw ConfigError("cannot train on an empty prefix log");
  NGramModel model(vocab != nullptr ? *vocab : Vocabulary::from_alphabet(prefix_log.alphabet()), order, alpha);
  const auto& v = model.vocabulary();
  for (const auto& e : prefix_log.entries()) {
    const auto ctx = v.encode(e.prefix);
    model.add(ctx, v.index_of(e.next), e.count);
  }
  return model;
}

std::unique_ptr<Predictor> load_predictor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("model file '" + path + "' is not valid JSON");
  const std::string format = j.value("format", "");
  if (format == "kbmod-ngram") return std::make_unique<NGramModel>(NGramModel::from_json(text));
  if (format == "kbmod-attention") return std::make_unique<AttentionPredictor>(AttentionPredictor::from_json(j));
  throw ParseError("unknown model format '" + format + "' in '" + path + "'");
}

}  // namespace kbmod
