#include "kbmod/encoding.hpp"

#include "json.hpp"

#include <algorithm>

#include "kbmod/error.hpp"

namespace kbmod {

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty() || labels_.back() != kEndLabel)
    throw VocabularyError("vocabulary must end with the completion label");
  for (LabelIndex i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw VocabularyError("empty label in vocabulary");
    if (!index_.emplace(labels_[i], i).second) throw VocabularyError("duplicate label '" + labels_[i] + "'");
  }
}

Vocabulary Vocabulary::from_alphabet(const std::set<std::string>& alphabet) {
  if (alphabet.empty()) throw VocabularyError("empty alphabet");
  std::vector<std::string> labels;
  for (const auto& a : alphabet) {
    if (a == kEndLabel) continue;
    labels.push_back(a);
  }
  labels.emplace_back(kEndLabel);
  return Vocabulary(std::move(labels));
}

bool Vocabulary::contains(std::string_view label) const { return index_.contains(std::string(label)); }

std::optional<LabelIndex> Vocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelIndex Vocabulary::index_of(std::string_view label) const {
  auto i = find(label);
  if (!i) throw VocabularyError("label '" + std::string(label) + "' is not in the vocabulary");
  return *i;
}

std::vector<LabelIndex> Vocabulary::encode(const Variant& v) const {
  std::vector<LabelIndex> out;
  out.reserve(v.size());
  for (const auto& l : v.labels) out.push_back(index_of(l));
  return out;
}

Variant Vocabulary::decode(std::span<const LabelIndex> indices) const {
  Variant v;
  v.labels.reserve(indices.size());
  for (auto i : indices) v.labels.push_back(label(i));
  return v;
}

std::string Vocabulary::to_json() const { return nlohmann::json(labels_).dump(); }

Vocabulary Vocabulary::from_json(std::string_view json) {
  auto parsed = nlohmann::json::parse(json, nullptr, false);
  if (!parsed.is_array()) throw ParseError("vocabulary JSON must be an array of labels");
  return Vocabulary(parsed.get<std::vector<std::string>>());
}

Vocabulary build_vocabulary(const EventLog& log) { return Vocabulary::from_alphabet(log.alphabet()); }

std::vector<double> one_hot(std::string_view label, const Vocabulary& vocab) {
  std::vector<double> v(vocab.size(), 0.0);
  v[vocab.index_of(label)] = 1.0;
  return v;
}

EncodedPrefix encode_indices(std::span<const LabelIndex> prefix, std::size_t vocab_size, std::size_t l_max) {
  if (l_max < 2) throw BoundsError("l_max must be at least 2");
  EncodedPrefix enc;
  enc.rows = l_max - 1;
  enc.cols = vocab_size;
  if (prefix.size() > enc.rows)
    throw BoundsError("prefix of length " + std::to_string(prefix.size()) + " exceeds l_max - 1 = " +
                      std::to_string(enc.rows));
  enc.true_length = prefix.size();
  enc.matrix.assign(enc.rows * enc.cols, 0.0);
  for (std::size_t r = 0; r < prefix.size(); ++r) {
    if (prefix[r] >= vocab_size) throw VocabularyError("label index out of range");
    enc.matrix[r * enc.cols + prefix[r]] = 1.0;
  }
  return enc;
}

EncodedPrefix encode_prefix(const Variant& prefix, const Vocabulary& vocab, std::size_t l_max) {
  const auto idx = vocab.encode(prefix);
  return encode_indices(idx, vocab.size(), l_max);
}

Variant decode_prefix(const EncodedPrefix& encoded, const Vocabulary& vocab) {
  Variant v;
  for (std::size_t r = 0; r < encoded.rows; ++r) {
    const auto* row = encoded.matrix.data() + r * encoded.cols;
    const auto* hot = std::find(row, row + encoded.cols, 1.0);
    if (hot == row + encoded.cols) break;
    v.labels.push_back(vocab.label(static_cast<LabelIndex>(hot - row)));
  }
  return v;
}

std::span<const LabelIndex> truncate_to_window(std::span<const LabelIndex> prefix, std::size_t l_max) {
  const std::size_t window = l_max - 1;
  if (prefix.size() <= window) return prefix;
  return prefix.subspan(prefix.size() - window);
}

}  // namespace kbmod
