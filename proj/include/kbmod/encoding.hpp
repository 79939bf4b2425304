#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kbmod/event_log.hpp"

namespace kbmod {

using LabelIndex = std::size_t;

// Activity labels in lexicographic order with the completion label last.
class Vocabulary {
 public:
  Vocabulary() = default;
  // `labels` must end with kEndLabel and contain no duplicates.
  explicit Vocabulary(std::vector<std::string> labels);

  static Vocabulary from_alphabet(const std::set<std::string>& alphabet);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(LabelIndex i) const { return labels_.at(i); }
  LabelIndex end_index() const { return labels_.size() - 1; }
  bool contains(std::string_view label) const;
  // Throws VocabularyError for unknown labels.
  LabelIndex index_of(std::string_view label) const;
  std::optional<LabelIndex> find(std::string_view label) const;

  std::vector<LabelIndex> encode(const Variant& v) const;
  Variant decode(std::span<const LabelIndex> indices) const;

  std::string to_json() const;
  static Vocabulary from_json(std::string_view json);

  bool operator==(const Vocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelIndex> index_;
};

Vocabulary build_vocabulary(const EventLog& log);

std::vector<double> one_hot(std::string_view label, const Vocabulary& vocab);

// (l_max - 1) x |vocab| matrix, row-major, post-padded with zero rows.
struct EncodedPrefix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t true_length = 0;
  std::vector<double> matrix;

  double at(std::size_t r, std::size_t c) const { return matrix[r * cols + c]; }
};

EncodedPrefix encode_prefix(const Variant& prefix, const Vocabulary& vocab, std::size_t l_max);
EncodedPrefix encode_indices(std::span<const LabelIndex> prefix, std::size_t vocab_size, std::size_t l_max);
// Inverse of encode_prefix; stops at the first all-zero row.
Variant decode_prefix(const EncodedPrefix& encoded, const Vocabulary& vocab);

// Keeps the most recent `l_max - 1` labels.
std::span<const LabelIndex> truncate_to_window(std::span<const LabelIndex> prefix, std::size_t l_max);

}  // namespace kbmod
