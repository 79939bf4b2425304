#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kbmod/event_log.hpp"

namespace kbmod {

// Optimal string alignment distance: insertions, deletions, substitutions and
// adjacent transpositions, no edits inside a transposed pair.
std::size_t dl_distance(const Variant& a, const Variant& b);
// 1 - d / max(|a|, |b|); two empty sequences give 1.
double dl_similarity(const Variant& a, const Variant& b);

struct GroupMean {
  double mean = 0.0;
  std::size_t n = 0;
};

// Mean weighted by group size. Throws ConfigError on an empty list or a zero weight.
double micro_average(const std::vector<GroupMean>& groups);

struct MetricsReport {
  std::map<std::size_t, GroupMean> per_prefix_length;
  double micro_average = 0.0;
};

using SuffixMap = std::map<std::string, Variant>;  // case id -> suffix

// `groups` maps prefix length k to the case ids evaluated at that length.
// Completion labels are stripped on both sides. Throws ConfigError when a
// case id is missing from either map.
MetricsReport evaluate(const SuffixMap& predicted, const SuffixMap& ground_truth,
                       const std::map<std::size_t, std::vector<std::string>>& groups);

struct SummaryRow {
  std::string dataset;
  std::string k;  // prefix length, or "micro"
  double baseline = 0.0;
  double bk = 0.0;
  double best_w = 0.0;
};

// dataset,k,baseline_similarity,bk_similarity,diff,best_w
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace kbmod
