#include "kbmod/evaluation.hpp"

#include <algorithm>
#include <ostream>

#include "kbmod/error.hpp"

namespace kbmod {

namespace {

Variant strip_end(const Variant& v) {
  Variant out = v;
  while (!out.empty() && out.back() == kEndLabel) out.labels.pop_back();
  return out;
}

}  // namespace

std::size_t dl_distance(const Variant& a, const Variant& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[n][m];
}

double dl_similarity(const Variant& a, const Variant& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(dl_distance(a, b)) / static_cast<double>(longest);
}

double micro_average(const std::vector<GroupMean>& groups) {
  if (groups.empty()) throw ConfigError("micro_average of an empty list");
  double sum = 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.n == 0) throw ConfigError("micro_average weight must be positive");
    sum += g.mean * static_cast<double>(g.n);
    total += g.n;
  }
  return sum / static_cast<double>(total);
}

MetricsReport evaluate(const SuffixMap& predicted, const SuffixMap& ground_truth,
                       const std::map<std::size_t, std::vector<std::string>>& groups) {
  MetricsReport report;
  std::vector<GroupMean> means;
  for (const auto& [k, cases] : groups) {
    if (cases.empty()) continue;
    double sum = 0.0;
    for (const auto& id : cases) {
      auto p = predicted.find(id);
      auto t = ground_truth.find(id);
      if (p == predicted.end()) throw ConfigError("no prediction for case '" + id + "'");
      if (t == ground_truth.end()) throw ConfigError("no ground truth for case '" + id + "'");
      sum += dl_similarity(strip_end(p->second), strip_end(t->second));
    }
    GroupMean g{sum / static_cast<double>(cases.size()), cases.size()};
    report.per_prefix_length[k] = g;
    means.push_back(g);
  }
  if (!means.empty()) report.micro_average = micro_average(means);
  return report;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "dataset,k,baseline_similarity,bk_similarity,diff,best_w\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& r : rows)
    out << r.dataset << ',' << r.k << ',' << r.baseline << ',' << r.bk << ',' << (r.bk - r.baseline) << ','
        << r.best_w << '\n';
}

}  // namespace kbmod
