#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kbmod/timestamp.hpp"

namespace kbmod {

// Completion label. Reserved: never accepted from input data.
inline constexpr std::string_view kEndLabel = "__END__";

struct Event {
  std::string activity;
  std::string case_id;
  std::optional<TimestampMs> timestamp;
  // Remaining attributes, kept verbatim and ignored by every algorithm.
  std::map<std::string, std::string> attributes;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;
  std::map<std::string, std::string> attributes;

  std::size_t size() const { return events.size(); }
};

// Activity-label projection of a trace.
struct Variant {
  std::vector<std::string> labels;

  Variant() = default;
  explicit Variant(std::vector<std::string> l) : labels(std::move(l)) {}
  Variant(std::initializer_list<std::string> l) : labels(l) {}

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  const std::string& operator[](std::size_t i) const { return labels[i]; }
  const std::string& back() const { return labels.back(); }

  auto operator<=>(const Variant&) const = default;
  bool operator==(const Variant&) const = default;
};

Variant concat(const Variant& a, const Variant& b);
std::string to_string(const Variant& v, char sep = ',');

class EventLog {
 public:
  EventLog() = default;
  // Validates the trace/event invariants and computes the alphabet.
  explicit EventLog(std::vector<Trace> traces);

  const std::vector<Trace>& traces() const { return traces_; }
  const std::set<std::string>& alphabet() const { return alphabet_; }
  std::size_t size() const { return traces_.size(); }
  bool empty() const { return traces_.empty(); }
  std::size_t max_trace_length() const;

 private:
  std::vector<Trace> traces_;
  std::set<std::string> alphabet_;
};

struct PrefixEntry {
  Variant prefix;
  std::string next;
  std::size_t count = 0;

  auto operator<=>(const PrefixEntry&) const = default;
};

// Multiset of (prefix, next label) pairs, stored aggregated and sorted.
class PrefixLog {
 public:
  PrefixLog() = default;
  explicit PrefixLog(std::vector<PrefixEntry> entries, bool with_completion);

  const std::vector<PrefixEntry>& entries() const { return entries_; }
  bool with_completion() const { return with_completion_; }
  // Sum of multiplicities.
  std::size_t total() const;
  std::size_t multiplicity(const Variant& prefix, std::string_view next) const;
  // Labels occurring in prefixes or targets, the completion label excluded.
  std::set<std::string> alphabet() const;
  std::size_t max_prefix_length() const;

 private:
  std::vector<PrefixEntry> entries_;
  bool with_completion_ = false;
};

Variant variant_of(const Trace& trace);
Variant prefix(const Variant& variant, std::size_t k);
Variant suffix(const Variant& variant, std::size_t k);
PrefixLog build_prefix_log(const EventLog& log, bool with_completion);

struct CsvMapping {
  std::string case_column = "case_id";
  std::string activity_column = "activity";
  std::string timestamp_column = "timestamp";
  char delimiter = ',';
};

EventLog parse_xes(std::istream& in);
EventLog parse_csv(std::istream& in, const CsvMapping& mapping = {});
void write_xes(std::ostream& out, const EventLog& log);

// Dispatches on extension: .xes or .csv.
EventLog load_log(const std::string& path, const CsvMapping& mapping = {});
void save_xes(const std::string& path, const EventLog& log);

// Builds a log directly from label sequences; timestamps one minute apart.
EventLog log_from_variants(const std::vector<Variant>& variants, std::string_view case_prefix = "case");

}  // namespace kbmod
