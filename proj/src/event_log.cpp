#include "kbmod/event_log.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "kbmod/error.hpp"
#include "xml.hpp"

namespace kbmod {

Variant concat(const Variant& a, const Variant& b) {
  Variant out = a;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

std::string to_string(const Variant& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += sep;
    out += v[i];
  }
  return out;
}

EventLog::EventLog(std::vector<Trace> traces) : traces_(std::move(traces)) {
  for (const auto& trace : traces_) {
    if (trace.events.empty()) throw ConfigError("trace '" + trace.case_id + "' has no events");
    if (trace.case_id.empty()) throw ConfigError("trace with empty case id");
    for (const auto& e : trace.events) {
      if (e.activity.empty()) throw ConfigError("empty activity label in trace '" + trace.case_id + "'");
      if (e.activity == kEndLabel)
        throw ConfigError("reserved label " + std::string(kEndLabel) + " in trace '" + trace.case_id + "'");
      if (e.case_id != trace.case_id)
        throw ConfigError("event of case '" + e.case_id + "' inside trace '" + trace.case_id + "'");
      alphabet_.insert(e.activity);
    }
  }
}

std::size_t EventLog::max_trace_length() const {
  std::size_t n = 0;
  for (const auto& t : traces_) n = std::max(n, t.size());
  return n;
}

PrefixLog::PrefixLog(std::vector<PrefixEntry> entries, bool with_completion)
    : entries_(std::move(entries)), with_completion_(with_completion) {
  std::sort(entries_.begin(), entries_.end(),
            [](const PrefixEntry& a, const PrefixEntry& b) {
              return std::tie(a.prefix, a.next) < std::tie(b.prefix, b.next);
            });
}

std::size_t PrefixLog::total() const {
  return std::accumulate(entries_.begin(), entries_.end(), std::size_t{0},
                         [](std::size_t acc, const PrefixEntry& e) { return acc + e.count; });
}

std::size_t PrefixLog::multiplicity(const Variant& p, std::string_view next) const {
  for (const auto& e : entries_)
    if (e.prefix == p && e.next == next) return e.count;
  return 0;
}

std::set<std::string> PrefixLog::alphabet() const {
  std::set<std::string> out;
  for (const auto& e : entries_) {
    out.insert(e.prefix.labels.begin(), e.prefix.labels.end());
    if (e.next != kEndLabel) out.insert(e.next);
  }
  return out;
}

std::size_t PrefixLog::max_prefix_length() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n = std::max(n, e.prefix.size());
  return n;
}

Variant variant_of(const Trace& trace) {
  Variant v;
  v.labels.reserve(trace.events.size());
  for (const auto& e : trace.events) v.labels.push_back(e.activity);
  return v;
}

Variant prefix(const Variant& variant, std::size_t k) {
  if (k < 1 || k > variant.size())
    throw BoundsError("prefix length " + std::to_string(k) + " outside [1, " + std::to_string(variant.size()) + "]");
  return Variant(std::vector<std::string>(variant.labels.begin(), variant.labels.begin() + static_cast<long>(k)));
}

Variant suffix(const Variant& variant, std::size_t k) {
  if (k < 1 || k >= variant.size())
    throw BoundsError("suffix position " + std::to_string(k) + " outside [1, " + std::to_string(variant.size()) + ")");
  return Variant(std::vector<std::string>(variant.labels.begin() + static_cast<long>(k), variant.labels.end()));
}

PrefixLog build_prefix_log(const EventLog& log, bool with_completion) {
  if (log.empty()) throw ConfigError("cannot build a prefix log from an empty event log");
  std::map<std::pair<Variant, std::string>, std::size_t> counts;
  for (const auto& trace : log.traces()) {
    Variant v = variant_of(trace);
    if (with_completion) v.labels.emplace_back(kEndLabel);
    for (std::size_t k = 1; k < v.size(); ++k) ++counts[{prefix(v, k), v[k]}];
  }
  std::vector<PrefixEntry> entries;
  entries.reserve(counts.size());
  for (auto& [key, n] : counts) entries.push_back({key.first, key.second, n});
  return PrefixLog(std::move(entries), with_completion);
}

namespace {

void order_events(Trace& trace) {
  const bool all_timed = std::all_of(trace.events.begin(), trace.events.end(),
                                     [](const Event& e) { return e.timestamp.has_value(); });
  if (!all_timed) return;
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const Event& a, const Event& b) { return *a.timestamp < *b.timestamp; });
}

bool is_attribute_element(std::string_view name) {
  return name == "string" || name == "date" || name == "int" || name == "float" || name == "boolean" ||
         name == "id";
}

class XesHandler : public xml::Handler {
 public:
  void start_element(std::string_view name, const xml::Attributes& attrs) override {
    const std::string_view parent = stack_.empty() ? std::string_view{} : std::string_view(stack_.back());
    stack_.emplace_back(name);
    if (name == "trace" && parent == "log") {
      in_trace_ = true;
      trace_ = Trace{};
      case_id_.clear();
      ++trace_index_;
      return;
    }
    if (name == "event" && in_trace_ && parent == "trace") {
      in_event_ = true;
      event_ = Event{};
      event_line_ = xml::current_position().first;
      return;
    }
    if (!is_attribute_element(name)) return;
    const std::string key(xml::find_attribute(attrs, "key"));
    const std::string value(xml::find_attribute(attrs, "value"));
    if (in_event_ && parent == "event") {
      if (key == "concept:name") {
        event_.activity = value;
      } else if (key == "time:timestamp") {
        auto ts = parse_timestamp(value);
        if (!ts) {
          auto [line, col] = xml::current_position();
          throw ParseError("unparsable time:timestamp '" + value + "'", line, col);
        }
        event_.timestamp = ts;
      } else {
        event_.attributes[key] = value;
      }
    } else if (in_trace_ && !in_event_ && parent == "trace") {
      if (key == "concept:name") case_id_ = value;
      else trace_.attributes[key] = value;
    }
  }

  void end_element(std::string_view name) override {
    stack_.pop_back();
    if (name == "event" && in_event_ && !stack_.empty() && stack_.back() == "trace") {
      in_event_ = false;
      if (event_.activity.empty())
        throw ParseError("event without concept:name in trace " + describe_trace(), event_line_, 1);
      if (event_.activity == kEndLabel)
        throw ParseError("reserved label " + std::string(kEndLabel) + " in trace " + describe_trace(), event_line_, 1);
      trace_.events.push_back(std::move(event_));
    } else if (name == "trace" && in_trace_ && !stack_.empty() && stack_.back() == "log") {
      in_trace_ = false;
      trace_.case_id = case_id_.empty() ? "trace_" + std::to_string(trace_index_) : case_id_;
      if (trace_.events.empty()) {
        spdlog::warn("skipping empty trace '{}'", trace_.case_id);
        return;
      }
      for (auto& e : trace_.events) e.case_id = trace_.case_id;
      order_events(trace_);
      traces_.push_back(std::move(trace_));
    }
  }

  std::vector<Trace> take() { return std::move(traces_); }

 private:
  std::string describe_trace() const {
    return case_id_.empty() ? "#" + std::to_string(trace_index_) : "'" + case_id_ + "'";
  }

  std::vector<std::string> stack_;
  std::vector<Trace> traces_;
  Trace trace_;
  Event event_;
  std::string case_id_;
  std::size_t trace_index_ = 0;
  std::size_t event_line_ = 0;
  bool in_trace_ = false;
  bool in_event_ = false;
};

// One logical CSV record; quoted fields may span lines.
bool read_csv_record(std::istream& in, char delim, std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string field;
  bool quoted = false;
  while (true) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == delim) {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c != '\r') {
        field += c;
      }
    }
    if (!quoted) break;
    field += '\n';
    if (!std::getline(in, line)) throw ParseError("unterminated quoted CSV field");
  }
  fields.push_back(std::move(field));
  return true;
}

std::string xes_attribute(std::string_view tag, std::string_view key, std::string_view value) {
  return "<" + std::string(tag) + " key=\"" + xml::escape(key) + "\" value=\"" + xml::escape(value) + "\"/>";
}

}  // namespace

EventLog parse_xes(std::istream& in) {
  XesHandler handler;
  xml::parse(in, handler);
  return EventLog(handler.take());
}

EventLog parse_csv(std::istream& in, const CsvMapping& mapping) {
  std::vector<std::string> header;
  if (!read_csv_record(in, mapping.delimiter, header)) throw ParseError("CSV input has no header row");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("CSV column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t case_col = column(mapping.case_column);
  const std::size_t act_col = column(mapping.activity_column);
  const std::size_t time_col = column(mapping.timestamp_column);

  std::vector<Trace> traces;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_csv_record(in, mapping.delimiter, fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size())
      throw ParseError("CSV row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(header.size()));
    Event e;
    e.case_id = fields[case_col];
    e.activity = fields[act_col];
    if (e.case_id.empty()) throw ParseError("CSV row " + std::to_string(row) + ": empty case id");
    if (e.activity.empty()) throw ParseError("CSV row " + std::to_string(row) + ": empty activity");
    if (e.activity == kEndLabel)
      throw ParseError("CSV row " + std::to_string(row) + ": reserved label " + std::string(kEndLabel));
    e.timestamp = parse_timestamp(fields[time_col]);
    if (!e.timestamp)
      throw ParseError("CSV row " + std::to_string(row) + ": unparsable timestamp '" + fields[time_col] + "'");
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != case_col && c != act_col && c != time_col) e.attributes[header[c]] = fields[c];
    auto [it, inserted] = index.try_emplace(e.case_id, traces.size());
    if (inserted) traces.push_back(Trace{e.case_id, {}, {}});
    traces[it->second].events.push_back(std::move(e));
  }
  for (auto& t : traces) order_events(t);
  return EventLog(std::move(traces));
}

void write_xes(std::ostream& out, const EventLog& log) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<log xes.version=\"1.0\" xes.features=\"nested-attributes\" openxes.version=\"1.0RC7\">\n"
      << "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n"
      << "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n"
      << "  <classifier name=\"Activity\" keys=\"concept:name\"/>\n";
  for (const auto& trace : log.traces()) {
    out << "  <trace>\n    " << xes_attribute("string", "concept:name", trace.case_id) << "\n";
    for (const auto& [k, v] : trace.attributes) out << "    " << xes_attribute("string", k, v) << "\n";
    for (const auto& e : trace.events) {
      out << "    <event>\n      " << xes_attribute("string", "concept:name", e.activity) << "\n";
      if (e.timestamp)
        out << "      " << xes_attribute("date", "time:timestamp", format_timestamp(*e.timestamp)) << "\n";
      for (const auto& [k, v] : e.attributes) out << "      " << xes_attribute("string", k, v) << "\n";
      out << "    </event>\n";
    }
    out << "  </trace>\n";
  }
  out << "</log>\n";
}

EventLog load_log(const std::string& path, const CsvMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open event log '" + path + "'");
  if (path.ends_with(".csv")) return parse_csv(in, mapping);
  return parse_xes(in);
}

void save_xes(const std::string& path, const EventLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_xes(out, log);
}

EventLog log_from_variants(const std::vector<Variant>& variants, std::string_view case_prefix) {
  std::vector<Trace> traces;
  traces.reserve(variants.size());
  for (std::size_t i = 0; i < variants.size(); ++i) {
    Trace t;
    t.case_id = std::string(case_prefix) + "_" + std::to_string(i + 1);
    for (std::size_t j = 0; j < variants[i].size(); ++j) {
      const auto minute = static_cast<TimestampMs>(i + j) * 60'000;
      t.events.push_back(Event{variants[i][j], t.case_id, minute, {}});
    }
    traces.push_back(std::move(t));
  }
  return EventLog(std::move(traces));
}

}  // namespace kbmod
