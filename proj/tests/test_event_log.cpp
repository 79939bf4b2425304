#include <random>
#include <sstream>

#include "doctest.h"
#include "kbmod/error.hpp"
#include "kbmod/event_log.hpp"

using namespace kbmod;

namespace {

Trace make(const std::string& id, std::vector<std::string> labels) {
  Trace t;
  t.case_id = id;
  for (std::size_t i = 0; i < labels.size(); ++i) t.events.push_back({labels[i], id, TimestampMs(i) * 1000, {}});
  return t;
}

const char* kXes = R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <string key="concept:name" value="toy"/>
  <trace>
    <string key="concept:name" value="c1"/>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2020-01-01T10:05:00.000+00:00"/>
      <string key="org:resource" value="bob"/>
    </event>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2020-01-01T10:00:00.000+00:00"/>
    </event>
  </trace>
  <trace>
    <string key="concept:name" value="c2"/>
    <event><string key="concept:name" value="A"/></event>
    <event><string key="concept:name" value="C"/></event>
  </trace>
</log>)";

}  // namespace

TEST_CASE("variant projection and slicing") {
  const Trace t = make("c1", {"A", "B"});
  CHECK(variant_of(t) == Variant{"A", "B"});
  CHECK(variant_of(make("c", {"X"})) == Variant{"X"});

  const Variant v{"A", "B", "C"};
  CHECK(prefix(v, 2) == Variant{"A", "B"});
  CHECK(prefix(v, 3) == v);
  CHECK(suffix(v, 1) == Variant{"B", "C"});
  CHECK(suffix(v, 2) == Variant{"C"});
  CHECK_THROWS_AS(prefix(v, 0), BoundsError);
  CHECK_THROWS_AS(prefix(v, 4), BoundsError);
  CHECK_THROWS_AS(suffix(v, 3), BoundsError);
  CHECK_THROWS_AS(suffix(v, 0), BoundsError);
}

TEST_CASE("prefix and suffix reconstruct the variant") {
  std::mt19937 rng(7);
  for (int n = 0; n < 200; ++n) {
    Variant v;
    const int len = 2 + static_cast<int>(rng() % 8);
    for (int i = 0; i < len; ++i) v.labels.push_back(std::string(1, char('A' + rng() % 4)));
    for (std::size_t k = 1; k < v.size(); ++k) {
      CHECK(concat(prefix(v, k), suffix(v, k)) == v);
      CHECK(suffix(v, k).size() == v.size() - k);
    }
  }
}

TEST_CASE("event log invariants") {
  CHECK_THROWS_AS(EventLog({make("c", {"A", std::string(kEndLabel)})}), ConfigError);
  CHECK_THROWS_AS(EventLog({Trace{"c", {}, {}}}), ConfigError);
  CHECK_THROWS_AS(EventLog({make("", {"A"})}), ConfigError);
  const EventLog log({make("a", {"B", "A"}), make("b", {"C"})});
  CHECK(log.alphabet() == std::set<std::string>{"A", "B", "C"});
  CHECK(log.max_trace_length() == 2);
}

TEST_CASE("prefix log") {
  const EventLog one({make("c1", {"A", "B"})});
  const PrefixLog plain = build_prefix_log(one, false);
  REQUIRE(plain.entries().size() == 1);
  CHECK(plain.entries()[0].prefix == Variant{"A"});
  CHECK(plain.entries()[0].next == "B");

  const PrefixLog done = build_prefix_log(one, true);
  CHECK(done.total() == 2);
  CHECK(done.multiplicity(Variant{"A"}, "B") == 1);
  CHECK(done.multiplicity(Variant{"A", "B"}, kEndLabel) == 1);
  CHECK(done.alphabet() == std::set<std::string>{"A", "B"});

  const EventLog twice({make("c1", {"A", "B", "C"}), make("c2", {"A", "B", "C"})});
  const PrefixLog p2 = build_prefix_log(twice, true);
  // one-line recount: every (k, next) pair of the shared variant appears twice
  for (const auto& e : p2.entries()) CHECK(e.count == 2);
  CHECK(p2.entries().size() == 3);

  CHECK_THROWS_AS(build_prefix_log(EventLog{}, true), ConfigError);
}

TEST_CASE("prefix log size is the total trace length with completion") {
  std::mt19937 rng(11);
  std::vector<Trace> traces;
  std::size_t total = 0;
  std::set<std::string> labels;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::string> l;
    const int len = 1 + static_cast<int>(rng() % 6);
    for (int j = 0; j < len; ++j) l.push_back(std::string(1, char('A' + rng() % 5)));
    total += l.size();
    labels.insert(l.begin(), l.end());
    traces.push_back(make("c" + std::to_string(i), l));
  }
  const EventLog log(traces);
  const PrefixLog p = build_prefix_log(log, true);
  CHECK(p.total() == total);
  CHECK(p.alphabet() == log.alphabet());
  CHECK(p.alphabet() == labels);
}

TEST_CASE("XES parsing") {
  std::istringstream in(kXes);
  const EventLog log = parse_xes(in);
  REQUIRE(log.size() == 2);
  CHECK(log.traces()[0].case_id == "c1");
  // sorted by timestamp
  CHECK(variant_of(log.traces()[0]) == Variant{"A", "B"});
  CHECK(log.traces()[0].events[1].attributes.at("org:resource") == "bob");
  CHECK(variant_of(log.traces()[1]) == Variant{"A", "C"});
}

TEST_CASE("XES errors") {
  std::istringstream bad("<log><trace><event></trace></log>");
  CHECK_THROWS_AS(parse_xes(bad), ParseError);
  std::istringstream unnamed(R"(<log><trace><string key="concept:name" value="t9"/>
    <event><string key="org:resource" value="x"/></event></trace></log>)");
  try {
    parse_xes(unnamed);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("t9") != std::string::npos);
  }
  std::istringstream reserved(R"(<log><trace><event><string key="concept:name" value="__END__"/></event></trace></log>)");
  CHECK_THROWS_AS(parse_xes(reserved), ParseError);
}

TEST_CASE("XES round trip keeps variants") {
  std::istringstream in(kXes);
  const EventLog log = parse_xes(in);
  std::stringstream out;
  write_xes(out, log);
  const EventLog back = parse_xes(out);
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(variant_of(back.traces()[i]) == variant_of(log.traces()[i]));
    CHECK(back.traces()[i].case_id == log.traces()[i].case_id);
  }
}

TEST_CASE("CSV parsing") {
  std::istringstream three("case_id,activity,timestamp\n1,A,2020-01-01T00:00:00Z\n1,B,2020-01-01T00:01:00Z\n"
                           "1,C,2020-01-01T00:02:00Z\n");
  const EventLog a = parse_csv(three);
  REQUIRE(a.size() == 1);
  CHECK(variant_of(a.traces()[0]) == Variant{"A", "B", "C"});

  std::istringstream shuffled("case_id,activity,timestamp\n1,C,3000\n1,A,1000\n1,B,2000\n");
  CHECK(variant_of(parse_csv(shuffled).traces()[0]) == Variant{"A", "B", "C"});

  std::istringstream interleaved("case_id,activity,timestamp\nx,A,1\ny,P,2\nx,B,3\ny,Q,4\nx,C,5\n");
  const EventLog two = parse_csv(interleaved);
  REQUIRE(two.size() == 2);
  CHECK(two.traces()[0].case_id == "x");
  CHECK(variant_of(two.traces()[0]) == Variant{"A", "B", "C"});
  CHECK(variant_of(two.traces()[1]) == Variant{"P", "Q"});

  std::istringstream mapped("id;act;ts\n1;\"A;1\";1\n");
  const EventLog m = parse_csv(mapped, CsvMapping{"id", "act", "ts", ';'});
  CHECK(variant_of(m.traces()[0]) == Variant{"A;1"});

  std::istringstream ties("case_id,activity,timestamp\n1,B,5\n1,A,5\n");
  CHECK(variant_of(parse_csv(ties).traces()[0]) == Variant{"B", "A"});
}

TEST_CASE("CSV errors") {
  std::istringstream missing("case,activity\n1,A\n");
  CHECK_THROWS_AS(parse_csv(missing), ConfigError);
  std::istringstream bad_time("case_id,activity,timestamp\n1,A,yesterday\n");
  try {
    parse_csv(bad_time);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("timestamps") {
  CHECK(parse_timestamp("1970-01-01T00:00:01Z") == TimestampMs{1000});
  CHECK(parse_timestamp("1970-01-01T01:00:00+01:00") == TimestampMs{0});
  CHECK(parse_timestamp("1970-01-01 00:00:00.250") == TimestampMs{250});
  CHECK(parse_timestamp("12345") == TimestampMs{12345});
  CHECK_FALSE(parse_timestamp("2020-13-01T00:00:00Z").has_value());
  CHECK_FALSE(parse_timestamp("noon").has_value());
  CHECK(parse_timestamp(format_timestamp(1'600'000'000'123)) == TimestampMs{1'600'000'000'123});
}

TEST_CASE("log from variants") {
  const EventLog log = log_from_variants({Variant{"A", "B"}, Variant{"C"}}, "t");
  REQUIRE(log.size() == 2);
  CHECK(variant_of(log.traces()[1]) == Variant{"C"});
  CHECK(log.traces()[0].case_id != log.traces()[1].case_id);
}
