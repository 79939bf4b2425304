#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kbmod/error.hpp"
#include "kbmod/petri_net.hpp"
#include "kbmod/synthgen.hpp"
#include "net_suite.hpp"

using namespace kbmod;

namespace {

const char* kChainPnml = R"(<?xml version="1.0"?>
<pnml><net id="n" type="http://www.pnml.org/version-2009/grammar/ptnet"><page id="pg">
  <place id="p0"><initialMarking><text>1</text></initialMarking></place>
  <place id="p1"/><place id="p2"/>
  <transition id="ta"><name><text>A</text></name></transition>
  <transition id="tb"><name><text>B</text></name></transition>
  <arc id="a1" source="p0" target="ta"/><arc id="a2" source="ta" target="p1"/>
  <arc id="a3" source="p1" target="tb"/><arc id="a4" source="tb" target="p2"/>
</page></net></pnml>)";

const char* kTauPnml = R"(<pnml><net id="n">
  <place id="p0"><initialMarking><text>1</text></initialMarking></place><place id="p1"/><place id="p2"/>
  <transition id="t1"><name><text>A</text></name></transition>
  <transition id="t2"><name><text>tau</text></name>
    <toolspecific tool="ProM" version="6.4" activity="$invisible$"/></transition>
  <arc id="a" source="p0" target="t1"/><arc id="b" source="t1" target="p1"/>
  <arc id="c" source="p1" target="t2"/><arc id="d" source="t2" target="p2"/>
  <finalmarkings><marking><place idref="p2"><text>1</text></place></marking></finalmarkings>
</net></pnml>)";

ReplayResult replay(const PetriNet& net, std::vector<std::string> labels, bool partial) {
  return token_replay(net, Variant(std::move(labels)), partial);
}

}  // namespace

TEST_CASE("PNML parsing") {
  std::istringstream in(kChainPnml);
  const PetriNet net = parse_pnml(in);
  CHECK(net.places().size() == 3);
  CHECK(net.transitions().size() == 2);
  CHECK(net.silent_transitions().empty());
  // final marking inferred from the sink
  CHECK(net.final_marking().tokens[*net.find_place("p2")] == 1);

  std::istringstream tau(kTauPnml);
  const PetriNet t = parse_pnml(tau);
  CHECK(t.silent_transitions().size() == 1);
  CHECK(t.transitions_with_label("A").size() == 1);
}

TEST_CASE("PNML errors") {
  std::istringstream broken("<pnml><net id='n'><place id='p'>");
  CHECK_THROWS_AS(parse_pnml(broken), ParseError);
  std::istringstream nonet("<pnml/>");
  CHECK_THROWS_AS(parse_pnml(nonet), ParseError);
  std::istringstream dangling(R"(<pnml><net id="n"><place id="p"/><transition id="t"/>
    <arc id="a" source="p" target="ghost"/></net></pnml>)");
  CHECK_THROWS_AS(parse_pnml(dangling), ParseError);
}

TEST_CASE("PNML round trip") {
  for (auto placement : {ExceptionPlacement::after_first, ExceptionPlacement::after_last}) {
    const PetriNet net = exceptional_net(placement);
    std::stringstream s;
    write_pnml(s, net);
    CHECK(parse_pnml(s).structurally_equal(net));
  }
  for (const auto& n : suite::nets()) {
    const PetriNet net = n.spec.build();
    std::stringstream s;
    write_pnml(s, net);
    CHECK_MESSAGE(parse_pnml(s).structurally_equal(net), n.name);
  }
}

TEST_CASE("builder validation") {
  CHECK_THROWS_AS(NetBuilder().place("p", 1).build(), NetError);
  CHECK_THROWS_AS(NetBuilder().place("p").place("q").transition("t", "A").arc("p", "q").build(), NetError);
  CHECK_THROWS_AS(NetBuilder().place("p").transition("t", "A").arc("p", "t").arc("t", "p").build(), NetError);
  CHECK_THROWS_AS(NetBuilder().place("p").place("p").transition("t", "A").build(), NetError);
  CHECK_THROWS_AS(NetBuilder().place("p").transition("t", "A").arc("p", "x").build(), NetError);
}

TEST_CASE("enabling and firing") {
  const PetriNet net = suite::chain3().build();
  const auto en = enabled_transitions(net, net.initial_marking());
  REQUIRE(en.size() == 1);
  CHECK(net.transitions()[en[0]].label == "A");
  CHECK(enabled_transitions(net, net.empty_marking()).empty());

  const Marking m = fire(net, net.initial_marking(), en[0]);
  CHECK(m.tokens[*net.find_place("p0")] == 0);
  CHECK(m.tokens[*net.find_place("p1")] == 1);

  const TransitionIndex c = net.transitions_with_label("C")[0];
  const Marking forced = fire(net, net.initial_marking(), c);
  CHECK(forced.tokens[*net.find_place("p3")] == 1);
  CHECK(forced.tokens[*net.find_place("p2")] == 0);

  for (const auto& n : suite::nets()) {
    const PetriNet pn = n.spec.build();
    for (TransitionIndex t : enabled_transitions(pn, pn.initial_marking())) {
      ReplayState s = start_replay(pn);
      const Marking after = fire(pn, s.marking, t);
      TokenCount in = 0, out = 0;
      for (auto w : pn.inputs(t)) in += w.weight;
      for (auto w : pn.outputs(t)) out += w.weight;
      CHECK(after.total() - s.marking.total() == out - in);
    }
  }
}

TEST_CASE("token replay worked examples") {
  const PetriNet net = suite::chain3().build();
  const ReplayResult ok = replay(net, {"A", "B", "C"}, false);
  CHECK(ok == ReplayResult{4, 4, 0, 0, true});
  CHECK(fitness(ok) == 1.0);

  const ReplayResult skip = replay(net, {"A", "C"}, false);
  CHECK(skip.produced == 3);
  CHECK(skip.consumed == 3);
  CHECK(skip.missing == 1);
  CHECK(skip.remaining == 1);
  CHECK(fitness(skip) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const ReplayResult part = replay(net, {"A"}, true);
  CHECK(part.missing == 0);
  CHECK(part.remaining == 0);
  CHECK(part.consumed == 1);
  CHECK(part.produced == 2);
  CHECK_FALSE(part.final_reached.has_value());

  CHECK(compliance(net, Variant{"A", "B"}, true) == 1.0);
  CHECK(compliance(net, Variant{"A", "B", "C"}, false) == 1.0);
  CHECK(compliance(net, Variant{"A", "C", std::string(kEndLabel)}, true) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS(replay(net, {"A", std::string(kEndLabel)}, true));
}

TEST_CASE("fitness edge cases") {
  CHECK(fitness(ReplayResult{3, 3, 3, 3, false}) == 0.0);
  CHECK(fitness(ReplayResult{0, 0, 0, 0, std::nullopt}) == 0.0);
}

TEST_CASE("foreign labels replay on a virtual transition") {
  const PetriNet net = suite::chain3().build();
  const ReplayResult r = replay(net, {"A", "Z"}, true);
  CHECK(r.missing == 1);
  CHECK(r.consumed == 2);
  CHECK(r.produced == 2);
}

TEST_CASE("replay agrees with the step-by-step oracle on the net suite") {
  for (const auto& n : suite::nets()) {
    const PetriNet net = n.spec.build();
    const oracle::Replayer ref(n.spec);
    for (const auto& trace : suite::all_traces(n.labels, 4)) {
      for (bool partial : {true, false}) {
        const ReplayResult got = replay(net, trace, partial);
        const oracle::Counts want = ref.run(trace, partial);
        const bool same = got.produced == want.p && got.consumed == want.c && got.missing == want.m &&
                          got.remaining == want.r;
        CHECK_MESSAGE(same, n.name << " " << to_string(Variant(trace)) << " partial=" << partial);
        if (want.c > 0 && want.p > 0) CHECK(std::abs(fitness(got) - want.fitness()) < 1e-9);
      }
    }
  }
}

TEST_CASE("replay properties") {
  for (const auto& n : suite::nets()) {
    const PetriNet net = n.spec.build();
    for (const auto& trace : suite::all_traces(n.labels, 3)) {
      const ReplayResult full = replay(net, trace, false);
      CHECK(full.missing <= full.consumed);
      CHECK(full.remaining <= full.produced);
      const double f = fitness(full);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      CHECK((f == 1.0) == (full.missing == 0 && full.remaining == 0));
      // extending by one label never lowers missing or consumed
      for (const auto& l : n.labels) {
        auto longer = trace;
        longer.push_back(l);
        const ReplayResult a = replay(net, trace, true), b = replay(net, longer, true);
        CHECK(b.missing >= a.missing);
        CHECK(b.consumed >= a.consumed);
      }
    }
  }
}

TEST_CASE("language traces have compliance one") {
  struct Case {
    std::size_t net;
    std::vector<std::string> trace;
  };
  const auto nets = suite::nets();
  const std::vector<Case> fitting{{0, {"A", "B", "C"}},     {1, {"B", "C"}},           {2, {"A", "C", "B", "D"}},
                                  {3, {"A", "C"}},          {4, {"A", "B", "B", "C"}}, {5, {"A", "B", "A"}},
                                  {6, {"A", "B"}},          {7, {"B", "A"}},           {8, {"A", "B"}},
                                  {9, {"A", "A"}},          {10, {"A", "B"}},          {11, {"A", "B"}}};
  for (const auto& c : fitting)
    CHECK_MESSAGE(compliance(nets[c.net].spec.build(), Variant(c.trace), false) == 1.0, nets[c.net].name);
}

TEST_CASE("incremental replay matches whole-trace replay") {
  for (const auto& n : suite::nets()) {
    const PetriNet net = n.spec.build();
    for (const auto& trace : suite::all_traces(n.labels, 3)) {
      ReplayState s = start_replay(net);
      for (const auto& l : trace) replay_step(net, s, l);
      CHECK(finish_replay(net, s, true) == replay(net, trace, true));
      CHECK(finish_replay(net, s, false) == replay(net, trace, false));
    }
  }
}
