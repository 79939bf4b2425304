#include "kbmod/petri_net.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "kbmod/error.hpp"
#include "xml.hpp"

namespace kbmod {

TokenCount Marking::total() const { return std::accumulate(tokens.begin(), tokens.end(), TokenCount{0}); }

std::span<const TransitionIndex> PetriNet::transitions_with_label(std::string_view label) const {
  auto it = by_label_.find(std::string(label));
  if (it == by_label_.end()) return {};
  return it->second;
}

std::optional<PlaceIndex> PetriNet::find_place(std::string_view id) const {
  auto it = place_index_.find(std::string(id));
  if (it == place_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TransitionIndex> PetriNet::find_transition(std::string_view id) const {
  auto it = transition_index_.find(std::string(id));
  if (it == transition_index_.end()) return std::nullopt;
  return it->second;
}

bool PetriNet::structurally_equal(const PetriNet& other) const {
  using ArcKey = std::tuple<std::string, std::string, TokenCount>;
  auto describe = [](const PetriNet& n) {
    std::set<std::pair<std::string, std::optional<std::string>>> ts;
    for (const auto& t : n.transitions_) ts.emplace(t.id, t.label);
    std::set<ArcKey> arcs;
    std::map<std::string, std::pair<TokenCount, TokenCount>> marks;
    for (PlaceIndex p = 0; p < n.places_.size(); ++p)
      marks[n.places_[p].id] = {n.initial_.tokens[p], n.final_.tokens[p]};
    for (TransitionIndex t = 0; t < n.transitions_.size(); ++t) {
      for (const auto& in : n.inputs_[t]) arcs.emplace(n.places_[in.place].id, n.transitions_[t].id, in.weight);
      for (const auto& out : n.outputs_[t]) arcs.emplace(n.transitions_[t].id, n.places_[out.place].id, out.weight);
    }
    return std::tuple(ts, arcs, marks);
  };
  return describe(*this) == describe(other);
}

NetBuilder& NetBuilder::place(std::string id, TokenCount initial_tokens, std::string name) {
  places_.emplace_back(std::move(id), initial_tokens);
  place_names_.push_back(std::move(name));
  return *this;
}

NetBuilder& NetBuilder::transition(std::string id, std::optional<std::string> label) {
  transitions_.emplace_back(std::move(id), std::move(label));
  return *this;
}

NetBuilder& NetBuilder::arc(std::string_view source, std::string_view target, TokenCount weight) {
  arcs_.push_back({std::string(source), std::string(target), weight});
  return *this;
}

NetBuilder& NetBuilder::final_tokens(std::string_view place_id, TokenCount tokens) {
  final_.emplace_back(std::string(place_id), tokens);
  return *this;
}

PetriNet NetBuilder::build() const {
  PetriNet net;
  for (std::size_t i = 0; i < places_.size(); ++i) {
    const auto& [id, tokens] = places_[i];
    if (id.empty()) throw NetError("place with empty id");
    if (tokens < 0) throw NetError("negative initial marking on place '" + id + "'");
    if (!net.place_index_.emplace(id, net.places_.size()).second) throw NetError("duplicate place id '" + id + "'");
    net.places_.push_back(Place{id, place_names_[i]});
  }
  if (transitions_.empty()) throw NetError("net has no transitions");

  // Identifier order fixes every tie-break during replay.
  std::vector<std::size_t> order(transitions_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return transitions_[a].first < transitions_[b].first; });
  for (std::size_t i : order) {
    const auto& [id, label] = transitions_[i];
    if (id.empty()) throw NetError("transition with empty id");
    if (net.place_index_.contains(id)) throw NetError("id '" + id + "' used by a place and a transition");
    const TransitionIndex t = net.transitions_.size();
    if (!net.transition_index_.emplace(id, t).second) throw NetError("duplicate transition id '" + id + "'");
    net.transitions_.push_back(Transition{id, label});
    if (label) net.by_label_[*label].push_back(t);
    else net.silent_.push_back(t);
  }
  net.inputs_.assign(net.transitions_.size(), {});
  net.outputs_.assign(net.transitions_.size(), {});

  std::vector<bool> has_outgoing(net.places_.size(), false);
  for (const auto& a : arcs_) {
    if (a.weight < 1) throw NetError("arc " + a.source + "->" + a.target + " has non-positive weight");
    auto sp = net.find_place(a.source);
    auto st = net.find_transition(a.source);
    auto tp = net.find_place(a.target);
    auto tt = net.find_transition(a.target);
    if (!sp && !st) throw NetError("arc references unknown node '" + a.source + "'");
    if (!tp && !tt) throw NetError("arc references unknown node '" + a.target + "'");
    auto add = [](std::vector<WeightedPlace>& list, PlaceIndex p, TokenCount w) {
      for (auto& e : list)
        if (e.place == p) {
          e.weight += w;
          return;
        }
      list.push_back({p, w});
    };
    if (sp && tt) {
      add(net.inputs_[*tt], *sp, a.weight);
      has_outgoing[*sp] = true;
    } else if (st && tp) {
      add(net.outputs_[*st], *tp, a.weight);
    } else {
      throw NetError("arc " + a.source + "->" + a.target + " must connect a place and a transition");
    }
  }
  for (auto& l : net.inputs_) std::sort(l.begin(), l.end());
  for (auto& l : net.outputs_) std::sort(l.begin(), l.end());

  net.initial_ = net.empty_marking();
  for (PlaceIndex p = 0; p < net.places_.size(); ++p) net.initial_.tokens[p] = places_[p].second;

  net.final_ = net.empty_marking();
  if (!final_.empty()) {
    for (const auto& [id, tokens] : final_) {
      auto p = net.find_place(id);
      if (!p) throw NetError("final marking references unknown place '" + id + "'");
      if (tokens < 0) throw NetError("negative final marking on place '" + id + "'");
      net.final_.tokens[*p] += tokens;
    }
  } else {
    bool any_sink = false;
    for (PlaceIndex p = 0; p < net.places_.size(); ++p)
      if (!has_outgoing[p]) {
        net.final_.tokens[p] = 1;
        any_sink = true;
      }
    if (!any_sink) throw NetError("no final marking given and the net has no sink place");
  }
  return net;
}

// ---------------------------------------------------------------------------
// PNML

namespace {

TokenCount parse_count(const std::string& text, std::string_view what, std::size_t line) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return 0;
  TokenCount v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("invalid " + std::string(what) + " '" + text + "'", line, 1);
  return v;
}

bool flagged_invisible(const xml::Node& node) {
  for (const auto* ts : node.children_named("toolspecific")) {
    const std::string* activity = ts->attribute("activity");
    if (activity != nullptr && *activity == "$invisible$") return true;
  }
  return false;
}

void collect(const xml::Node& node, NetBuilder& builder) {
  for (const auto& child : node.children) {
    if (child.name == "page") {
      collect(child, builder);
    } else if (child.name == "place") {
      const std::string* id = child.attribute("id");
      if (id == nullptr) throw ParseError("place without id", child.line, 1);
      builder.place(*id, parse_count(child.child_text("initialMarking"), "initial marking", child.line),
                    child.child_text("name"));
    } else if (child.name == "transition") {
      const std::string* id = child.attribute("id");
      if (id == nullptr) throw ParseError("transition without id", child.line, 1);
      std::string name = child.child_text("name");
      if (child.child("name") == nullptr || flagged_invisible(child) || name.empty()) builder.silent(*id);
      else builder.transition(*id, std::move(name));
    } else if (child.name == "arc") {
      const std::string* src = child.attribute("source");
      const std::string* dst = child.attribute("target");
      if (src == nullptr || dst == nullptr) throw ParseError("arc without source/target", child.line, 1);
      TokenCount w = parse_count(child.child_text("inscription"), "arc inscription", child.line);
      builder.arc(*src, *dst, w == 0 ? 1 : w);
    }
  }
}

}  // namespace

PetriNet parse_pnml(std::istream& in) {
  const xml::Node root = xml::parse_document(in);
  const xml::Node* net = root.name == "net" ? &root : root.child("net");
  if (net == nullptr) throw ParseError("PNML document has no <net> element");
  NetBuilder builder;
  collect(*net, builder);
  const xml::Node* finals = net->child("finalmarkings");
  if (finals == nullptr) finals = root.child("finalmarkings");
  if (finals != nullptr) {
    if (const xml::Node* marking = finals->child("marking")) {
      for (const auto* p : marking->children_named("place")) {
        const std::string* ref = p->attribute("idref");
        if (ref == nullptr) throw ParseError("final marking place without idref", p->line, 1);
        const xml::Node* t = p->child("text");
        TokenCount n = parse_count(t != nullptr ? t->text : "", "final marking", p->line);
        if (n > 0) builder.final_tokens(*ref, n);
      }
    }
  }
  try {
    return builder.build();
  } catch (const NetError& e) {
    throw ParseError(std::string("invalid PNML net: ") + e.what());
  }
}

void write_pnml(std::ostream& out, const PetriNet& net, std::string_view net_id) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n"
      << "  <net id=\"" << xml::escape(net_id) << "\" type=\"http://www.pnml.org/version-2009/grammar/pnmlcoremodel\">\n"
      << "    <page id=\"page1\">\n";
  for (PlaceIndex p = 0; p < net.places().size(); ++p) {
    const auto& place = net.places()[p];
    out << "      <place id=\"" << xml::escape(place.id) << "\">\n";
    out << "        <name><text>" << xml::escape(place.name.empty() ? place.id : place.name) << "</text></name>\n";
    if (net.initial_marking().tokens[p] > 0)
      out << "        <initialMarking><text>" << net.initial_marking().tokens[p] << "</text></initialMarking>\n";
    out << "      </place>\n";
  }
  for (const auto& t : net.transitions()) {
    out << "      <transition id=\"" << xml::escape(t.id) << "\">\n";
    if (t.label) {
      out << "        <name><text>" << xml::escape(*t.label) << "</text></name>\n";
    } else {
      out << "        <name><text>" << xml::escape(t.id) << "</text></name>\n"
          << "        <toolspecific tool=\"ProM\" version=\"6.4\" activity=\"$invisible$\"/>\n";
    }
    out << "      </transition>\n";
  }
  std::size_t arc_id = 0;
  auto write_arc = [&](std::string_view src, std::string_view dst, TokenCount w) {
    out << "      <arc id=\"a" << ++arc_id << "\" source=\"" << xml::escape(src) << "\" target=\"" << xml::escape(dst)
        << "\">";
    if (w != 1) out << "<inscription><text>" << w << "</text></inscription>";
    out << "</arc>\n";
  };
  for (TransitionIndex t = 0; t < net.transitions().size(); ++t) {
    for (const auto& in : net.inputs(t)) write_arc(net.places()[in.place].id, net.transitions()[t].id, in.weight);
    for (const auto& o : net.outputs(t)) write_arc(net.transitions()[t].id, net.places()[o.place].id, o.weight);
  }
  out << "    </page>\n    <finalmarkings>\n      <marking>\n";
  for (PlaceIndex p = 0; p < net.places().size(); ++p)
    if (net.final_marking().tokens[p] > 0)
      out << "        <place idref=\"" << xml::escape(net.places()[p].id) << "\"><text>"
          << net.final_marking().tokens[p] << "</text></place>\n";
  out << "      </marking>\n    </finalmarkings>\n  </net>\n</pnml>\n";
}

PetriNet load_pnml(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open PNML file '" + path + "'");
  return parse_pnml(in);
}

void save_pnml(const std::string& path, const PetriNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_pnml(out, net);
}

// ---------------------------------------------------------------------------
// Firing and replay

bool is_enabled(const PetriNet& net, const Marking& marking, TransitionIndex t) {
  for (const auto& in : net.inputs(t))
    if (marking.tokens[in.place] < in.weight) return false;
  return true;
}

std::vector<TransitionIndex> enabled_transitions(const PetriNet& net, const Marking& marking) {
  std::vector<TransitionIndex> out;
  for (TransitionIndex t = 0; t < net.transitions().size(); ++t)
    if (is_enabled(net, marking, t)) out.push_back(t);
  return out;
}

Marking fire(const PetriNet& net, const Marking& marking, TransitionIndex t) {
  if (t >= net.transitions().size()) throw NetError("unknown transition index " + std::to_string(t));
  Marking next = marking;
  for (const auto& in : net.inputs(t)) next.tokens[in.place] = std::max<TokenCount>(0, next.tokens[in.place] - in.weight);
  for (const auto& out : net.outputs(t)) next.tokens[out.place] += out.weight;
  return next;
}

namespace {

TokenCount shortfall(const PetriNet& net, const Marking& marking, TransitionIndex t) {
  TokenCount missing = 0;
  for (const auto& in : net.inputs(t)) missing += std::max<TokenCount>(0, in.weight - marking.tokens[in.place]);
  return missing;
}

TokenCount weight_sum(std::span<const WeightedPlace> arcs) {
  TokenCount s = 0;
  for (const auto& a : arcs) s += a.weight;
  return s;
}

// Breadth-first over enabled silent firings; returns the first shortest
// sequence reaching a marking that satisfies `goal`.
std::optional<std::vector<TransitionIndex>> silent_path(const PetriNet& net, const Marking& start,
                                                        const std::function<bool(const Marking&)>& goal) {
  if (goal(start)) return std::vector<TransitionIndex>{};
  if (net.silent_transitions().empty()) return std::nullopt;
  constexpr std::size_t kMaxStates = 50'000;
  struct Node {
    Marking marking;
    std::size_t parent;
    TransitionIndex via;
  };
  std::vector<Node> nodes{{start, 0, 0}};
  std::set<Marking> seen{start};
  std::size_t level_begin = 0;
  for (std::size_t depth = 1; depth <= kSilentSearchDepth; ++depth) {
    const std::size_t level_end = nodes.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (TransitionIndex t : net.silent_transitions()) {
        if (!is_enabled(net, nodes[i].marking, t)) continue;
        Marking next = fire(net, nodes[i].marking, t);
        if (!seen.insert(next).second) continue;
        nodes.push_back({std::move(next), i, t});
        if (goal(nodes.back().marking)) {
          std::vector<TransitionIndex> path;
          for (std::size_t n = nodes.size() - 1; n != 0; n = nodes[n].parent) path.push_back(nodes[n].via);
          std::reverse(path.begin(), path.end());
          return path;
        }
        if (nodes.size() >= kMaxStates) return std::nullopt;
      }
    }
    if (nodes.size() == level_end) return std::nullopt;
    level_begin = level_end;
  }
  return std::nullopt;
}

void fire_counted(const PetriNet& net, ReplayState& state, TransitionIndex t) {
  for (const auto& in : net.inputs(t)) {
    auto& tokens = state.marking.tokens[in.place];
    if (tokens < in.weight) {
      state.missing += in.weight - tokens;
      tokens = in.weight;
    }
    tokens -= in.weight;
  }
  state.consumed += weight_sum(net.inputs(t));
  for (const auto& out : net.outputs(t)) state.marking.tokens[out.place] += out.weight;
  state.produced += weight_sum(net.outputs(t));
}

}  // namespace

ReplayState start_replay(const PetriNet& net) {
  ReplayState s;
  s.marking = net.initial_marking();
  s.produced = s.marking.total();
  return s;
}

void replay_step(const PetriNet& net, ReplayState& state, std::string_view label) {
  const auto candidates = net.transitions_with_label(label);
  if (candidates.empty()) {
    // Virtual transition: one missing token, one consumed, nothing produced.
    state.missing += 1;
    state.consumed += 1;
    return;
  }
  for (TransitionIndex t : candidates) {
    if (is_enabled(net, state.marking, t)) {
      fire_counted(net, state, t);
      return;
    }
  }
  std::optional<std::vector<TransitionIndex>> best_path;
  TransitionIndex best = candidates.front();
  if (!net.silent_transitions().empty()) {
    for (TransitionIndex t : candidates) {
      auto path = silent_path(net, state.marking, [&](const Marking& m) { return is_enabled(net, m, t); });
      if (path && (!best_path || path->size() < best_path->size())) {
        best_path = std::move(path);
        best = t;
      }
    }
  }
  if (best_path) {
    for (TransitionIndex s : *best_path) fire_counted(net, state, s);
  } else {
    TokenCount fewest = shortfall(net, state.marking, best);
    for (TransitionIndex t : candidates) {
      const TokenCount need = shortfall(net, state.marking, t);
      if (need < fewest) {
        fewest = need;
        best = t;
      }
    }
  }
  fire_counted(net, state, best);
}

ReplayResult finish_replay(const PetriNet& net, const ReplayState& state, bool partial) {
  ReplayResult r;
  if (partial) {
    r.produced = state.produced;
    r.consumed = state.consumed;
    r.missing = state.missing;
    return r;
  }
  ReplayState end = state;
  const Marking& target = net.final_marking();
  if (end.marking != target) {
    auto path = silent_path(net, end.marking, [&](const Marking& m) { return m == target; });
    if (path)
      for (TransitionIndex s : *path) fire_counted(net, end, s);
  }
  r.final_reached = end.marking == target;
  for (PlaceIndex p = 0; p < target.tokens.size(); ++p) {
    const TokenCount need = target.tokens[p];
    auto& have = end.marking.tokens[p];
    if (have < need) {
      end.missing += need - have;
      have = need;
    }
    have -= need;
    end.consumed += need;
  }
  r.produced = end.produced;
  r.consumed = end.consumed;
  r.missing = end.missing;
  r.remaining = end.marking.total();
  return r;
}

ReplayResult token_replay(const PetriNet& net, const Variant& variant, bool partial) {
  ReplayState state = start_replay(net);
  for (const auto& label : variant.labels) {
    if (label == kEndLabel) throw ConfigError("token_replay: strip the completion label before replay");
    replay_step(net, state, label);
  }
  return finish_replay(net, state, partial);
}

double fitness(const ReplayResult& r) {
  if (r.consumed <= 0 || r.produced <= 0) {
    spdlog::warn("fitness undefined for consumed={} produced={}; reporting 0", r.consumed, r.produced);
    return 0.0;
  }
  const double c = static_cast<double>(r.consumed);
  const double p = static_cast<double>(r.produced);
  return 0.5 * (1.0 - static_cast<double>(r.missing) / c) + 0.5 * (1.0 - static_cast<double>(r.remaining) / p);
}

double compliance(const PetriNet& net, const Variant& variant, bool partial) {
  if (!variant.empty() && variant.back() == kEndLabel) {
    Variant stripped(std::vector<std::string>(variant.labels.begin(), variant.labels.end() - 1));
    return fitness(token_replay(net, stripped, false));
  }
  return fitness(token_replay(net, variant, partial));
}

}  // namespace kbmod
