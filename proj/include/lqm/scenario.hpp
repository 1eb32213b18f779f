#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqm/network.hpp"
#include "lqm/state.hpp"

namespace lqm {

/// Parse failure with 1-based line/column of the offending token.
struct ScenarioError : std::runtime_error {
  int line = 0;
  int column = 0;
  ScenarioError(const std::string& msg, int line_, int column_)
      : std::runtime_error("line " + std::to_string(line_) + ", col " +
                           std::to_string(column_) + ": " + msg),
        line(line_),
        column(column_) {}
};

struct FdSpec {
  double vfree = 0, wback = 0, kjam = 0;  // kjam is per lane
  int lanes = 1;
};

struct ScnLink {
  LinkId id = 0;
  LinkKind kind = LinkKind::normal;
  double length = 0;
  FdSpec fd;
};

struct ScnJunction {
  JunctionId id = 0;
  std::vector<LinkId> up, down;
  FluxRuleKind rule = FluxRuleKind::linear;
  double priority = 0.5;
  std::optional<SignalProgram> signal;
};

struct ScnCommodity {
  CommodityId id = 0;
  std::vector<LinkId> path;
};

struct ScnOrigin {
  LinkId id = 0;
  bool queued = false;
  TimeProfile profile;  // arrivals (queued) or demand (queueless)
  std::vector<std::pair<CommodityId, TimeProfile>> splits;
};

struct ScnDestination {
  LinkId id = 0;
  TimeProfile supply = TimeProfile::constant(unbounded);
};

enum class Engine { lq, ctm };

struct ScnSimulation {
  std::vector<Engine> engines;
  double dt = 0, dx = 0, horizon = 0;
  int record_every = 1;
  bool allow_cfl_violation = false;
};

enum class ExperimentKind { none, single_link_oracle, ring_mfd, dm2_regime,
                            stability };

struct ScnExperiment {
  ExperimentKind kind = ExperimentKind::none;
  std::vector<double> densities;   // ring-mfd sweep
  std::vector<double> cycles;      // ring-mfd sweep, hours
  double green_ratio = 0.5;        // ring-mfd
  double xi = 0;                   // stability
  std::vector<LinkId> watch;       // links to classify (dm2-regime)
};

struct ScenarioFile {
  std::vector<ScnLink> links;
  std::vector<ScnJunction> junctions;
  std::vector<ScnCommodity> commodities;
  std::vector<ScnOrigin> origins;
  std::vector<ScnDestination> destinations;
  ScnSimulation sim;
  ScnExperiment experiment;

  Network build() const;
  BoundaryConditions boundary(const Network& net) const;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Tok {
  std::string text;
  int line, col;
};

inline double parse_double(const Tok& t, const std::string& s) {
  if (s == "inf") return unbounded;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ScenarioError("expected a number, got '" + s + "'", t.line, t.col);
  }
}

inline long parse_int(const Tok& t, const std::string& s) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ScenarioError("expected an integer, got '" + s + "'", t.line, t.col);
  }
}

inline std::vector<double> parse_doubles(const Tok& t, const std::string& s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(t, part));
  return out;
}

inline std::vector<LinkId> parse_ids(const Tok& t, const std::string& s) {
  std::vector<LinkId> out;
  for (const auto& part : split(s, ',')) {
    out.push_back(static_cast<LinkId>(parse_int(t, part)));
  }
  return out;
}

/// constant:<v> | halfsine:<c0>:<period> | piecewise:<t>=<v>[,<t>=<v>...]
inline TimeProfile parse_profile(const Tok& t, const std::string& s) {
  const auto parts = split(s, ':');
  if (parts[0] == "constant" && parts.size() == 2) {
    return TimeProfile::constant(parse_double(t, parts[1]));
  }
  if (parts[0] == "halfsine" && parts.size() == 3) {
    return TimeProfile::half_sine(parse_double(t, parts[1]),
                                  parse_double(t, parts[2]));
  }
  if (parts[0] == "piecewise" && parts.size() == 2) {
    std::vector<std::pair<double, double>> table;
    for (const auto& entry : split(parts[1], ',')) {
      const auto kv = split(entry, '=');
      if (kv.size() != 2) {
        throw ScenarioError("piecewise entry must be t=value", t.line, t.col);
      }
      table.emplace_back(parse_double(t, kv[0]), parse_double(t, kv[1]));
    }
    return TimeProfile::piecewise(std::move(table));
  }
  throw ScenarioError("unknown profile '" + s + "'", t.line, t.col);
}

inline std::string format_double(double v) {
  if (is_unbounded(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_profile(const TimeProfile& p) {
  switch (p.kind) {
    case TimeProfile::Kind::constant:
      return "constant:" + format_double(p.value);
    case TimeProfile::Kind::half_sine:
      return "halfsine:" + format_double(p.c0) + ":" + format_double(p.period);
    case TimeProfile::Kind::piecewise: {
      std::string out = "piecewise:";
      for (std::size_t i = 0; i < p.table.size(); ++i) {
        if (i) out += ",";
        out += format_double(p.table[i].first) + "=" +
               format_double(p.table[i].second);
      }
      return out;
    }
  }
  return "";
}

/// key=value pairs after the positional words of a line. Duplicate and (at
/// the call sites) unknown keys are errors.
struct KvArgs {
  std::map<std::string, Tok> kv;
  int line;

  const Tok* find(const std::string& key) const {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  }
  const Tok& require(const std::string& key) const {
    const Tok* t = find(key);
    if (!t) throw ScenarioError("missing key '" + key + "'", line, 1);
    return *t;
  }
  void check_known(std::initializer_list<const char*> known,
                   bool allow_splits = false) const {
    for (const auto& [key, tok] : kv) {
      bool ok = allow_splits && key.rfind("split.", 0) == 0;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) {
        throw ScenarioError("unknown key '" + key + "'", tok.line, tok.col);
      }
    }
  }
};

}  // namespace detail

inline ScenarioFile parse_scenario(const std::string& text) {
  using detail::Tok;
  ScenarioFile scn;
  std::string section;
  bool any_content = false;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    // Tokenize on whitespace, keeping column positions.
    std::vector<Tok> toks;
    for (std::size_t i = 0; i < raw.size();) {
      if (std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j])))
        ++j;
      toks.push_back({raw.substr(i, j - i), lineno, static_cast<int>(i + 1)});
      i = j;
    }
    if (toks.empty()) continue;
    any_content = true;

    const Tok& head = toks[0];
    if (head.text.front() == '[') {
      if (toks.size() != 1 || head.text.back() != ']') {
        throw ScenarioError("malformed section header", head.line, head.col);
      }
      section = head.text.substr(1, head.text.size() - 2);
      if (section != "network" && section != "boundary" &&
          section != "simulation" && section != "experiment") {
        throw ScenarioError("unknown section '" + section + "'", head.line,
                            head.col);
      }
      continue;
    }
    if (section.empty()) {
      throw ScenarioError("content before first section", head.line, head.col);
    }

    // Positional words, then key=value pairs.
    detail::KvArgs args;
    args.line = lineno;
    std::vector<Tok> words;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto eq = toks[i].text.find('=');
      if (eq == std::string::npos) {
        if (!args.kv.empty()) {
          throw ScenarioError("positional word after key=value", toks[i].line,
                              toks[i].col);
        }
        words.push_back(toks[i]);
      } else {
        const std::string key = toks[i].text.substr(0, eq);
        Tok val{toks[i].text.substr(eq + 1), toks[i].line,
                static_cast<int>(toks[i].col + eq + 1)};
        if (!args.kv.emplace(key, val).second) {
          throw ScenarioError("duplicate key '" + key + "'", toks[i].line,
                              toks[i].col);
        }
      }
    }
    const auto word = [&](std::size_t i) -> const Tok& {
      if (i >= words.size()) {
        throw ScenarioError("missing argument", head.line, head.col);
      }
      return words[i];
    };

    if (section == "network") {
      if (head.text == "link") {
        ScnLink l;
        l.id = static_cast<LinkId>(detail::parse_int(word(0), word(0).text));
        const std::string& kind = word(1).text;
        if (kind == "normal") {
          l.kind = LinkKind::normal;
          args.check_known({"length", "vfree", "wback", "kjam", "lanes"});
          l.length = detail::parse_double(args.require("length"),
                                          args.require("length").text);
          l.fd.vfree = detail::parse_double(args.require("vfree"),
                                            args.require("vfree").text);
          l.fd.wback = detail::parse_double(args.require("wback"),
                                            args.require("wback").text);
          l.fd.kjam = detail::parse_double(args.require("kjam"),
                                           args.require("kjam").text);
          l.fd.lanes = static_cast<int>(detail::parse_int(
              args.require("lanes"), args.require("lanes").text));
        } else if (kind == "origin" || kind == "destination") {
          l.kind = kind == "origin" ? LinkKind::origin : LinkKind::destination;
          args.check_known({});
        } else {
          throw ScenarioError("unknown link kind '" + kind + "'", word(1).line,
                              word(1).col);
        }
        scn.links.push_back(std::move(l));
      } else if (head.text == "junction") {
        ScnJunction j;
        j.id = static_cast<JunctionId>(detail::parse_int(word(0), word(0).text));
        args.check_known({"up", "down", "rule", "priority", "cycle", "green"});
        j.up = detail::parse_ids(args.require("up"), args.require("up").text);
        j.down = detail::parse_ids(args.require("down"),
                                   args.require("down").text);
        const Tok& rt = args.require("rule");
        if (rt.text == "linear") j.rule = FluxRuleKind::linear;
        else if (rt.text == "fair_merge") j.rule = FluxRuleKind::fair_merge;
        else if (rt.text == "priority_merge") j.rule = FluxRuleKind::priority_merge;
        else if (rt.text == "fifo_diverge") j.rule = FluxRuleKind::fifo_diverge;
        else if (rt.text == "evacuation_diverge")
          j.rule = FluxRuleKind::evacuation_diverge;
        else if (rt.text == "unified") j.rule = FluxRuleKind::unified_fair_fifo;
        else throw ScenarioError("unknown rule '" + rt.text + "'", rt.line, rt.col);
        if (const Tok* p = args.find("priority")) {
          j.priority = detail::parse_double(*p, p->text);
        }
        if (const Tok* c = args.find("cycle")) {
          SignalProgram sig;
          sig.cycle = detail::parse_double(*c, c->text);
          const Tok& g = args.require("green");
          for (const auto& iv : detail::split(g.text, ';')) {
            const auto ab = detail::split(iv, '-');
            if (ab.size() != 2) {
              throw ScenarioError("green interval must be start-end", g.line,
                                  g.col);
            }
            sig.green.emplace_back(detail::parse_double(g, ab[0]),
                                   detail::parse_double(g, ab[1]));
          }
          j.signal = std::move(sig);
        } else if (args.find("green")) {
          throw ScenarioError("green requires cycle", lineno, 1);
        }
        scn.junctions.push_back(std::move(j));
      } else if (head.text == "commodity") {
        ScnCommodity c;
        c.id = static_cast<CommodityId>(detail::parse_int(word(0), word(0).text));
        args.check_known({"path"});
        c.path = detail::parse_ids(args.require("path"),
                                   args.require("path").text);
        scn.commodities.push_back(std::move(c));
      } else {
        throw ScenarioError("unknown directive '" + head.text + "'", head.line,
                            head.col);
      }
    } else if (section == "boundary") {
      if (head.text == "origin") {
        ScnOrigin o;
        o.id = static_cast<LinkId>(detail::parse_int(word(0), word(0).text));
        args.check_known({"arrivals", "demand"}, /*allow_splits=*/true);
        const Tok* arr = args.find("arrivals");
        const Tok* dem = args.find("demand");
        if (!!arr == !!dem) {
          throw ScenarioError("origin needs exactly one of arrivals=/demand=",
                              lineno, 1);
        }
        o.queued = arr != nullptr;
        const Tok& p = arr ? *arr : *dem;
        o.profile = detail::parse_profile(p, p.text);
        for (const auto& [key, tok] : args.kv) {
          if (key.rfind("split.", 0) == 0) {
            const CommodityId w =
                static_cast<CommodityId>(detail::parse_int(tok, key.substr(6)));
            o.splits.emplace_back(w, detail::parse_profile(tok, tok.text));
          }
        }
        scn.origins.push_back(std::move(o));
      } else if (head.text == "destination") {
        ScnDestination d;
        d.id = static_cast<LinkId>(detail::parse_int(word(0), word(0).text));
        args.check_known({"supply"});
        const Tok& s = args.require("supply");
        d.supply = detail::parse_profile(s, s.text);
        scn.destinations.push_back(std::move(d));
      } else {
        throw ScenarioError("unknown directive '" + head.text + "'", head.line,
                            head.col);
      }
    } else if (section == "simulation") {
      args.check_known({});
      const std::string val = words.empty() ? "" : word(0).text;
      if (head.text == "engine") {
        for (const auto& e : detail::split(val, ',')) {
          if (e == "lq") scn.sim.engines.push_back(Engine::lq);
          else if (e == "ctm") scn.sim.engines.push_back(Engine::ctm);
          else throw ScenarioError("unknown engine '" + e + "'", word(0).line,
                                   word(0).col);
        }
      } else if (head.text == "dt") {
        scn.sim.dt = detail::parse_double(word(0), val);
      } else if (head.text == "dx") {
        scn.sim.dx = detail::parse_double(word(0), val);
      } else if (head.text == "horizon") {
        scn.sim.horizon = detail::parse_double(word(0), val);
      } else if (head.text == "record_every") {
        scn.sim.record_every =
            static_cast<int>(detail::parse_int(word(0), val));
      } else if (head.text == "allow_cfl_violation") {
        if (val != "true" && val != "false") {
          throw ScenarioError("expected true/false", word(0).line, word(0).col);
        }
        scn.sim.allow_cfl_violation = val == "true";
      } else {
        throw ScenarioError("unknown directive '" + head.text + "'", head.line,
                            head.col);
      }
    } else {  // experiment
      args.check_known({});
      const std::string val = words.empty() ? "" : word(0).text;
      if (head.text == "kind") {
        if (val == "single-link-oracle")
          scn.experiment.kind = ExperimentKind::single_link_oracle;
        else if (val == "ring-mfd") scn.experiment.kind = ExperimentKind::ring_mfd;
        else if (val == "dm2-regime")
          scn.experiment.kind = ExperimentKind::dm2_regime;
        else if (val == "stability")
          scn.experiment.kind = ExperimentKind::stability;
        else throw ScenarioError("unknown experiment kind '" + val + "'",
                                 word(0).line, word(0).col);
      } else if (head.text == "densities") {
        scn.experiment.densities = detail::parse_doubles(word(0), val);
      } else if (head.text == "cycles") {
        scn.experiment.cycles = detail::parse_doubles(word(0), val);
      } else if (head.text == "green_ratio") {
        scn.experiment.green_ratio = detail::parse_double(word(0), val);
      } else if (head.text == "xi") {
        scn.experiment.xi = detail::parse_double(word(0), val);
      } else if (head.text == "watch") {
        scn.experiment.watch = detail::parse_ids(word(0), val);
      } else {
        throw ScenarioError("unknown directive '" + head.text + "'", head.line,
                            head.col);
      }
    }
  }

  if (!any_content) throw ScenarioError("empty scenario", 1, 1);
  if (scn.sim.engines.empty()) {
    throw ScenarioError("simulation section must name at least one engine",
                        lineno, 1);
  }
  if (!(scn.sim.dt > 0) || !(scn.sim.horizon > 0) || scn.sim.record_every < 1) {
    throw ScenarioError("simulation needs dt > 0, horizon > 0, record_every >= 1",
                        lineno, 1);
  }
  return scn;
}

inline std::string serialize_scenario(const ScenarioFile& scn) {
  using detail::format_double;
  std::string out = "[network]\n";
  for (const auto& l : scn.links) {
    out += "link " + std::to_string(l.id);
    switch (l.kind) {
      case LinkKind::normal:
        out += " normal length=" + format_double(l.length) +
               " vfree=" + format_double(l.fd.vfree) +
               " wback=" + format_double(l.fd.wback) +
               " kjam=" + format_double(l.fd.kjam) +
               " lanes=" + std::to_string(l.fd.lanes);
        break;
      case LinkKind::origin:
        out += " origin";
        break;
      case LinkKind::destination:
        out += " destination";
        break;
    }
    out += "\n";
  }
  const auto join_ids = [](const std::vector<LinkId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(ids[i]);
    }
    return s;
  };
  for (const auto& j : scn.junctions) {
    out += "junction " + std::to_string(j.id) + " up=" + join_ids(j.up) +
           " down=" + join_ids(j.down) + " rule=";
    switch (j.rule) {
      case FluxRuleKind::linear: out += "linear"; break;
      case FluxRuleKind::fair_merge: out += "fair_merge"; break;
      case FluxRuleKind::priority_merge: out += "priority_merge"; break;
      case FluxRuleKind::fifo_diverge: out += "fifo_diverge"; break;
      case FluxRuleKind::evacuation_diverge: out += "evacuation_diverge"; break;
      case FluxRuleKind::unified_fair_fifo: out += "unified"; break;
    }
    if (j.rule == FluxRuleKind::priority_merge ||
        j.rule == FluxRuleKind::evacuation_diverge) {
      out += " priority=" + format_double(j.priority);
    }
    if (j.signal) {
      out += " cycle=" + format_double(j.signal->cycle) + " green=";
      for (std::size_t i = 0; i < j.signal->green.size(); ++i) {
        if (i) out += ";";
        out += format_double(j.signal->green[i].first) + "-" +
               format_double(j.signal->green[i].second);
      }
    }
    out += "\n";
  }
  for (const auto& c : scn.commodities) {
    out += "commodity " + std::to_string(c.id) + " path=" + join_ids(c.path) +
           "\n";
  }
  out += "\n[boundary]\n";
  for (const auto& o : scn.origins) {
    out += "origin " + std::to_string(o.id) +
           (o.queued ? " arrivals=" : " demand=") +
           detail::format_profile(o.profile);
    for (const auto& [w, p] : o.splits) {
      out += " split." + std::to_string(w) + "=" + detail::format_profile(p);
    }
    out += "\n";
  }
  for (const auto& d : scn.destinations) {
    out += "destination " + std::to_string(d.id) +
           " supply=" + detail::format_profile(d.supply) + "\n";
  }
  out += "\n[simulation]\nengine ";
  for (std::size_t i = 0; i < scn.sim.engines.size(); ++i) {
    if (i) out += ",";
    out += scn.sim.engines[i] == Engine::lq ? "lq" : "ctm";
  }
  out += "\ndt " + format_double(scn.sim.dt);
  if (scn.sim.dx > 0) out += "\ndx " + format_double(scn.sim.dx);
  out += "\nhorizon " + format_double(scn.sim.horizon);
  out += "\nrecord_every " + std::to_string(scn.sim.record_every);
  if (scn.sim.allow_cfl_violation) out += "\nallow_cfl_violation true";
  out += "\n";
  if (scn.experiment.kind != ExperimentKind::none) {
    out += "\n[experiment]\nkind ";
    switch (scn.experiment.kind) {
      case ExperimentKind::single_link_oracle: out += "single-link-oracle"; break;
      case ExperimentKind::ring_mfd: out += "ring-mfd"; break;
      case ExperimentKind::dm2_regime: out += "dm2-regime"; break;
      case ExperimentKind::stability: out += "stability"; break;
      case ExperimentKind::none: break;
    }
    out += "\n";
    const auto join_d = [](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
      }
      return s;
    };
    if (!scn.experiment.densities.empty()) {
      out += "densities " + join_d(scn.experiment.densities) + "\n";
    }
    if (!scn.experiment.cycles.empty()) {
      out += "cycles " + join_d(scn.experiment.cycles) + "\n";
    }
    if (scn.experiment.kind == ExperimentKind::ring_mfd) {
      out += "green_ratio " + format_double(scn.experiment.green_ratio) + "\n";
    }
    if (scn.experiment.kind == ExperimentKind::stability) {
      out += "xi " + format_double(scn.experiment.xi) + "\n";
    }
    if (!scn.experiment.watch.empty()) {
      out += "watch " + join_ids(scn.experiment.watch) + "\n";
    }
  }
  return out;
}

inline Network ScenarioFile::build() const {
  std::vector<LinkSpec> ls;
  for (const auto& l : links) {
    LinkSpec s;
    s.id = l.id;
    s.kind = l.kind;
    if (l.kind == LinkKind::normal) {
      s.length = l.length;
      s.fd = make_triangular_fd(l.fd.vfree, l.fd.wback, l.fd.kjam, l.fd.lanes);
    }
    ls.push_back(std::move(s));
  }
  std::vector<JunctionSpec> js;
  for (const auto& j : junctions) {
    JunctionSpec s;
    s.id = j.id;
    s.upstream = j.up;
    s.downstream = j.down;
    s.rule = FluxRule{j.rule, j.priority};
    s.signal = j.signal;
    js.push_back(std::move(s));
  }
  std::vector<CommoditySpec> cs;
  for (const auto& c : commodities) cs.push_back({c.id, c.path});
  return build_network(ls, js, cs);
}

inline BoundaryConditions ScenarioFile::boundary(const Network& net) const {
  BoundaryConditions bc = BoundaryConditions::make_default(net);
  for (const auto& o : origins) {
    const auto& l = net.link(net.link_index(o.id));
    if (l.kind != LinkKind::origin) {
      throw NetworkError("boundary origin " + std::to_string(o.id) +
                         " is not an origin link");
    }
    OriginBc& ob = bc.origins.at(l.slot);
    ob.queued = o.queued;
    (o.queued ? ob.arrivals : ob.demand) = o.profile;
    ob.splits.assign(l.commodities.size(), TimeProfile::constant(0));
    std::vector<bool> seen(l.commodities.size(), false);
    for (const auto& [w, p] : o.splits) {
      const int slot = net.commodity_slot(net.link_index(o.id),
                                          net.commodity_index(w));
      ob.splits[slot] = p;
      seen[slot] = true;
    }
    for (std::size_t wi = 0; wi < seen.size(); ++wi) {
      if (!seen[wi]) {
        throw NetworkError("origin " + std::to_string(o.id) +
                           " is missing a split for a commodity using it");
      }
    }
  }
  for (const auto& d : destinations) {
    const auto& l = net.link(net.link_index(d.id));
    if (l.kind != LinkKind::destination) {
      throw NetworkError("boundary destination " + std::to_string(d.id) +
                         " is not a destination link");
    }
    bc.supplies.at(l.slot) = d.supply;
  }
  return bc;
}

}  // namespace lqm
