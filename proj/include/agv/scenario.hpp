#pragma once

#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agv/layout.hpp"
#include "agv/resources.hpp"

namespace agv {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct AgentSpec {
  AgentId id{};
  int priority{0};
  NodeId start{};
  NodeId goal{};
  double max_speed{1.0};   // m/s
  double period{0.1};      // s
  double footprint{0.2};   // m
};

struct SimConfig {
  std::string name{"scenario"};
  double radius{3.0};
  double horizon{60.0};
  unsigned long long seed{1};
  double jitter{0.1};           // fraction of the period
  int replan_threshold{10};     // ticks; INT_MAX encodes "inf"
  bool replanning{true};
  std::optional<double> node_spacing;
  std::optional<double> sample_interval;  // pose sampling; defaults to the smallest period
  bool online_detection{false};
};

struct Scenario {
  LayoutGraph layout;
  std::vector<AgentSpec> agents;          // ascending id
  std::map<AgentId, Path> paths;          // explicit initial paths (optional)
  SimConfig sim;

  const AgentSpec* agent(AgentId id) const {
    for (const AgentSpec& a : agents)
      if (a.id == id) return &a;
    return nullptr;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline long long parse_int(const std::string& tok, int line, const char* what) {
  long long v = 0;
  const auto* end = tok.data() + tok.size();
  const auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || p != end) throw ParseError(line, std::string("expected integer ") + what + ", got '" + tok + "'");
  return v;
}

inline double parse_real(const std::string& tok, int line, const char* what) {
  double v = 0;
  const auto* end = tok.data() + tok.size();
  const auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || p != end || !std::isfinite(v))
    throw ParseError(line, std::string("expected number ") + what + ", got '" + tok + "'");
  return v;
}

inline bool parse_switch(const std::string& tok, int line, const char* what) {
  if (tok == "on" || tok == "true" || tok == "1") return true;
  if (tok == "off" || tok == "false" || tok == "0") return false;
  throw ParseError(line, std::string("expected on/off for ") + what + ", got '" + tok + "'");
}

// "name: 1 2 3" -> {name, [1,2,3]}
inline std::pair<std::string, std::vector<NodeId>> parse_named_list(std::string_view body, int line) {
  const auto colon = body.find(':');
  if (colon == std::string_view::npos) throw ParseError(line, "expected 'name: ids...'");
  std::string name{trim(body.substr(0, colon))};
  if (name.empty()) throw ParseError(line, "empty list name");
  std::vector<NodeId> ids;
  for (const auto& tok : split_ws(body.substr(colon + 1))) ids.push_back(static_cast<NodeId>(parse_int(tok, line, "node id")));
  return {std::move(name), std::move(ids)};
}

}  // namespace detail

// Parses the sectioned scenario text. Layout sections build and validate the
// graph; agents and sim settings are parsed but not checked against the bounds
// (see validate_scenario_bounds).
inline Scenario parse_scenario(std::string_view text) {
  enum class Section { None, Nodes, Arcs, Rooms, Criticals, Agents, Paths, Sim };
  Section section = Section::None;
  std::vector<Node> nodes;
  std::vector<Arc> arcs;
  std::vector<Region> rooms, criticals;
  Scenario sc;
  std::map<std::string, int> seen_keys;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view body = raw;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError(line, "unterminated section header");
      const std::string name{detail::trim(body.substr(1, body.size() - 2))};
      if (name == "nodes") section = Section::Nodes;
      else if (name == "arcs") section = Section::Arcs;
      else if (name == "rooms") section = Section::Rooms;
      else if (name == "criticals") section = Section::Criticals;
      else if (name == "agents") section = Section::Agents;
      else if (name == "paths") section = Section::Paths;
      else if (name == "sim") section = Section::Sim;
      else throw ParseError(line, "unknown section [" + name + "]");
      continue;
    }
    const auto toks = detail::split_ws(body);
    switch (section) {
      case Section::None: throw ParseError(line, "content before the first section");
      case Section::Nodes: {
        if (toks.size() != 3) throw ParseError(line, "node needs: id x y");
        nodes.push_back({static_cast<NodeId>(detail::parse_int(toks[0], line, "node id")),
                         {detail::parse_real(toks[1], line, "x"), detail::parse_real(toks[2], line, "y")}});
        break;
      }
      case Section::Arcs: {
        if (toks.size() != 2) throw ParseError(line, "arc needs: id id");
        arcs.push_back({static_cast<NodeId>(detail::parse_int(toks[0], line, "arc end")),
                        static_cast<NodeId>(detail::parse_int(toks[1], line, "arc end"))});
        break;
      }
      case Section::Rooms:
      case Section::Criticals: {
        auto [name, ids] = detail::parse_named_list(body, line);
        (section == Section::Rooms ? rooms : criticals).push_back({std::move(name), std::move(ids)});
        break;
      }
      case Section::Agents: {
        if (toks.size() != 7) throw ParseError(line, "agent needs: id priority start goal max_speed period footprint");
        AgentSpec a;
        a.id = static_cast<AgentId>(detail::parse_int(toks[0], line, "agent id"));
        a.priority = static_cast<int>(detail::parse_int(toks[1], line, "priority"));
        a.start = static_cast<NodeId>(detail::parse_int(toks[2], line, "start"));
        a.goal = static_cast<NodeId>(detail::parse_int(toks[3], line, "goal"));
        a.max_speed = detail::parse_real(toks[4], line, "max_speed");
        a.period = detail::parse_real(toks[5], line, "period");
        a.footprint = detail::parse_real(toks[6], line, "footprint");
        if (a.priority < 0) throw ParseError(line, "priority must be non-negative");
        if (a.max_speed <= 0 || a.period <= 0 || a.footprint <= 0)
          throw ParseError(line, "max_speed, period and footprint must be positive");
        if (sc.agent(a.id)) throw ParseError(line, "duplicate agent id " + std::to_string(a.id));
        sc.agents.push_back(a);
        break;
      }
      case Section::Paths: {
        auto [name, ids] = detail::parse_named_list(body, line);
        const auto id = static_cast<AgentId>(detail::parse_int(name, line, "agent id"));
        if (!sc.paths.emplace(id, std::move(ids)).second) throw ParseError(line, "duplicate path for agent " + name);
        break;
      }
      case Section::Sim: {
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(line, "expected key = value");
        const std::string key{detail::trim(body.substr(0, eq))};
        const std::string value{detail::trim(body.substr(eq + 1))};
        if (++seen_keys[key] > 1) throw ParseError(line, "duplicate key " + key);
        SimConfig& s = sc.sim;
        if (key == "name") s.name = value;
        else if (key == "radius") s.radius = detail::parse_real(value, line, key.c_str());
        else if (key == "horizon") s.horizon = detail::parse_real(value, line, key.c_str());
        else if (key == "seed") s.seed = static_cast<unsigned long long>(detail::parse_int(value, line, key.c_str()));
        else if (key == "jitter") s.jitter = detail::parse_real(value, line, key.c_str());
        else if (key == "replan_threshold")
          s.replan_threshold = value == "inf" ? INT_MAX : static_cast<int>(detail::parse_int(value, line, key.c_str()));
        else if (key == "replanning") s.replanning = detail::parse_switch(value, line, key.c_str());
        else if (key == "node_spacing") s.node_spacing = detail::parse_real(value, line, key.c_str());
        else if (key == "sample_interval") s.sample_interval = detail::parse_real(value, line, key.c_str());
        else if (key == "online_detection") s.online_detection = detail::parse_switch(value, line, key.c_str());
        else throw ParseError(line, "unknown sim key " + key);
        break;
      }
    }
  }
  if (sc.sim.radius <= 0) throw ParseError(line, "radius must be positive");
  if (sc.sim.jitter < 0 || sc.sim.jitter >= 1) throw ParseError(line, "jitter must lie in [0, 1)");
  if (sc.sim.replan_threshold < 0) throw ParseError(line, "replan_threshold must be non-negative");
  sc.layout = LayoutGraph::build(std::move(nodes), arcs, std::move(rooms), std::move(criticals), sc.sim.node_spacing);
  std::sort(sc.agents.begin(), sc.agents.end(), [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });
  return sc;
}

// Layout part of a scenario document.
inline LayoutGraph load_layout(std::string_view text) { return parse_scenario(text).layout; }

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Scenario load_scenario_file(const std::string& path) { return parse_scenario(read_text_file(path)); }

}  // namespace agv
