#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "agv/layout.hpp"
#include "agv/scenario.hpp"
#include "agv/signboard.hpp"
#include "agv/trace.hpp"

namespace agv {

// True when an agent at full speed runs at least two protocol steps while
// crossing half a node: period <= (d/2) / (2 u_max). A stationary agent
// (u_max == 0) always satisfies it.
inline bool check_sampling_constraint(double u_max, double d, double period) {
  if (!(u_max >= 0.0) || !(d > 0.0) || !(period > 0.0))
    throw std::invalid_argument("check_sampling_constraint: inputs must be positive");
  if (u_max == 0.0) return true;
  return period <= (d / 2.0) / (2.0 * u_max) + 1e-12;
}

struct Violation {
  double time{0.0};
  AgentId a{};
  AgentId b{};
  NodeId node{-1};       // shared node for exclusion violations
  double separation{0};  // pose distance for collision violations
};

// Every board publication that leaves two agents with the same current node.
inline std::vector<Violation> assert_mutual_exclusion(const Trace& trace) {
  std::vector<Violation> out;
  std::map<AgentId, NodeId> curr;
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records()) {
    if (r.time < last) throw TraceError("trace is not time-ordered");
    last = r.time;
    if (r.kind != RecordKind::Board) continue;
    const NodeId n = board_of(r).curr;
    curr[r.agent] = n;
    for (const auto& [other, m] : curr)
      if (other != r.agent && m == n) out.push_back({r.time, std::min(r.agent, other), std::max(r.agent, other), n, 0.0});
  }
  return out;
}

// Every pose-sample instant at which two agents are closer than 2*footprint.
inline std::vector<Violation> assert_no_geometric_collision(const Trace& trace, double footprint) {
  if (!(footprint > 0.0)) throw std::invalid_argument("footprint must be positive");
  std::vector<Violation> out;
  const auto& recs = trace.records();
  std::size_t i = 0;
  while (i < recs.size()) {
    if (recs[i].kind != RecordKind::Pose) {
      ++i;
      continue;
    }
    const double t = recs[i].time;
    std::map<AgentId, Vec2> poses;
    std::size_t j = i;
    for (; j < recs.size() && recs[j].time == t; ++j)
      if (recs[j].kind == RecordKind::Pose) poses[recs[j].agent] = pose_of(recs[j]);
    for (auto a = poses.begin(); a != poses.end(); ++a)
      for (auto b = std::next(a); b != poses.end(); ++b) {
        const double sep = distance(a->second, b->second);
        if (sep < 2.0 * footprint) out.push_back({t, a->first, b->first, -1, sep});
      }
    i = j;
  }
  return out;
}

// Allowed cooperation-manager transitions (self-loops are not logged).
inline bool allowed_transition(FsmState from, FsmState to) {
  switch (from) {
    case FsmState::Req: return to == FsmState::W || to == FsmState::M || to == FsmState::Rep;
    case FsmState::W: return to == FsmState::Req || to == FsmState::Rep;
    case FsmState::M: return to == FsmState::Req;
    case FsmState::Rep: return to == FsmState::Req;
  }
  return false;
}

// Agents whose fsm records break the chain (source != previous target) or use
// a transition the manager does not have. Each agent starts in Req.
inline std::vector<std::pair<double, AgentId>> check_transition_sequence(const Trace& trace) {
  std::vector<std::pair<double, AgentId>> bad;
  std::map<AgentId, FsmState> state;
  for (const auto& r : trace.records()) {
    if (r.kind != RecordKind::Fsm) continue;
    const auto from = parse_fsm_state(r.fields.at(0));
    const auto to = parse_fsm_state(r.fields.at(1));
    const FsmState cur = state.count(r.agent) ? state[r.agent] : FsmState::Req;
    if (!from || !to || *from != cur || !allowed_transition(*from, *to)) bad.emplace_back(r.time, r.agent);
    if (to) state[r.agent] = *to;
  }
  return bad;
}

// How occupants of neighbouring nodes may move during the local analysis:
// anywhere along an arc, or only to the next node on their board.
enum class MoveModel { Graph, PathBound };

// One level set of the depth family: nodes expanded from the last element of `chain`.
struct LevelSet {
  int level{0};
  std::vector<NodeId> chain;  // n0 followed by the expanded ancestors
  std::vector<NodeId> nodes;  // sorted
};

struct DepthFamily {
  int p{0};
  std::vector<LevelSet> levels;
  std::vector<NodeId> G;          // nodes held by agents parked at their goal
  std::vector<NodeId> N_O;        // occupied nodes whose onward neighbourhood lies in G
  std::vector<NodeId> F;          // free nodes found
  std::vector<NodeId> vacatable;  // deepest-level occupied nodes that may still empty
};

struct DeadlockReport {
  bool deadlocked{false};
  bool at_goal{false};
  std::vector<NodeId> F;  // free nodes at the stopping level
  int depth{-1};          // level at which F (or a vacatable node) appeared
  DepthFamily family;
};

struct LivelockReport {
  bool applicable{true};  // false for an agent already at its goal
  bool certified{false};  // some safe path reaches length p-1
  std::vector<Path> safe_paths;
  DepthFamily family;
};

inline int depth_bound(double R, double d) {
  if (!(R > 0.0) || !(d > 0.0)) throw std::invalid_argument("radius and node dimension must be positive");
  return static_cast<int>(std::floor(R / d + 1e-9));
}

namespace detail {

// Local picture seen by one agent: visible occupants and the nodes within reach.
struct LocalView {
  const LayoutGraph* g{};
  NodeId n0{};
  std::map<NodeId, const SignBoard*> occupant;
  std::set<NodeId> region;  // nodes within R of the agent's current node

  bool in_region(NodeId n) const { return region.count(n) != 0; }
  const SignBoard* at(NodeId n) const {
    const auto it = occupant.find(n);
    return it == occupant.end() ? nullptr : it->second;
  }
};

inline LocalView local_view(const LayoutGraph& g, const WorldSnapshot& world, AgentId agent, double R) {
  const BoardView* self = world.find(agent);
  if (!self) throw UnknownAgent(agent);
  LocalView v;
  v.g = &g;
  v.n0 = self->board.curr;
  const Vec2 c = g.position(v.n0);
  for (const Node& n : g.nodes())
    if (distance(n.position, c) <= R + 1e-9) v.region.insert(n.id);
  for (const BoardView& b : world.agents) {
    if (b.board.id == agent) continue;
    if (distance(b.pose, self->pose) < R) v.occupant[b.board.curr] = &b.board;
  }
  return v;
}

enum class Cell { Free, Parked, Busy };

inline Cell cell_of(const LocalView& v, NodeId n) {
  const SignBoard* b = v.at(n);
  if (!b) return Cell::Free;
  return b->at_goal() ? Cell::Parked : Cell::Busy;
}

// Onward candidates of an occupied node, excluding the chain it was reached by.
inline std::vector<NodeId> children(const LocalView& v, NodeId n, const std::vector<NodeId>& chain, MoveModel model) {
  std::vector<NodeId> out;
  std::vector<NodeId> candidates;
  if (model == MoveModel::PathBound) {
    if (const SignBoard* b = v.at(n); b && b->next) candidates.push_back(*b->next);
  } else {
    candidates = v.g->neighbours(n);
  }
  for (NodeId c : candidates) {
    if (c == n || !v.in_region(c)) continue;
    if (std::find(chain.begin(), chain.end(), c) != chain.end()) continue;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<NodeId> first_level(const LocalView& v, const SignBoard& self, MoveModel model) {
  std::vector<NodeId> out;
  if (model == MoveModel::PathBound) {
    if (self.next && v.in_region(*self.next)) out.push_back(*self.next);
    return out;
  }
  for (NodeId n : v.g->neighbours(v.n0))
    if (v.in_region(n)) out.push_back(n);
  return out;
}

// Level-wise expansion. With `stop_early` the expansion halts after the first
// level that yields a free (or deepest-level vacatable) node.
inline DepthFamily expand(const LocalView& v, const SignBoard& self, int p, MoveModel model, bool stop_early,
                          int* stop_level) {
  DepthFamily fam;
  fam.p = p;
  std::set<NodeId> G, N_O, vac;
  struct Frontier {
    std::vector<NodeId> chain;
    std::vector<NodeId> nodes;
  };
  std::vector<Frontier> frontier{{{v.n0}, first_level(v, self, model)}};
  for (int level = 0; level <= p - 1 && !frontier.empty(); ++level) {
    std::set<NodeId> found_free;
    std::vector<Frontier> next_frontier;
    for (const Frontier& f : frontier) {
      fam.levels.push_back({level, f.chain, f.nodes});
      for (NodeId n : f.nodes) {
        switch (cell_of(v, n)) {
          case Cell::Free: found_free.insert(n); break;
          case Cell::Parked: G.insert(n); break;
          case Cell::Busy: {
            std::vector<NodeId> chain = f.chain;
            chain.push_back(n);
            auto kids = children(v, n, chain, model);
            const bool surrounded = std::all_of(kids.begin(), kids.end(),
                                                [&](NodeId k) { return cell_of(v, k) == Cell::Parked; });
            if (surrounded) {
              N_O.insert(n);
              for (NodeId k : kids) G.insert(k);
              if (level < p - 1 && !kids.empty()) next_frontier.push_back({std::move(chain), std::move(kids)});
            } else if (level == p - 1) {
              vac.insert(n);
            } else {
              next_frontier.push_back({std::move(chain), std::move(kids)});
            }
            break;
          }
        }
      }
    }
    for (NodeId n : found_free) fam.F.push_back(n);
    const bool stop = !found_free.empty() || !vac.empty();
    if (stop && stop_level && *stop_level < 0) *stop_level = level;
    if (stop && stop_early) {
      fam.F.assign(found_free.begin(), found_free.end());
      break;
    }
    frontier = std::move(next_frontier);
  }
  std::sort(fam.F.begin(), fam.F.end());
  fam.F.erase(std::unique(fam.F.begin(), fam.F.end()), fam.F.end());
  fam.G.assign(G.begin(), G.end());
  fam.N_O.assign(N_O.begin(), N_O.end());
  fam.vacatable.assign(vac.begin(), vac.end());
  return fam;
}

}  // namespace detail

// Local deadlock test for `agent` from what it can see within R. Deadlocked
// means no free node is reachable through occupied, still travelling agents
// within p-1 levels of the current node, p = floor(R/d).
inline DeadlockReport detect_local_deadlock(const LayoutGraph& g, const WorldSnapshot& world, AgentId agent, double R,
                                            double d, MoveModel model = MoveModel::Graph) {
  const int p = depth_bound(R, d);
  const auto view = detail::local_view(g, world, agent, R);
  const SignBoard& self = world.find(agent)->board;
  DeadlockReport rep;
  if (model == MoveModel::PathBound && self.at_goal()) {
    rep.at_goal = true;
    rep.family.p = p;
    return rep;
  }
  rep.at_goal = self.at_goal();
  int stop = -1;
  rep.family = detail::expand(view, self, p, model, true, &stop);
  rep.F = rep.family.F;
  rep.depth = stop;
  rep.deadlocked = stop < 0;
  return rep;
}

// Safe paths for the livelock test: maximal simple paths from the current node
// of at most p-1 arcs that avoid G and N_O, in lexicographic order. Under the
// path-bound model the only candidate is the prefix of the agent's own path.
inline LivelockReport detect_local_livelock(const LayoutGraph& g, const WorldSnapshot& world, AgentId agent, double R,
                                            double d, MoveModel model = MoveModel::Graph) {
  const int p = depth_bound(R, d);
  const auto view = detail::local_view(g, world, agent, R);
  const SignBoard& self = world.find(agent)->board;
  LivelockReport rep;
  if (self.at_goal()) {
    rep.applicable = false;
    rep.family.p = p;
    return rep;
  }
  rep.family = detail::expand(view, self, p, model, false, nullptr);
  std::set<NodeId> blocked(rep.family.G.begin(), rep.family.G.end());
  blocked.insert(rep.family.N_O.begin(), rep.family.N_O.end());

  Path path{view.n0};
  auto extend = [&](auto&& self_fn) -> void {
    bool grew = false;
    if (static_cast<int>(path.size()) - 1 < p - 1) {
      const NodeId tip = path.back();
      std::vector<NodeId> onward = g.neighbours(tip);
      if (model == MoveModel::PathBound) {
        const std::size_t k = path.size();
        onward.clear();
        if (k < self.nodes.size()) onward.push_back(self.nodes[k]);
      }
      for (NodeId n : onward) {
        if (!view.in_region(n) || blocked.count(n)) continue;
        if (std::find(path.begin(), path.end(), n) != path.end()) continue;
        path.push_back(n);
        self_fn(self_fn);
        path.pop_back();
        grew = true;
      }
    }
    if (!grew && path.size() > 1) rep.safe_paths.push_back(path);
  };
  extend(extend);
  std::sort(rep.safe_paths.begin(), rep.safe_paths.end());
  rep.certified = std::any_of(rep.safe_paths.begin(), rep.safe_paths.end(),
                              [&](const Path& q) { return static_cast<int>(q.size()) - 1 == p - 1; });
  return rep;
}

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity{Severity::Error};
  std::string message;
};

struct Diagnostics {
  std::vector<Diagnostic> items;

  bool ok() const {
    return std::none_of(items.begin(), items.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
  }
  std::size_t errors() const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; }));
  }
  void error(std::string m) { items.push_back({Severity::Error, std::move(m)}); }
  void warn(std::string m) { items.push_back({Severity::Warning, std::move(m)}); }
};

// Checks the fleet against the layout: distinct starts and goals on declared
// nodes, no goal in a critical area, at most m_s - 1 agents; warns when an
// agent's period violates the sampling constraint.
inline Diagnostics validate_scenario_bounds(const LayoutGraph& g, std::span<const AgentSpec> agents) {
  Diagnostics out;
  std::map<NodeId, AgentId> starts, goals;
  for (const AgentSpec& a : agents) {
    const std::string who = "agent " + std::to_string(a.id);
    const bool start_ok = g.contains(a.start);
    const bool goal_ok = g.contains(a.goal);
    if (!start_ok) out.error(who + ": start " + std::to_string(a.start) + " is not a layout node");
    if (!goal_ok) out.error(who + ": goal " + std::to_string(a.goal) + " is not a layout node");
    if (start_ok) {
      if (auto [it, fresh] = starts.emplace(a.start, a.id); !fresh)
        out.error(who + ": start " + std::to_string(a.start) + " already used by agent " + std::to_string(it->second));
    }
    if (goal_ok) {
      if (auto [it, fresh] = goals.emplace(a.goal, a.id); !fresh)
        out.error(who + ": goal " + std::to_string(a.goal) + " already used by agent " + std::to_string(it->second));
      if (g.is_critical(a.goal)) out.error(who + ": goal in critical area (node " + std::to_string(a.goal) + ")");
    }
    if (g.spacing() > 0.0 && !check_sampling_constraint(a.max_speed, g.spacing(), a.period))
      out.warn(who + ": period " + fixed6(a.period) + " s exceeds the sampling bound " +
               fixed6(g.spacing() / (4.0 * a.max_speed)) + " s");
  }
  const std::size_t bound = max_agents(g);
  if (agents.size() > bound)
    out.error("agent count " + std::to_string(agents.size()) + " exceeds bound " + std::to_string(bound));
  return out;
}

// Bounds plus the scenario-level checks: explicit paths must be layout paths
// from the agent's start to its goal.
inline Diagnostics validate_scenario(const Scenario& sc) {
  Diagnostics out = validate_scenario_bounds(sc.layout, sc.agents);
  for (const auto& [id, path] : sc.paths) {
    const AgentSpec* a = sc.agent(id);
    const std::string who = "path of agent " + std::to_string(id);
    if (!a) {
      out.error(who + ": no such agent");
      continue;
    }
    if (!is_valid_path(sc.layout, path)) {
      out.error(who + ": not a connected layout path");
      continue;
    }
    if (path.front() != a->start || path.back() != a->goal) out.error(who + ": must run from start to goal");
  }
  for (const AgentSpec& a : sc.agents) {
    if (sc.paths.count(a.id) || !sc.layout.contains(a.start) || !sc.layout.contains(a.goal)) continue;
    if (!shortest_path(sc.layout, a.start, a.goal))
      out.error("agent " + std::to_string(a.id) + ": goal unreachable from start");
  }
  if (!(sc.sim.horizon > 0.0)) out.error("horizon must be positive");
  return out;
}

}  // namespace agv
