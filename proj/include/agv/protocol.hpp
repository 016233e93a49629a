#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "agv/geometry.hpp"
#include "agv/layout.hpp"
#include "agv/resources.hpp"
#include "agv/signboard.hpp"

namespace agv {

struct ProtocolParams {
  int replan_threshold{10};  // ticks of t_rep tolerated before replanning
  bool replanning{true};
  int max_priority{1};  // reserved escalation value, above every configured priority
};

// Cooperation-manager state private to one agent.
struct ManagerState {
  FsmState fsm{FsmState::Req};
  int t_rep{0};
  int timer{0};  // mirror of the board's critical-wait Timer
};

enum class CompetitionBasis { Priority, IdTiebreak, Timer, Held };

inline std::string_view to_string(CompetitionBasis b) {
  switch (b) {
    case CompetitionBasis::Priority: return "priority";
    case CompetitionBasis::IdTiebreak: return "id";
    case CompetitionBasis::Timer: return "timer";
    case CompetitionBasis::Held: return "held";
  }
  return "?";
}

struct Competitor {
  AgentId id{};
  int priority{0};
  int timer{0};
};

struct CompetitionOutcome {
  AgentId winner{};
  CompetitionBasis basis{CompetitionBasis::Priority};
};

// True when (pa, a) beats (pb, b): higher priority, then smaller id.
inline bool outranks(int pa, AgentId a, int pb, AgentId b) { return pa != pb ? pa > pb : a < b; }

// Highest priority wins; equal maxima go to the smallest id.
inline CompetitionOutcome resolve_priority(std::span<const Competitor> competitors) {
  if (competitors.empty()) throw std::invalid_argument("resolve_priority: no competitors");
  const Competitor* best = &competitors[0];
  for (const Competitor& c : competitors.subspan(1))
    if (outranks(c.priority, c.id, best->priority, best->id)) best = &c;
  const bool tied = std::count_if(competitors.begin(), competitors.end(),
                                  [&](const Competitor& c) { return c.priority == best->priority; }) > 1;
  return {best->id, tied ? CompetitionBasis::IdTiebreak : CompetitionBasis::Priority};
}

// Largest Timer wins; ties fall back to priority, then id.
inline CompetitionOutcome resolve_timer(std::span<const Competitor> competitors) {
  if (competitors.empty()) throw std::invalid_argument("resolve_timer: no competitors");
  const Competitor* best = &competitors[0];
  for (const Competitor& c : competitors.subspan(1)) {
    if (c.timer != best->timer) {
      if (c.timer > best->timer) best = &c;
    } else if (outranks(c.priority, c.id, best->priority, best->id)) {
      best = &c;
    }
  }
  return {best->id, CompetitionBasis::Timer};
}

// Published priority: escalated to the reserved maximum while inside a critical area.
inline int effective_priority(int base, NodeId curr, const LayoutGraph& g, int max_priority) {
  return g.is_critical(curr) ? max_priority : base;
}

// Closed disc of radius d/2 around the node position.
inline bool node_area_contains(const Node& node, const Vec2& pose, double d) {
  return distance(node.position, pose) <= d / 2.0;
}

inline bool node_area_contains(const LayoutGraph& g, NodeId n, const Vec2& pose) {
  return node_area_contains(Node{n, g.position(n)}, pose, g.spacing());
}

// Which branch of the request logic produced the transition.
enum class RequestCase {
  AtGoal,
  GoalParkedAhead,   // next node held by an agent parked at its goal
  Occupied,          // next node held by an agent still travelling
  FrontalYield,      // blocked or beaten by a higher-ranked agent in a frontal encounter
  Won,
  Lost,
  CriticalFree,
  CriticalOccupied,
  CriticalPriorityWon,
  CriticalPriorityLost,
  CriticalTimerWon,
  CriticalTimerLost,
};

inline std::string_view to_string(RequestCase c) {
  switch (c) {
    case RequestCase::AtGoal: return "at-goal";
    case RequestCase::GoalParkedAhead: return "goal-parked-ahead";
    case RequestCase::Occupied: return "occupied";
    case RequestCase::FrontalYield: return "frontal-yield";
    case RequestCase::Won: return "won";
    case RequestCase::Lost: return "lost";
    case RequestCase::CriticalFree: return "critical-free";
    case RequestCase::CriticalOccupied: return "critical-occupied";
    case RequestCase::CriticalPriorityWon: return "critical-priority-won";
    case RequestCase::CriticalPriorityLost: return "critical-priority-lost";
    case RequestCase::CriticalTimerWon: return "critical-timer-won";
    case RequestCase::CriticalTimerLost: return "critical-timer-lost";
  }
  return "?";
}

struct Competition {
  NodeId node{};
  std::vector<Competitor> competitors;  // includes the requester
  CompetitionOutcome outcome;
};

struct RequestResult {
  FsmState next{FsmState::Req};
  ManagerState mgr;
  RequestCase why{RequestCase::AtGoal};
  std::optional<Competition> competition;
};

namespace detail {

inline std::vector<AgentPath> paths_of(const Lecture& lect, std::optional<AgentId> skip = std::nullopt) {
  std::vector<AgentPath> out;
  for (const BoardView& v : lect.boards)
    if (!skip || v.board.id != *skip) out.push_back({v.board.id, v.board.nodes});
  return out;
}

// Configuration of the owner of `board`, with sharing judged against `others`.
inline AgentConfiguration configuration_of(const SignBoard& board, std::span<const AgentPath> others) {
  const auto macros = macro_resources(board.id, board.nodes, others);
  return agent_configuration(board.nodes, macros);
}

// A higher-ranked agent shares the macro resource opened by our next node and
// meets us head-on: waiting cannot resolve the encounter.
inline bool loses_frontal_macro(const SignBoard& self, const Lecture& lect) {
  const auto others = paths_of(lect);
  const AgentConfiguration mine = configuration_of(self, others);
  if (!mine.macro) return false;
  const auto li = mine.sequence();
  for (AgentId j : mine.macro->sharers) {
    const BoardView* v = lect.find(j);
    if (!v || !outranks(v->board.pr, j, self.pr, self.id)) continue;
    auto others_j = paths_of(lect, j);
    others_j.push_back({self.id, self.nodes});
    const auto lj = configuration_of(v->board, others_j).sequence();
    if (classify_encounter(li, lj) == EncounterKind::Frontal) return true;
  }
  return false;
}

inline bool intersects(std::span<const NodeId> path, std::span<const NodeId> sorted_block) {
  return std::any_of(path.begin(), path.end(),
                     [&](NodeId n) { return std::binary_search(sorted_block.begin(), sorted_block.end(), n); });
}

}  // namespace detail

// One protocol step from the Req state: decides M, W or Rep for the next node.
inline RequestResult request_step(const SignBoard& self, const ManagerState& mgr, const Lecture& lect,
                                  const LayoutGraph& g, const ProtocolParams& params) {
  RequestResult r;
  r.mgr = mgr;
  if (!self.next) {
    r.next = FsmState::Req;
    r.why = RequestCase::AtGoal;
    r.mgr.fsm = r.next;
    return r;
  }
  const NodeId want = *self.next;
  auto finish = [&](FsmState s, RequestCase why) {
    r.next = s;
    r.why = why;
    r.mgr.fsm = s;
    if (s == FsmState::M || s == FsmState::Rep) r.mgr.t_rep = 0;
    if (s == FsmState::M) r.mgr.timer = 0;
    return r;
  };

  const std::vector<NodeId> block = g.critical_block(want);
  const bool critical = !block.empty() && !std::binary_search(block.begin(), block.end(), self.curr);

  if (!critical) {
    for (const BoardView& v : lect.boards) {
      if (v.board.curr != want) continue;
      if (v.board.at_goal()) {
        if (params.replanning) return finish(FsmState::Rep, RequestCase::GoalParkedAhead);
        ++r.mgr.t_rep;
        return finish(FsmState::W, RequestCase::GoalParkedAhead);
      }
      const NodeId li[] = {self.curr, want};
      std::vector<NodeId> lj{v.board.curr};
      if (v.board.next) lj.push_back(*v.board.next);
      const bool frontal = classify_encounter(li, lj) == EncounterKind::Frontal;
      if (frontal && params.replanning && outranks(v.board.pr, v.board.id, self.pr, self.id))
        return finish(FsmState::Rep, RequestCase::FrontalYield);
      ++r.mgr.t_rep;
      return finish(FsmState::W, RequestCase::Occupied);
    }

    Competition comp;
    comp.node = want;
    comp.competitors.push_back({self.id, self.pr, self.timer});
    std::optional<AgentId> holder;
    for (const BoardView& v : lect.boards) {
      if (v.board.next != want) continue;
      comp.competitors.push_back({v.board.id, v.board.pr, v.board.timer});
      if (v.board.status == FsmState::M && !holder) holder = v.board.id;
    }
    comp.outcome = holder ? CompetitionOutcome{*holder, CompetitionBasis::Held} : resolve_priority(comp.competitors);
    const bool contested = comp.competitors.size() > 1;
    if (contested) r.competition = comp;
    if (comp.outcome.winner == self.id) return finish(FsmState::M, RequestCase::Won);
    if (params.replanning && detail::loses_frontal_macro(self, lect))
      return finish(FsmState::Rep, RequestCase::FrontalYield);
    ++r.mgr.t_rep;
    return finish(FsmState::W, RequestCase::Lost);
  }

  std::vector<const BoardView*> sharers;
  for (const BoardView& v : lect.boards)
    if (detail::intersects(v.board.nodes, block)) sharers.push_back(&v);
  if (sharers.empty()) return finish(FsmState::M, RequestCase::CriticalFree);

  for (const BoardView* v : sharers) {
    const bool inside = std::binary_search(block.begin(), block.end(), v->board.curr);
    const bool entering = v->board.status == FsmState::M && v->board.next &&
                          std::binary_search(block.begin(), block.end(), *v->board.next);
    if (inside || entering) {
      // The occupant needs our node to get out: waiting would block it for good.
      if (params.replanning && v->board.next == self.curr && outranks(v->board.pr, v->board.id, self.pr, self.id))
        return finish(FsmState::Rep, RequestCase::FrontalYield);
      ++r.mgr.timer;
      return finish(FsmState::W, RequestCase::CriticalOccupied);
    }
  }

  Competition comp;
  comp.node = want;
  comp.competitors.push_back({self.id, self.pr, self.timer});
  for (const BoardView* v : sharers) comp.competitors.push_back({v->board.id, v->board.pr, v->board.timer});
  const bool timers_off = std::all_of(comp.competitors.begin(), comp.competitors.end(),
                                      [](const Competitor& c) { return c.timer == 0; });
  comp.outcome = timers_off ? resolve_priority(comp.competitors) : resolve_timer(comp.competitors);
  r.competition = comp;
  if (comp.outcome.winner == self.id)
    return finish(FsmState::M, timers_off ? RequestCase::CriticalPriorityWon : RequestCase::CriticalTimerWon);
  ++r.mgr.timer;
  return finish(FsmState::W, timers_off ? RequestCase::CriticalPriorityLost : RequestCase::CriticalTimerLost);
}

// From W: replan once t_rep exceeds the threshold, otherwise request again.
inline FsmState wait_step(const ManagerState& mgr, const ProtocolParams& params) {
  if (params.replanning && mgr.t_rep > params.replan_threshold) return FsmState::Rep;
  return FsmState::Req;
}

// From M: back to Req exactly when the pose has entered the next node's area.
inline FsmState move_step(const Vec2& pose, const SignBoard& board, const LayoutGraph& g) {
  if (board.next && node_area_contains(g, *board.next, pose)) return FsmState::Req;
  return FsmState::M;
}

// Node positions around the agent; prev is absent at the start node.
struct SegmentGeometry {
  std::optional<Vec2> prev;
  Vec2 curr{};
  std::optional<Vec2> next;
};

namespace detail {

inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 == 0.0) return distance(p, a);
  const Vec2 ap = p - a;
  const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

}  // namespace detail

// Speed of the first agent physically inside `won`, if any (slowest when several).
inline std::optional<double> occupier_speed(const Lecture& lect, const Node& won, double d) {
  std::optional<double> speed;
  for (const BoardView& v : lect.boards) {
    if (!node_area_contains(won, v.pose, d)) continue;
    const double s = norm(v.board.vel);
    speed = speed ? std::min(*speed, s) : s;
  }
  return speed;
}

// Velocity law: zero in W and Rep, previous velocity in Req, and in M the
// maximum speed (or the speed of whoever still occupies the won node) along
// the segment the pose lies on.
inline Vec2 speed_update(FsmState s, const Vec2& pose, const SegmentGeometry& geo, const Lecture& lect,
                         double u_max, const Vec2& previous, double d, std::optional<NodeId> won = std::nullopt) {
  switch (s) {
    case FsmState::W:
    case FsmState::Rep: return {};
    case FsmState::Req: return previous;
    case FsmState::M: break;
  }
  if (!geo.next) return {};
  double speed = u_max;
  if (won) {
    if (auto occ = occupier_speed(lect, Node{*won, *geo.next}, d)) speed = std::min(speed, *occ);
  }
  Vec2 dir = direction(geo.curr, *geo.next);
  if (geo.prev) {
    const double on_approach = detail::segment_distance(pose, *geo.prev, geo.curr);
    const double on_departure = detail::segment_distance(pose, geo.curr, *geo.next);
    if (on_approach < on_departure) dir = direction(*geo.prev, geo.curr);
  } else if (distance(pose, geo.curr) > 1e-12 && detail::segment_distance(pose, geo.curr, *geo.next) > 1e-9) {
    dir = direction(pose, geo.curr);
  }
  return speed * dir;
}

// Arc weights used for replanning: default unit weights, increased along the
// remaining path of every in-range agent from each neighbour of `curr` it
// contains. On a sub-path of L arcs the k-th arc from the neighbour gains L-k+1.
inline WeightedAdjacency replan_weights(const LayoutGraph& g, NodeId curr, const Lecture& lect) {
  WeightedAdjacency w = WeightedAdjacency::defaults(g);
  for (NodeId n : g.neighbours(curr)) {
    for (const BoardView& v : lect.boards) {
      const auto& p = v.board.nodes;
      const auto it = std::find(p.begin(), p.end(), n);
      if (it == p.end()) continue;
      const auto start = static_cast<std::size_t>(it - p.begin());
      const std::size_t arcs = p.size() - 1 - start;
      for (std::size_t k = 1; k <= arcs; ++k) {
        const NodeId a = p[start + k - 1];
        const NodeId b = p[start + k];
        if (w.has_arc(a, b)) w.increase(a, b, static_cast<double>(arcs - k + 1));
      }
    }
  }
  return w;
}

// New path from `curr` to `goal`. Neighbours of `curr` are split into occupied
// (some board's current node, plus the contested node if given) and free; the
// cheapest path through a free neighbour wins, through an occupied one only if
// none is free. The path may come back through `curr` after the first step,
// which lets a blocked agent step aside. The contested node and the nodes of
// visible agents parked at their goals are avoided, each restriction dropped
// in turn when it leaves the goal unreachable. Empty optional when the goal is
// unreachable.
inline std::optional<Path> replan(const LayoutGraph& g, NodeId curr, NodeId goal, const Lecture& lect,
                                  std::optional<NodeId> contested = std::nullopt) {
  if (curr == goal) return Path{curr};
  std::set<NodeId> occupied;
  std::vector<NodeId> parked;
  for (const BoardView& v : lect.boards) {
    occupied.insert(v.board.curr);
    if (v.board.at_goal() && v.board.curr != goal) parked.push_back(v.board.curr);
  }
  if (contested) occupied.insert(*contested);
  std::vector<NodeId> free_nb, occ_nb;
  for (NodeId n : g.neighbours(curr)) (occupied.count(n) ? occ_nb : free_nb).push_back(n);

  const WeightedAdjacency w = replan_weights(g, curr, lect);
  auto best_through = [&](const std::vector<NodeId>& candidates, std::span<const NodeId> excluded) {
    std::optional<Path> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (NodeId n : candidates) {
      if (std::find(excluded.begin(), excluded.end(), n) != excluded.end()) continue;
      Path p{curr};
      if (n == goal) {
        p.push_back(goal);
      } else {
        auto tail = shortest_path(g, w, n, goal, excluded);
        if (!tail) continue;
        p.insert(p.end(), tail->begin(), tail->end());
      }
      const double cost = path_cost(w, p);
      const bool better = !best || cost < best_cost - 1e-9 || (detail::same_cost(cost, best_cost) && p < *best);
      if (better) {
        best = std::move(p);
        best_cost = cost;
      }
    }
    return best;
  };
  auto search = [&](std::span<const NodeId> excluded) -> std::optional<Path> {
    if (auto p = best_through(free_nb, excluded)) return p;
    return best_through(occ_nb, excluded);
  };
  std::vector<NodeId> avoid = parked;
  if (contested) avoid.push_back(*contested);
  if (auto p = search(avoid)) return p;
  if (auto p = search(parked)) return p;
  return search({});
}

// Applies the post-transition state to the owner's record and republishes it.
// `node_entry` performs the shift on entering the next node.
inline SignBoard signboard_commit(FsmState s, AgentState& st, const ManagerState& mgr, const Vec2& velocity,
                                  const std::optional<Path>& replanned = std::nullopt, bool node_entry = false) {
  if (node_entry) {
    if (st.path.size() < 2) throw std::logic_error("node entry without a next node");
    st.prev = st.path.front();
    st.path.erase(st.path.begin());
    st.timer = 0;
  }
  st.status = s;
  switch (s) {
    case FsmState::Req:
      st.velocity = velocity;
      break;
    case FsmState::W:
      st.velocity = {};
      st.timer = mgr.timer;
      break;
    case FsmState::Rep:
      if (!replanned) throw std::invalid_argument("signboard_commit: Rep requires a replanned path");
      st.velocity = {};
      st.path = *replanned;
      break;
    case FsmState::M:
      st.velocity = velocity;
      st.timer = 0;
      break;
  }
  return publish(st);
}

}  // namespace agv
