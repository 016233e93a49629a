#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agv/geometry.hpp"
#include "agv/layout.hpp"
#include "agv/resources.hpp"

namespace agv {

enum class FsmState { Req, W, M, Rep };

inline std::string_view to_string(FsmState s) {
  switch (s) {
    case FsmState::Req: return "R";
    case FsmState::W: return "W";
    case FsmState::M: return "M";
    case FsmState::Rep: return "Rep";
  }
  return "?";
}

inline std::optional<FsmState> parse_fsm_state(std::string_view s) {
  if (s == "R" || s == "Req") return FsmState::Req;
  if (s == "W") return FsmState::W;
  if (s == "M") return FsmState::M;
  if (s == "Rep") return FsmState::Rep;
  return std::nullopt;
}

// Published record of one agent, readable by every agent in range.
struct SignBoard {
  AgentId id{};
  int pr{0};
  FsmState status{FsmState::Req};
  Vec2 vel{};
  std::vector<NodeId> nodes;  // remaining path; nodes[0] is the current node
  NodeId curr{};
  std::optional<NodeId> next;
  std::optional<NodeId> prev;
  int timer{0};

  NodeId goal() const { return nodes.empty() ? curr : nodes.back(); }
  bool at_goal() const { return nodes.size() <= 1; }

  friend bool operator==(const SignBoard&, const SignBoard&) = default;
};

// Owner-side state from which the board is published.
struct AgentState {
  AgentId id{};
  int priority{0};  // effective (possibly escalated) priority
  FsmState status{FsmState::Req};
  Vec2 velocity{};
  Path path;  // remaining path, path[0] = current node
  std::optional<NodeId> prev;
  int timer{0};
};

inline SignBoard publish(const AgentState& s) {
  if (s.path.empty()) throw std::invalid_argument("agent " + std::to_string(s.id) + " has an empty path");
  SignBoard b;
  b.id = s.id;
  b.pr = s.priority;
  b.status = s.status;
  b.vel = s.velocity;
  b.nodes = s.path;
  b.curr = s.path[0];
  if (s.path.size() > 1) b.next = s.path[1];
  b.prev = s.prev;
  b.timer = s.timer;
  return b;
}

// One board as seen by a reader, together with its owner's observed pose.
struct BoardView {
  SignBoard board;
  Vec2 pose{};
};

// Boards of every agent within communication range at one read instant.
struct Lecture {
  AgentId reader{};
  double time{0.0};
  std::vector<BoardView> boards;  // ascending agent id, reader excluded

  const BoardView* find(AgentId id) const {
    for (const BoardView& v : boards)
      if (v.board.id == id) return &v;
    return nullptr;
  }
};

// Every agent's latest published board and current pose.
struct WorldSnapshot {
  double time{0.0};
  std::vector<BoardView> agents;  // ascending agent id

  const BoardView* find(AgentId id) const {
    for (const BoardView& v : agents)
      if (v.board.id == id) return &v;
    return nullptr;
  }
};

class UnknownAgent : public std::invalid_argument {
 public:
  explicit UnknownAgent(AgentId id) : std::invalid_argument("unknown agent " + std::to_string(id)) {}
};

// Copies the boards of all agents strictly closer than `radius` to the reader.
inline Lecture read_neighbours(const WorldSnapshot& world, AgentId reader, double radius) {
  const BoardView* self = world.find(reader);
  if (!self) throw UnknownAgent(reader);
  Lecture lect;
  lect.reader = reader;
  lect.time = world.time;
  for (const BoardView& v : world.agents) {
    if (v.board.id == reader) continue;
    if (distance(v.pose, self->pose) < radius) lect.boards.push_back(v);
  }
  std::sort(lect.boards.begin(), lect.boards.end(),
            [](const BoardView& a, const BoardView& b) { return a.board.id < b.board.id; });
  return lect;
}

}  // namespace agv
