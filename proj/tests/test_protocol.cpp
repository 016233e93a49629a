#include <gtest/gtest.h>

#include "agv/protocol.hpp"
#include "agv/scenario.hpp"
#include "oracles.hpp"

using namespace agv;

namespace {

BoardView board(AgentId id, int pr, Path path, const LayoutGraph& g, FsmState st = FsmState::Req, int timer = 0) {
  AgentState s;
  s.id = id;
  s.priority = pr;
  s.status = st;
  s.path = std::move(path);
  s.timer = timer;
  return {publish(s), g.position(s.path.front())};
}

LayoutGraph grid3() {
  // 1 2 3 / 4 5 6 / 7 8 9, ids row-major, unit spacing
  std::vector<Node> nodes;
  for (int i = 0; i < 9; ++i) nodes.push_back({i + 1, {double(i % 3), double(i / 3)}});
  std::vector<Arc> arcs;
  for (int i = 0; i < 9; ++i) {
    if (i % 3 < 2) arcs.push_back({i + 1, i + 2});
    if (i < 6) arcs.push_back({i + 1, i + 4});
  }
  return LayoutGraph::build(nodes, arcs, {{"r", {1, 2, 3, 4, 5, 6, 7, 8, 9}}}, {});
}

LayoutGraph door_line() {
  return LayoutGraph::build({{1, {0, 0}}, {2, {1, 0}}, {3, {2, 0}}}, {{1, 2}, {2, 3}}, {{"a", {1}}, {"b", {3}}},
                            {{"door", {2}}});
}

Scenario crossing() { return load_scenario_file(std::string(AGV_SCENARIO_DIR) + "/crossing.scn"); }

}  // namespace

TEST(Priority, HigherWinsThenSmallerId) {
  const Competitor a[] = {{1, 1, 0}, {4, 4, 0}};
  EXPECT_EQ(resolve_priority(a).winner, 4);
  EXPECT_EQ(resolve_priority(a).basis, CompetitionBasis::Priority);
  const Competitor b[] = {{2, 5, 0}, {7, 5, 0}};
  EXPECT_EQ(resolve_priority(b).winner, 2);
  EXPECT_EQ(resolve_priority(b).basis, CompetitionBasis::IdTiebreak);
  const Competitor c[] = {{9, 3, 0}};
  EXPECT_EQ(resolve_priority(c).winner, 9);
  EXPECT_THROW(resolve_priority(std::span<const Competitor>{}), std::invalid_argument);
}

TEST(Priority, EscalatedInsideCriticalArea) {
  const auto g = door_line();
  EXPECT_EQ(effective_priority(1, 2, g, 5), 5);
  EXPECT_EQ(effective_priority(1, 1, g, 5), 1);
}

TEST(Request, CrossroadHigherPriorityMovesLowerWaits) {
  const auto sc = crossing();
  const auto& g = sc.layout;
  const BoardView a1 = board(1, 1, {55, 56, 57}, g), a2 = board(2, 2, {66, 56, 46}, g),
                  a3 = board(3, 3, {57, 56, 55}, g), a4 = board(4, 4, {46, 56, 66}, g);
  ProtocolParams params;
  params.max_priority = 5;
  Lecture for3{3, 0, {a1, a2, a4}};
  Lecture for4{4, 0, {a1, a2, a3}};
  const auto r3 = request_step(a3.board, {}, for3, g, params);
  const auto r4 = request_step(a4.board, {}, for4, g, params);
  EXPECT_EQ(r4.next, FsmState::M);
  EXPECT_EQ(r3.next, FsmState::W);
  EXPECT_EQ(r3.why, RequestCase::Lost);
  ASSERT_TRUE(r3.competition.has_value());
  EXPECT_EQ(r3.competition->outcome.winner, 4);
  EXPECT_EQ(r3.mgr.t_rep, 1);
}

TEST(Request, FrontalLoserReplans) {
  const auto sc = crossing();
  const auto& g = sc.layout;
  const BoardView a1 = board(1, 1, {55, 56, 57}, g), a3 = board(3, 3, {57, 56, 55}, g);
  ProtocolParams params;
  params.max_priority = 4;
  const auto r1 = request_step(a1.board, {}, Lecture{1, 0, {a3}}, g, params);
  EXPECT_EQ(r1.next, FsmState::Rep);
  EXPECT_EQ(r1.why, RequestCase::FrontalYield);
}

TEST(Request, ParkedOccupantTriggersReplan) {
  const auto g = grid3();
  const BoardView parked = board(2, 1, {2}, g);
  const BoardView me = board(1, 1, {1, 2, 3}, g);
  ProtocolParams params;
  const auto r = request_step(me.board, {}, Lecture{1, 0, {parked}}, g, params);
  EXPECT_EQ(r.next, FsmState::Rep);
  EXPECT_EQ(r.why, RequestCase::GoalParkedAhead);
}

TEST(Request, TravellingOccupantMeansWait) {
  const auto g = grid3();
  const BoardView occ = board(2, 1, {2, 3}, g);
  const BoardView me = board(1, 1, {1, 2, 3}, g);
  const auto r = request_step(me.board, {}, Lecture{1, 0, {occ}}, g, ProtocolParams{});
  EXPECT_EQ(r.next, FsmState::W);
  EXPECT_EQ(r.why, RequestCase::Occupied);
}

TEST(Request, FreeUncontestedNodeIsWon) {
  const auto g = grid3();
  const auto r = request_step(board(1, 1, {1, 2, 3}, g).board, {}, Lecture{}, g, ProtocolParams{});
  EXPECT_EQ(r.next, FsmState::M);
  EXPECT_FALSE(r.competition.has_value());
}

TEST(Request, MovingHolderKeepsItsNode) {
  const auto g = grid3();
  const BoardView holder = board(4, 1, {3, 2, 1}, g, FsmState::M);
  const BoardView me = board(1, 9, {5, 2, 1}, g);
  const auto r = request_step(me.board, {}, Lecture{1, 0, {holder}}, g, ProtocolParams{});
  EXPECT_EQ(r.next, FsmState::W);
  ASSERT_TRUE(r.competition.has_value());
  EXPECT_EQ(r.competition->outcome.basis, CompetitionBasis::Held);
}

TEST(Request, CriticalUnsharedOrOccupied) {
  const auto g = door_line();
  const BoardView me = board(1, 1, {1, 2, 3}, g);
  EXPECT_EQ(request_step(me.board, {}, Lecture{}, g, {}).why, RequestCase::CriticalFree);
  const BoardView inside = board(2, 9, {2, 1}, g);
  ProtocolParams params;
  params.replanning = false;
  const auto r = request_step(me.board, {}, Lecture{1, 0, {inside}}, g, params);
  EXPECT_EQ(r.next, FsmState::W);
  EXPECT_EQ(r.why, RequestCase::CriticalOccupied);
  EXPECT_EQ(r.mgr.timer, 1);
}

TEST(Request, CriticalTimerCompetition) {
  const auto g = door_line();
  const BoardView a = board(1, 1, {1, 2, 3}, g, FsmState::W, 5);
  const BoardView b = board(2, 2, {3, 2, 1}, g, FsmState::W, 3);
  ProtocolParams params;
  params.max_priority = 3;
  const auto ra = request_step(a.board, ManagerState{FsmState::Req, 0, 5}, Lecture{1, 0, {b}}, g, params);
  const auto rb = request_step(b.board, ManagerState{FsmState::Req, 0, 3}, Lecture{2, 0, {a}}, g, params);
  EXPECT_EQ(ra.next, FsmState::M);
  EXPECT_EQ(ra.why, RequestCase::CriticalTimerWon);
  EXPECT_EQ(ra.mgr.timer, 0);
  EXPECT_EQ(rb.next, FsmState::W);
  EXPECT_EQ(rb.why, RequestCase::CriticalTimerLost);
  EXPECT_EQ(rb.mgr.timer, 4);
}

TEST(Request, CriticalPriorityWhenTimersOff) {
  const auto g = door_line();
  const BoardView a = board(1, 1, {1, 2, 3}, g);
  const BoardView b = board(2, 2, {3, 2, 1}, g);
  const auto ra = request_step(a.board, {}, Lecture{1, 0, {b}}, g, {});
  EXPECT_EQ(ra.why, RequestCase::CriticalPriorityLost);
  EXPECT_EQ(ra.mgr.timer, 1);
  const auto rb = request_step(b.board, {}, Lecture{2, 0, {a}}, g, {});
  EXPECT_EQ(rb.why, RequestCase::CriticalPriorityWon);
}

TEST(Wait, ThresholdIsStrict) {
  ProtocolParams p;
  p.replan_threshold = 10;
  EXPECT_EQ(wait_step({FsmState::W, 11, 0}, p), FsmState::Rep);
  EXPECT_EQ(wait_step({FsmState::W, 10, 0}, p), FsmState::Req);
  EXPECT_EQ(wait_step({FsmState::W, 0, 0}, p), FsmState::Req);
  p.replanning = false;
  EXPECT_EQ(wait_step({FsmState::W, 1000, 0}, p), FsmState::Req);
}

TEST(Move, EntryAtAreaBoundary) {
  const auto g = grid3();
  const SignBoard b = board(1, 1, {1, 2}, g, FsmState::M).board;
  EXPECT_EQ(move_step({0.5, 0}, b, g), FsmState::Req);
  EXPECT_EQ(move_step({0.4, 0}, b, g), FsmState::M);
}

TEST(NodeArea, ClosedDisc) {
  const Node n{1, {0, 0}};
  EXPECT_TRUE(node_area_contains(n, {0, 0}, 1.0));
  EXPECT_TRUE(node_area_contains(n, {0.5, 0}, 1.0));
  EXPECT_FALSE(node_area_contains(n, {1.0, 0}, 1.0));
}

TEST(Speed, StateLaw) {
  const SegmentGeometry geo{std::nullopt, {0, 0}, Vec2{1, 0}};
  EXPECT_EQ(speed_update(FsmState::W, {0, 0}, geo, {}, 1.0, {1, 0}, 1.0).x, 0.0);
  EXPECT_EQ(speed_update(FsmState::Rep, {0, 0}, geo, {}, 1.0, {1, 0}, 1.0).x, 0.0);
  const Vec2 kept = speed_update(FsmState::Req, {0, 0}, geo, {}, 1.0, {0.3, 0.1}, 1.0);
  EXPECT_EQ(kept.x, 0.3);
  EXPECT_EQ(kept.y, 0.1);
  const Vec2 free = speed_update(FsmState::M, {0, 0}, geo, {}, 1.0, {}, 1.0, NodeId{2});
  EXPECT_NEAR(free.x, 1.0, 1e-12);
  EXPECT_NEAR(free.y, 0.0, 1e-12);
}

TEST(Speed, MatchesOccupierOfWonNode) {
  const SegmentGeometry geo{std::nullopt, {0, 0}, Vec2{1, 0}};
  AgentState leader;
  leader.id = 2;
  leader.path = {2, 3};
  leader.velocity = {0.4, 0};
  Lecture lect;
  lect.boards.push_back({publish(leader), {1.3, 0}});
  const Vec2 v = speed_update(FsmState::M, {0, 0}, geo, lect, 1.0, {}, 1.0, NodeId{2});
  EXPECT_NEAR(norm(v), 0.4, 1e-12);
  EXPECT_NEAR(v.y, 0.0, 1e-12);
  lect.boards[0].pose = {1.6, 0};  // left the won node's area
  EXPECT_NEAR(norm(speed_update(FsmState::M, {0, 0}, geo, lect, 1.0, {}, 1.0, NodeId{2})), 1.0, 1e-12);
}

TEST(Speed, DirectionFollowsApproachSegment) {
  const SegmentGeometry geo{Vec2{0, 0}, {1, 0}, Vec2{1, 1}};
  const Vec2 before = speed_update(FsmState::M, {0.7, 0}, geo, {}, 1.0, {}, 1.0);
  EXPECT_NEAR(before.x, 1.0, 1e-12);
  const Vec2 after = speed_update(FsmState::M, {1, 0.2}, geo, {}, 1.0, {}, 1.0);
  EXPECT_NEAR(after.y, 1.0, 1e-12);
}

TEST(ReplanWeights, LinearIncrementsAlongSharedPath) {
  const auto g = grid3();
  const BoardView other = board(2, 1, {2, 3, 6, 9}, g);
  const auto w = replan_weights(g, 1, Lecture{1, 0, {other}});
  EXPECT_DOUBLE_EQ(w.weight(2, 3), 1.0 + 3.0);
  EXPECT_DOUBLE_EQ(w.weight(3, 6), 1.0 + 2.0);
  EXPECT_DOUBLE_EQ(w.weight(6, 9), 1.0 + 1.0);
  EXPECT_DOUBLE_EQ(w.weight(1, 4), 1.0);
}

TEST(Replan, LoneAgentGetsDefaultShortestPath) {
  const auto g = grid3();
  EXPECT_EQ(*replan(g, 1, 9, Lecture{}), *shortest_path(g, 1, 9));
  EXPECT_EQ(*replan(g, 4, 4, Lecture{}), (Path{4}));
}

TEST(Replan, PrefersFreeNeighbourAtEqualBaseCost) {
  const auto g = grid3();
  const BoardView occ = board(2, 1, {2, 3}, g);
  const Lecture lect{1, 0, {occ}};
  const auto got = replan(g, 1, 5, lect);
  ASSERT_TRUE(got.has_value());
  // Hand-rolled weights: unit arcs, arc (2,3) raised by 1 for the occupant's path.
  oracle::Graph og;
  for (const auto& n : g.nodes())
    for (NodeId k : g.neighbours(n.id)) og.add(n.id, k, 1.0);
  og.add(2, 3, 2.0);
  double via_free = 1e300;
  for (const auto& p : oracle::simple_paths(og, 1, 5))
    if (p[1] == 4) via_free = std::min(via_free, oracle::cost(og, p));
  EXPECT_EQ((*got)[1], 4);
  EXPECT_DOUBLE_EQ(path_cost(replan_weights(g, 1, lect), *got), via_free);
}

TEST(Replan, FrontalBlockAtSideRoomLayout) {
  const auto sc = crossing();
  const auto& g = sc.layout;
  const BoardView a1 = board(1, 1, {55, 56, 57}, g), a3 = board(3, 3, {57, 56, 55}, g),
                  a4 = board(4, 5, {56, 66}, g, FsmState::M);
  const auto p = replan(g, 66, 46, Lecture{2, 0, {a1, a3, a4}}, NodeId{56});
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(*p, (Path{66, 65, 55, 45, 46}));
}

TEST(Replan, UnreachableGoal) {
  const auto g = LayoutGraph::build({{1, {0, 0}}, {2, {1, 0}}, {3, {5, 0}}}, {{1, 2}}, {{"r", {1, 2, 3}}}, {});
  EXPECT_FALSE(replan(g, 1, 3, Lecture{}).has_value());
}

TEST(Commit, ReplanNodeEntryAndMove) {
  AgentState s;
  s.id = 2;
  s.path = {66, 56, 46};
  const auto rep = signboard_commit(FsmState::Rep, s, {}, {}, Path{66, 65, 55, 45, 46});
  EXPECT_EQ(rep.nodes, (std::vector<NodeId>{66, 65, 55, 45, 46}));
  EXPECT_EQ(rep.next, 65);
  EXPECT_EQ(rep.status, FsmState::Rep);
  EXPECT_THROW(signboard_commit(FsmState::Rep, s, {}, {}), std::invalid_argument);

  AgentState t;
  t.id = 1;
  t.path = {55, 56, 57};
  t.timer = 6;
  const auto moved = signboard_commit(FsmState::M, t, {}, {1, 0});
  EXPECT_EQ(moved.timer, 0);
  const auto entered = signboard_commit(FsmState::Req, t, {}, {1, 0}, std::nullopt, true);
  EXPECT_EQ(entered.prev, 55);
  EXPECT_EQ(entered.curr, 56);
  EXPECT_EQ(entered.next, 57);
}
