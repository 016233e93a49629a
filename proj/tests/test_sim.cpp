#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "agv/safety.hpp"
#include "agv/sim.hpp"

using namespace agv;

namespace {

Scenario load(const char* name) { return load_scenario_file(std::string(AGV_SCENARIO_DIR) + "/" + name); }

const char* kCorridor = R"(
[nodes]
1 0 0
2 1 0
3 2 0
4 3 0
5 4 0
6 5 0
[arcs]
1 2
2 3
3 4
4 5
5 6
[rooms]
c: 1 2 3 4 5 6
[agents]
1 1 2 6 1.0 0.1 0.2
2 2 1 5 1.0 0.1 0.2
[sim]
name = corridor
horizon = 30
)";

std::vector<const TraceRecord*> of_kind(const Trace& t, RecordKind k, std::optional<AgentId> who = std::nullopt) {
  std::vector<const TraceRecord*> out;
  for (const auto& r : t.records())
    if (r.kind == k && (!who || r.agent == *who)) out.push_back(&r);
  return out;
}

}  // namespace

TEST(Sim, SingleAgentArrivesAfterPathLengthOverSpeed) {
  Simulator sim(load("single_agent.scn"));
  sim.run();
  const auto rep = sim.report();
  ASSERT_TRUE(rep.all_arrived());
  const double phase = sim.agents()[0].phase;
  EXPECT_NEAR(*rep.agents[0].arrival - phase, 5.0, 0.1);
  EXPECT_EQ(rep.agents[0].competitions, 0);
  EXPECT_EQ(rep.exclusion_violations, 0u);
}

TEST(Sim, SameSeedSameTrace) {
  const Scenario sc = load("crossing.scn");
  EXPECT_EQ(run(sc, 3).str(), run(sc, 3).str());
  EXPECT_NE(run(sc, 3).str(), run(sc, 4).str());
}

TEST(Sim, WaitThenRequestThenMoveOnSuccessiveTicks) {
  const Trace t = run(parse_scenario(kCorridor), 1);
  const auto fsm = of_kind(t, RecordKind::Fsm, 2);
  bool seen = false;
  for (std::size_t i = 0; i + 2 < fsm.size(); ++i) {
    if (fsm[i]->fields[1] != "W") continue;
    if (fsm[i + 1]->fields[0] == "W" && fsm[i + 1]->fields[1] == "R" && fsm[i + 2]->fields[0] == "R" &&
        fsm[i + 2]->fields[1] == "M") {
      EXPECT_LT(fsm[i + 1]->time, fsm[i + 2]->time);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
  EXPECT_TRUE(check_transition_sequence(t).empty());
}

TEST(Sim, NodeEntryShiftsBoard) {
  const Trace t = run(load("single_agent.scn"), 1);
  const auto enters = of_kind(t, RecordKind::Enter, 1);
  ASSERT_EQ(enters.size(), 5u);
  EXPECT_EQ(enters[0]->fields[0], "2");
  // The board published on the entry tick has moved on.
  const SignBoard* after = nullptr;
  SignBoard b;
  for (const auto& r : t.records())
    if (r.kind == RecordKind::Board && r.time == enters[0]->time) {
      b = board_of(r);
      after = &b;
    }
  ASSERT_NE(after, nullptr);
  EXPECT_EQ(after->curr, 2);
  EXPECT_EQ(after->prev, 1);
  EXPECT_EQ(after->next, 3);
  EXPECT_EQ(after->timer, 0);
}

TEST(Sim, ParkedAgentStaysPut) {
  Scenario sc = parse_scenario(kCorridor);
  sc.agents[0].goal = 2;  // agent 1 starts at its goal
  SimOptions o;
  o.horizon = 5.0;
  Simulator sim(sc, o);
  sim.run();
  const auto& a1 = sim.agents()[0];
  EXPECT_EQ(a1.board.curr, 2);
  EXPECT_EQ(norm(a1.board.vel), 0.0);
  EXPECT_EQ(*a1.arrival, 0.0);
  for (const auto* r : of_kind(sim.trace(), RecordKind::Pose, 1)) EXPECT_EQ(pose_of(*r).x, 1.0);
}

TEST(Sim, FourAgentScenarioResolves) {
  for (unsigned long long seed = 1; seed <= 5; ++seed) {
    SimOptions o;
    o.seed = seed;
    Simulator sim(load("crossing.scn"), o);
    sim.run();
    const auto rep = sim.report();
    EXPECT_TRUE(rep.all_arrived()) << "seed " << seed;
    EXPECT_EQ(rep.exclusion_violations, 0u);
    EXPECT_EQ(rep.collision_violations, 0u);
    EXPECT_GE(rep.agents[0].replans, 1);
    EXPECT_GE(rep.agents[1].replans, 1);
    EXPECT_TRUE(check_transition_sequence(sim.trace()).empty());
  }
}

TEST(Sim, NoReplanningStalls) {
  Simulator sim(load("crossing_noreplan.scn"));
  sim.run();
  const auto rep = sim.report();
  for (const auto& a : rep.agents) EXPECT_FALSE(a.arrival.has_value()) << "agent " << a.id;
  EXPECT_TRUE(of_kind(sim.trace(), RecordKind::Replan).empty());
}

TEST(Sim, FollowerKeepsDistance) {
  Simulator sim(load("follower.scn"));
  sim.run();
  const auto rep = sim.report();
  EXPECT_TRUE(rep.all_arrived());
  EXPECT_EQ(rep.collision_violations, 0u);
  EXPECT_EQ(rep.exclusion_violations, 0u);
}

TEST(Sim, OnlineDetectionRecords) {
  SimOptions o;
  o.online_detection = true;
  Simulator sim(load("crossing.scn"), o);
  sim.run();
  EXPECT_FALSE(of_kind(sim.trace(), RecordKind::Detect).empty());
}

TEST(Sim, RejectsInvalidInputs) {
  EXPECT_THROW(Simulator(load("overfull.scn")), SimError);
  EXPECT_THROW(Simulator(load("door_goal.scn")), SimError);
  SimOptions o;
  o.horizon = 0.0;
  EXPECT_THROW(Simulator(load("single_agent.scn"), o), SimError);
}

TEST(Sim, HorizonCutsRun) {
  const Trace t = run(load("crossing.scn"), 1, 0.5);
  EXPECT_LE(last_time(t), 0.5 + 1e-12);
}

TEST(Sim, PlotCsvPerAgent) {
  const auto dir = std::filesystem::temp_directory_path() / "agv_plot_test";
  std::filesystem::remove_all(dir);
  write_plot_csv(run(load("crossing.scn"), 1), dir);
  for (int id = 1; id <= 4; ++id) {
    std::ifstream in(dir / ("agent_" + std::to_string(id) + ".csv"));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "time,x,y,state");
  }
  std::filesystem::remove_all(dir);
}
