#include <gtest/gtest.h>

#include "agv/trace.hpp"

using namespace agv;

TEST(Trace, FixedSixDecimals) {
  EXPECT_EQ(fixed6(1.5), "1.500000");
  EXPECT_EQ(fixed6(-0.0), "0.000000");
  EXPECT_EQ(fixed6(-1e-9), "0.000000");
  EXPECT_EQ(fixed6(-2.25), "-2.250000");
}

TEST(Trace, IdLists) {
  EXPECT_EQ(join_ids({66, 65, 55}), "66,65,55");
  EXPECT_EQ(split_ids("66,65,55"), (std::vector<NodeId>{66, 65, 55}));
  EXPECT_TRUE(split_ids("-").empty());
  EXPECT_THROW(split_ids("1,x"), TraceError);
}

TEST(Trace, BoardRoundTrip) {
  AgentState s;
  s.id = 3;
  s.priority = 5;
  s.status = FsmState::M;
  s.velocity = {0.5, -0.25};
  s.path = {57, 56, 55};
  s.prev = 67;
  s.timer = 2;
  const SignBoard b = publish(s);
  Trace t;
  t.add(1.25, 3, RecordKind::Board, board_fields(b, {7, 5}));
  const Trace back = parse_trace(t.str());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(board_of(back.records()[0]), b);
  EXPECT_EQ(pose_of(back.records()[0]).x, 7.0);
  EXPECT_EQ(back.str(), t.str());
}

TEST(Trace, RejectsBackwardsTime) {
  Trace t;
  t.add(1.0, 1, RecordKind::Pose, {"0", "0"});
  EXPECT_THROW(t.add(0.5, 1, RecordKind::Pose, {"0", "0"}), TraceError);
  EXPECT_THROW(parse_trace("1.0\t1\tpose\t0\t0\n0.5\t1\tpose\t0\t0\n"), TraceError);
}

TEST(Trace, MalformedLines) {
  EXPECT_THROW(parse_trace("1.0\t1\n"), TraceError);
  EXPECT_THROW(parse_trace("x\t1\tpose\t0\t0\n"), TraceError);
  EXPECT_THROW(parse_trace("1.0\t1\tteleport\t0\t0\n"), TraceError);
  EXPECT_THROW(parse_trace("1.0\t1\tpose\t0\n"), TraceError);
  EXPECT_TRUE(parse_trace("\n\n").empty());
}

TEST(Trace, SnapshotTakesLatestBoardPerAgent) {
  const std::string text =
      "0.000000\t1\tboard\t1\tR\t0.000000\t0.000000\t1\t2\t-\t0\t1,2\t0.000000\t0.000000\n"
      "0.000000\t2\tboard\t1\tR\t0.000000\t0.000000\t5\t-\t-\t0\t5\t4.000000\t0.000000\n"
      "1.000000\t1\tboard\t1\tM\t1.000000\t0.000000\t1\t2\t-\t0\t1,2\t0.200000\t0.000000\n"
      "2.000000\t1\tboard\t1\tR\t1.000000\t0.000000\t2\t-\t1\t0\t2\t1.000000\t0.000000\n";
  const Trace t = parse_trace(text);
  const auto w = snapshot_at(t, 1.5);
  ASSERT_EQ(w.agents.size(), 2u);
  EXPECT_EQ(w.find(1)->board.status, FsmState::M);
  EXPECT_EQ(w.find(1)->pose.x, 0.2);
  EXPECT_EQ(snapshot_at(t, 2.0).find(1)->board.curr, 2);
  EXPECT_DOUBLE_EQ(last_time(t), 2.0);
}
