#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "agv/layout.hpp"
#include "agv/protocol.hpp"
#include "agv/safety.hpp"
#include "agv/scenario.hpp"
#include "agv/signboard.hpp"
#include "agv/trace.hpp"

namespace agv {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentRuntime {
  AgentSpec spec;
  double phase{0.0};
  Vec2 pose{};
  double speed{0.0};  // commanded speed along the path polyline
  ManagerState mgr;
  AgentState state;
  SignBoard board;  // last published
  bool passed_curr{true};  // pose has reached the centre of the current node
  double next_tick{0.0};
  std::optional<double> arrival;
  std::optional<Path> last_replan;
  int ticks{0};
  int replans{0};
  int competitions{0};
  int wait_ticks{0};
  std::mt19937_64 rng;
};

// Everything a protocol tick needs besides the agent and the world.
struct StepContext {
  const LayoutGraph* layout{};
  ProtocolParams params;
  double radius{3.0};
  bool online_detection{false};
};

namespace detail {

// Uniform in [0, 1), independent of the standard library's distributions.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<Vec2> waypoints(const AgentRuntime& rt, const LayoutGraph& g) {
  std::vector<Vec2> w;
  if (!rt.passed_curr) w.push_back(g.position(rt.state.path.front()));
  if (rt.mgr.fsm == FsmState::M && rt.state.path.size() > 1) w.push_back(g.position(rt.state.path[1]));
  return w;
}

inline Vec2 travel_velocity(const AgentRuntime& rt, const LayoutGraph& g) {
  for (const Vec2& w : waypoints(rt, g)) {
    if (distance(w, rt.pose) > 1e-12) return rt.speed * direction(rt.pose, w);
  }
  return {};
}

inline std::string competitors_field(const std::vector<Competitor>& cs) {
  std::string out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(cs[i].id) + ':' + std::to_string(cs[i].priority) + ':' + std::to_string(cs[i].timer);
  }
  return out;
}

}  // namespace detail

// Moves the agent along its polyline for `dt` seconds at its commanded speed.
// Returns the elapsed time at which it reached the current node's centre, if
// that happened during this interval.
inline std::optional<double> advance(AgentRuntime& rt, const LayoutGraph& g, double dt) {
  std::optional<double> reached;
  double left = dt;
  double elapsed = 0.0;
  if (!rt.passed_curr && distance(rt.pose, g.position(rt.state.path.front())) <= 1e-12) {
    rt.passed_curr = true;
    reached = 0.0;
  }
  if (rt.speed <= 0.0) return reached;
  while (left > 0.0) {
    const auto wps = detail::waypoints(rt, g);
    if (wps.empty()) break;
    const Vec2 target = wps.front();
    const double gap = distance(rt.pose, target);
    const double reach = gap / rt.speed;
    if (reach <= left) {
      rt.pose = target;
      left -= reach;
      elapsed += reach;
      if (!rt.passed_curr) {
        rt.passed_curr = true;
        reached = elapsed;
        continue;
      }
      break;  // at the next node's centre: hold until the entry tick
    }
    rt.pose = rt.pose + (rt.speed * left) * direction(rt.pose, target);
    left = 0.0;
  }
  return reached;
}

inline WorldSnapshot world_of(const std::vector<AgentRuntime>& agents, double time) {
  WorldSnapshot w;
  w.time = time;
  for (const AgentRuntime& a : agents) w.agents.push_back({a.board, a.pose});
  return w;
}

// Boards and poses of the scenario's fleet before any tick: every agent at its
// start node on its initial path.
inline WorldSnapshot initial_snapshot(const Scenario& sc) {
  int top = 0;
  for (const AgentSpec& a : sc.agents) top = std::max(top, a.priority);
  WorldSnapshot w;
  for (const AgentSpec& a : sc.agents) {
    AgentState st;
    st.id = a.id;
    if (sc.paths.count(a.id)) {
      st.path = sc.paths.at(a.id);
    } else {
      auto p = shortest_path(sc.layout, a.start, a.goal);
      st.path = p ? *p : Path{a.start};
    }
    st.priority = effective_priority(a.priority, a.start, sc.layout, top + 1);
    w.agents.push_back({publish(st), sc.layout.position(a.start)});
  }
  return w;
}

// One protocol tick of `rt` at `time` against the world as it stands.
inline void step_agent(AgentRuntime& rt, const WorldSnapshot& world, const StepContext& ctx, double time, Trace& trace) {
  const LayoutGraph& g = *ctx.layout;
  const double d = g.spacing();
  const AgentId id = rt.spec.id;
  ++rt.ticks;
  const Lecture lect = read_neighbours(world, id, ctx.radius);

  rt.state.priority = effective_priority(rt.spec.priority, rt.state.path.front(), g, ctx.params.max_priority);
  const SignBoard self = publish(rt.state);
  const FsmState from = rt.mgr.fsm;
  FsmState to = from;
  std::string why;
  std::optional<Path> replanned;
  bool entry = false;

  auto do_replan = [&] {
    const NodeId curr = rt.state.path.front();
    const auto contested = rt.state.path.size() > 1 ? std::optional<NodeId>(rt.state.path[1]) : std::nullopt;
    auto p = replan(g, curr, rt.spec.goal, lect, contested);
    trace.add(time, id, RecordKind::Replan, {p ? join_ids(*p) : std::string("none")});
    ++rt.replans;
    replanned = p ? *p : rt.state.path;
    rt.last_replan = p;
    rt.mgr.t_rep = 0;
  };

  switch (from) {
    case FsmState::Req: {
      const RequestResult res = request_step(self, rt.mgr, lect, g, ctx.params);
      rt.mgr = res.mgr;
      to = res.next;
      why = std::string(to_string(res.why));
      if (res.competition) {
        ++rt.competitions;
        const auto& c = *res.competition;
        trace.add(time, id, RecordKind::Compete,
                  {std::to_string(c.node), std::to_string(c.outcome.winner), std::string(to_string(c.outcome.basis)),
                   detail::competitors_field(c.competitors)});
      }
      if (to == FsmState::Rep) do_replan();
      break;
    }
    case FsmState::W:
      to = wait_step(rt.mgr, ctx.params);
      why = to == FsmState::Rep ? "threshold" : "retry";
      if (to == FsmState::Rep) do_replan();
      break;
    case FsmState::M:
      to = move_step(rt.pose, self, g);
      entry = to == FsmState::Req;
      why = "entry";
      break;
    case FsmState::Rep:
      to = FsmState::Req;
      why = "replanned";
      break;
  }
  rt.mgr.fsm = to;
  if (to == FsmState::W) ++rt.wait_ticks;

  if (entry) {
    rt.state.prev = rt.state.path.front();
    rt.state.path.erase(rt.state.path.begin());
    rt.state.timer = 0;
    rt.passed_curr = false;
    trace.add(time, id, RecordKind::Enter, {std::to_string(rt.state.path.front())});
    rt.state.priority = effective_priority(rt.spec.priority, rt.state.path.front(), g, ctx.params.max_priority);
  }

  switch (to) {
    case FsmState::W:
    case FsmState::Rep: rt.speed = 0.0; break;
    case FsmState::Req: break;  // keeps the previous speed
    case FsmState::M: {
      const auto& path = rt.state.path;
      SegmentGeometry geo;
      if (rt.state.prev) geo.prev = g.position(*rt.state.prev);
      geo.curr = g.position(path.front());
      geo.next = g.position(path[1]);
      rt.speed = norm(speed_update(FsmState::M, rt.pose, geo, lect, rt.spec.max_speed, {}, d, path[1]));
      break;
    }
  }

  const Vec2 vel = detail::travel_velocity(rt, g);
  const SignBoard published = signboard_commit(to, rt.state, rt.mgr, vel, replanned, false);
  if (to != from) trace.add(time, id, RecordKind::Fsm, {std::string(to_string(from)), std::string(to_string(to)), why});
  if (!(published == rt.board)) trace.add(time, id, RecordKind::Board, board_fields(published, rt.pose));
  rt.board = published;

  if (ctx.online_detection) {
    WorldSnapshot now = world;
    for (BoardView& v : now.agents)
      if (v.board.id == id) v = {published, rt.pose};
    const MoveModel model = ctx.params.replanning ? MoveModel::Graph : MoveModel::PathBound;
    const auto rep = detect_local_deadlock(g, now, id, ctx.radius, d, model);
    trace.add(time, id, RecordKind::Detect,
              {rep.deadlocked ? "deadlocked" : "free", rep.F.empty() ? std::string("-") : join_ids(rep.F),
               std::to_string(rep.depth)});
  }
}

struct SimOptions {
  std::optional<unsigned long long> seed;
  std::optional<double> horizon;
  std::optional<bool> online_detection;
  // Called after every protocol tick with the ticking agent's id.
  std::function<void(const std::vector<AgentRuntime>&, AgentId, double)> on_tick;
};

struct AgentReport {
  AgentId id{};
  std::optional<double> arrival;
  int replans{0};
  int competitions{0};
  int wait_ticks{0};
};

struct RunReport {
  std::string scenario;
  unsigned long long seed{};
  double wall_seconds{0.0};
  double end_time{0.0};
  std::vector<AgentReport> agents;
  std::size_t exclusion_violations{0};
  std::size_t collision_violations{0};

  bool all_arrived() const {
    return std::all_of(agents.begin(), agents.end(), [](const AgentReport& a) { return a.arrival.has_value(); });
  }
};

// Deterministic event loop: protocol ticks at per-agent jittered periods,
// exact straight-line motion in between, pose samples on a fixed grid.
class Simulator {
 public:
  explicit Simulator(Scenario sc, SimOptions opts = {}) : sc_(std::move(sc)), opts_(std::move(opts)) {
    if (opts_.seed) sc_.sim.seed = *opts_.seed;
    if (opts_.horizon) sc_.sim.horizon = *opts_.horizon;
    if (opts_.online_detection) sc_.sim.online_detection = *opts_.online_detection;
    const Diagnostics diag = validate_scenario(sc_);
    if (!diag.ok()) {
      std::string msg = "invalid scenario:";
      for (const auto& item : diag.items)
        if (item.severity == Severity::Error) msg += "\n  " + item.message;
      throw SimError(msg);
    }
    if (sc_.agents.empty()) throw SimError("scenario has no agents");

    ctx_.layout = &sc_.layout;
    ctx_.radius = sc_.sim.radius;
    ctx_.online_detection = sc_.sim.online_detection;
    ctx_.params.replan_threshold = sc_.sim.replan_threshold;
    ctx_.params.replanning = sc_.sim.replanning;
    int top = 0;
    for (const AgentSpec& a : sc_.agents) top = std::max(top, a.priority);
    ctx_.params.max_priority = top + 1;

    double min_period = std::numeric_limits<double>::infinity();
    for (const AgentSpec& a : sc_.agents) {
      AgentRuntime rt;
      rt.spec = a;
      rt.rng.seed(mix(sc_.sim.seed, a.id));
      rt.phase = detail::unit_draw(rt.rng) * a.period;
      rt.next_tick = rt.phase;
      rt.pose = sc_.layout.position(a.start);
      rt.state.id = a.id;
      rt.state.path = sc_.paths.count(a.id) ? sc_.paths.at(a.id) : *shortest_path(sc_.layout, a.start, a.goal);
      rt.state.priority = effective_priority(a.priority, a.start, sc_.layout, ctx_.params.max_priority);
      rt.board = publish(rt.state);
      if (a.start == a.goal) rt.arrival = 0.0;
      agents_.push_back(std::move(rt));
      min_period = std::min(min_period, a.period);
    }
    sample_dt_ = sc_.sim.sample_interval.value_or(min_period);
    if (!(sample_dt_ > 0.0)) throw SimError("sample interval must be positive");
  }

  const Scenario& scenario() const { return sc_; }
  const std::vector<AgentRuntime>& agents() const { return agents_; }
  const Trace& trace() const { return trace_; }
  double now() const { return now_; }

  const Trace& run() {
    const auto wall0 = std::chrono::steady_clock::now();
    for (const AgentRuntime& a : agents_) trace_.add(0.0, a.spec.id, RecordKind::Board, board_fields(a.board, a.pose));
    for (const AgentRuntime& a : agents_)
      if (a.arrival) trace_.add(0.0, a.spec.id, RecordKind::Arrive, {std::to_string(a.spec.goal)});
    long long sample_k = 0;
    double last_sample = -1.0;
    const double horizon = sc_.sim.horizon;

    while (true) {
      if (all_arrived()) {
        if (last_sample < now_) emit_samples(now_);
        break;
      }
      double tick = std::numeric_limits<double>::infinity();
      for (const AgentRuntime& a : agents_) tick = std::min(tick, a.next_tick);
      const double sample_t = static_cast<double>(sample_k) * sample_dt_;
      const double t = std::min(tick, sample_t);
      if (t > horizon) {
        move_all(horizon);
        if (all_arrived()) {
          if (last_sample < now_) emit_samples(now_);
        } else if (last_sample < horizon) {
          emit_samples(horizon);
        }
        break;
      }
      move_all(t);
      if (all_arrived()) continue;
      if (sample_t == t) {
        emit_samples(t);
        last_sample = t;
        ++sample_k;
      }
      if (tick == t) {
        for (AgentRuntime& a : agents_) {
          if (a.next_tick != t) continue;
          step_agent(a, world_of(agents_, t), ctx_, t, trace_);
          a.next_tick = t + a.spec.period * (1.0 - sc_.sim.jitter * detail::unit_draw(a.rng));
          if (opts_.on_tick) opts_.on_tick(agents_, a.spec.id, t);
        }
      }
    }
    wall_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return trace_;
  }

  RunReport report() const {
    RunReport r;
    r.scenario = sc_.sim.name;
    r.seed = sc_.sim.seed;
    r.wall_seconds = wall_;
    r.end_time = now_;
    for (const AgentRuntime& a : agents_) r.agents.push_back({a.spec.id, a.arrival, a.replans, a.competitions, a.wait_ticks});
    r.exclusion_violations = assert_mutual_exclusion(trace_).size();
    double fp = 0.0;
    for (const AgentRuntime& a : agents_) fp = std::max(fp, a.spec.footprint);
    r.collision_violations = assert_no_geometric_collision(trace_, fp).size();
    return r;
  }

 private:
  static std::uint64_t mix(unsigned long long seed, AgentId id) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(id) + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  bool all_arrived() const {
    return std::all_of(agents_.begin(), agents_.end(), [](const AgentRuntime& a) { return a.arrival.has_value(); });
  }

  // Advances every pose to `t`, logging arrivals in time order.
  void move_all(double t) {
    const double dt = t - now_;
    std::vector<std::pair<double, AgentId>> arrived;
    for (AgentRuntime& a : agents_) {
      const auto reached = advance(a, sc_.layout, dt);
      if (reached && !a.arrival && a.state.path.size() == 1) {
        a.arrival = now_ + *reached;
        arrived.emplace_back(*a.arrival, a.spec.id);
      }
    }
    std::sort(arrived.begin(), arrived.end());
    for (const auto& [when, id] : arrived)
      trace_.add(when, id, RecordKind::Arrive, {std::to_string(agent(id).spec.goal)});
    if (!arrived.empty() && all_arrived()) {
      now_ = arrived.back().first;
      return;
    }
    now_ = t;
  }

  const AgentRuntime& agent(AgentId id) const {
    for (const AgentRuntime& a : agents_)
      if (a.spec.id == id) return a;
    throw UnknownAgent(id);
  }

  void emit_samples(double t) {
    for (const AgentRuntime& a : agents_)
      trace_.add(t, a.spec.id, RecordKind::Pose, {fixed6(a.pose.x), fixed6(a.pose.y)});
  }

  Scenario sc_;
  SimOptions opts_;
  StepContext ctx_;
  std::vector<AgentRuntime> agents_;
  Trace trace_;
  double now_{0.0};
  double sample_dt_{0.1};
  double wall_{0.0};
};

inline Trace run(const Scenario& sc, std::optional<unsigned long long> seed = std::nullopt,
                 std::optional<double> horizon = std::nullopt) {
  SimOptions o;
  o.seed = seed;
  o.horizon = horizon;
  Simulator s(sc, o);
  return s.run();
}

// Per-agent `time,x,y,state` CSV files named agent_<id>.csv under `dir`.
inline void write_plot_csv(const Trace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<AgentId, FsmState> state;
  std::map<AgentId, std::ofstream> files;
  for (const auto& r : trace.records()) {
    if (r.kind == RecordKind::Fsm) {
      if (const auto s = parse_fsm_state(r.fields.at(1))) state[r.agent] = *s;
      continue;
    }
    if (r.kind != RecordKind::Pose) continue;
    auto it = files.find(r.agent);
    if (it == files.end()) {
      it = files.emplace(r.agent, std::ofstream(dir / ("agent_" + std::to_string(r.agent) + ".csv"))).first;
      if (!it->second) throw std::runtime_error("cannot write plot data to " + dir.string());
      it->second << "time,x,y,state\n";
    }
    const FsmState s = state.count(r.agent) ? state[r.agent] : FsmState::Req;
    it->second << fixed6(r.time) << ',' << r.fields[0] << ',' << r.fields[1] << ',' << to_string(s) << '\n';
  }
}

}  // namespace agv
