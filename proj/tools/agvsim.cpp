// agvsim: validate scenarios, run the simulator, check traces, analyze snapshots.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "agv/safety.hpp"
#include "agv/scenario.hpp"
#include "agv/sim.hpp"
#include "agv/trace.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

agv::Scenario load(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("cannot open " + path);
  return agv::load_scenario_file(path);
}

void print_diagnostics(const agv::Diagnostics& diag) {
  for (const auto& d : diag.items)
    std::cerr << (d.severity == agv::Severity::Error ? "error: " : "warning: ") << d.message << '\n';
}

std::string set_str(const std::vector<agv::NodeId>& ids) { return "{" + agv::join_ids(ids, ',') + "}"; }

int cmd_validate(const std::string& path) {
  const agv::Scenario sc = load(path);
  const auto diag = agv::validate_scenario(sc);
  print_diagnostics(diag);
  const auto& g = sc.layout;
  std::cout << "layout: " << g.node_count() << " nodes, " << g.arc_count() << " arcs, d=" << agv::fixed6(g.spacing())
            << ", m_s=" << (g.rooms().empty() ? 0 : agv::min_room_size(g)) << ", max agents " << agv::max_agents(g)
            << '\n';
  std::cout << (diag.ok() ? "valid" : "invalid") << '\n';
  return diag.ok() ? kOk : kFailure;
}

struct RunFlags {
  std::optional<unsigned long long> seed;
  std::optional<double> horizon;
  std::string trace_out;
  std::string plot_out;
  bool online{false};
};

int cmd_run(const std::string& path, const RunFlags& f) {
  agv::Scenario sc = load(path);
  const auto diag = agv::validate_scenario(sc);
  print_diagnostics(diag);
  if (!diag.ok()) return kFailure;
  agv::SimOptions opts;
  opts.seed = f.seed;
  opts.horizon = f.horizon;
  if (f.online) opts.online_detection = true;
  if (f.horizon && !(*f.horizon > 0.0)) throw CLI::ValidationError("--horizon", "must be positive");
  agv::Simulator sim(std::move(sc), opts);
  const agv::Trace& trace = sim.run();
  const agv::RunReport rep = sim.report();

  if (!f.trace_out.empty()) {
    std::ofstream out(f.trace_out, std::ios::binary);
    if (!out) throw IoError("cannot write " + f.trace_out);
    trace.write(out);
  }
  if (!f.plot_out.empty()) agv::write_plot_csv(trace, f.plot_out);

  std::cout << "scenario " << rep.scenario << " seed " << rep.seed << '\n';
  for (const auto& a : rep.agents) {
    std::cout << "agent " << a.id << ": " << (a.arrival ? "arrived " + agv::fixed6(*a.arrival) : std::string("DNF"))
              << " replans " << a.replans << " competitions " << a.competitions << " wait_ticks " << a.wait_ticks
              << '\n';
  }
  std::cout << "end time " << agv::fixed6(rep.end_time) << '\n';
  std::cout << "mutual exclusion violations " << rep.exclusion_violations << '\n';
  std::cout << "collision violations " << rep.collision_violations << '\n';
  std::cout << "wall time " << rep.wall_seconds << " s\n";
  const bool ok = rep.all_arrived() && rep.exclusion_violations == 0 && rep.collision_violations == 0;
  return ok ? kOk : kFailure;
}

int cmd_check(const std::string& path, double footprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const agv::Trace trace = agv::parse_trace(in);
  if (trace.empty()) {
    std::cerr << "warning: empty trace\n";
    return kOk;
  }
  const auto excl = agv::assert_mutual_exclusion(trace);
  const auto coll = agv::assert_no_geometric_collision(trace, footprint);
  const auto fsm = agv::check_transition_sequence(trace);
  for (const auto& v : excl)
    std::cout << "exclusion " << agv::fixed6(v.time) << " agents " << v.a << "," << v.b << " node " << v.node << '\n';
  for (const auto& v : coll)
    std::cout << "collision " << agv::fixed6(v.time) << " agents " << v.a << "," << v.b << " distance "
              << agv::fixed6(v.separation) << '\n';
  for (const auto& [t, id] : fsm) std::cout << "transition " << agv::fixed6(t) << " agent " << id << '\n';
  std::cout << excl.size() << " exclusion, " << coll.size() << " collision, " << fsm.size()
            << " transition violations\n";
  return excl.empty() && coll.empty() && fsm.empty() ? kOk : kFailure;
}

void print_family(const agv::DepthFamily& fam) {
  for (const auto& lv : fam.levels) {
    std::cout << "  N_" << lv.level << "(" << agv::join_ids(lv.chain, ',') << ") = " << set_str(lv.nodes) << '\n';
  }
  std::cout << "  G = " << set_str(fam.G) << "\n  N_O = " << set_str(fam.N_O) << '\n';
  if (!fam.vacatable.empty()) std::cout << "  vacatable = " << set_str(fam.vacatable) << '\n';
}

int cmd_analyze(const std::string& path, const std::string& trace_path, std::optional<double> time,
                std::optional<agv::AgentId> agent, const std::string& moves) {
  const agv::Scenario sc = load(path);
  agv::WorldSnapshot world;
  if (!trace_path.empty()) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + trace_path);
    const agv::Trace trace = agv::parse_trace(in);
    const double t = time.value_or(agv::last_time(trace));
    if (t < 0.0 || t > agv::last_time(trace) + 1e-9)
      throw std::invalid_argument("snapshot time " + agv::fixed6(t) + " outside the trace");
    world = agv::snapshot_at(trace, t);
  } else {
    if (time && *time != 0.0) throw std::invalid_argument("a snapshot time needs --trace");
    world = agv::initial_snapshot(sc);
  }
  agv::MoveModel model = sc.sim.replanning ? agv::MoveModel::Graph : agv::MoveModel::PathBound;
  if (moves == "graph") model = agv::MoveModel::Graph;
  else if (moves == "path") model = agv::MoveModel::PathBound;

  std::vector<agv::AgentId> ids;
  if (agent) {
    if (!world.find(*agent)) throw agv::UnknownAgent(*agent);
    ids.push_back(*agent);
  } else {
    for (const auto& v : world.agents) ids.push_back(v.board.id);
  }
  const double R = sc.sim.radius;
  const double d = sc.layout.spacing();
  std::cout << "snapshot t=" << agv::fixed6(world.time) << " R=" << agv::fixed6(R) << " d=" << agv::fixed6(d)
            << " p=" << agv::depth_bound(R, d) << '\n';
  for (agv::AgentId id : ids) {
    const auto dl = agv::detect_local_deadlock(sc.layout, world, id, R, d, model);
    const auto ll = agv::detect_local_livelock(sc.layout, world, id, R, d, model);
    std::cout << "agent " << id << " at node " << world.find(id)->board.curr << '\n';
    if (dl.deadlocked)
      std::cout << "  deadlock\n";
    else if (!dl.F.empty())
      std::cout << "  no deadlock, F=" << set_str(dl.F) << " at depth " << dl.depth << '\n';
    else
      std::cout << "  no deadlock" << (dl.at_goal ? " (at goal)" : ", occupied nodes may vacate") << '\n';
    print_family(dl.family);
    if (!ll.applicable) {
      std::cout << "  P_safe not applicable (at goal)\n";
    } else {
      std::cout << "  P_safe = {";
      for (std::size_t i = 0; i < ll.safe_paths.size(); ++i)
        std::cout << (i ? "," : "") << set_str(ll.safe_paths[i]);
      std::cout << "}" << (ll.certified ? "" : " (no path of length p-1)") << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed sign-board coordination simulator for AGV fleets"};
  app.require_subcommand(1);

  std::string scenario_path, trace_path;
  auto* validate = app.add_subcommand("validate", "check a scenario file against the layout and fleet bounds");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  RunFlags rf;
  auto* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--seed", rf.seed, "random seed (phases and jitter)");
  run->add_option("--horizon", rf.horizon, "simulated seconds");
  run->add_option("--trace-out", rf.trace_out, "write the trace here");
  run->add_option("--plot-out", rf.plot_out, "directory for per-agent CSV plot data");
  run->add_flag("--online-detection", rf.online, "run the local deadlock test on every tick");

  double footprint = 0.2;
  auto* check = app.add_subcommand("check", "verify mutual exclusion and separation on a trace");
  check->add_option("trace", trace_path, "trace file")->required();
  check->add_option("--footprint", footprint, "agent footprint radius (m)")->check(CLI::PositiveNumber);

  std::optional<double> snap_time;
  std::optional<int> agent;
  std::string moves = "auto";
  auto* analyze = app.add_subcommand("analyze", "local deadlock and livelock analysis of a snapshot");
  analyze->add_option("scenario", scenario_path, "scenario file")->required();
  analyze->add_option("--trace", trace_path, "trace to take the snapshot from (default: initial state)");
  analyze->add_option("--time", snap_time, "snapshot time (default: end of trace)");
  analyze->add_option("--agent", agent, "agent to analyze (default: all)");
  analyze->add_option("--moves", moves, "occupant moves: graph, path or auto")
      ->check(CLI::IsMember({"auto", "graph", "path"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), kUsage);
  }

  try {
    if (*validate) return cmd_validate(scenario_path);
    if (*run) return cmd_run(scenario_path, rf);
    if (*check) return cmd_check(trace_path, footprint);
    if (*analyze) return cmd_analyze(scenario_path, trace_path, snap_time, agent, moves);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const agv::TraceError& e) {
    std::cerr << "error: malformed trace: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
