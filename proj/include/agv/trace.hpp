#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agv/geometry.hpp"
#include "agv/layout.hpp"
#include "agv/signboard.hpp"

namespace agv {

enum class RecordKind { Pose, Board, Fsm, Compete, Enter, Replan, Detect, Arrive };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Pose: return "pose";
    case RecordKind::Board: return "board";
    case RecordKind::Fsm: return "fsm";
    case RecordKind::Compete: return "compete";
    case RecordKind::Enter: return "enter";
    case RecordKind::Replan: return "replan";
    case RecordKind::Detect: return "detect";
    case RecordKind::Arrive: return "arrive";
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  for (RecordKind k : {RecordKind::Pose, RecordKind::Board, RecordKind::Fsm, RecordKind::Compete, RecordKind::Enter,
                       RecordKind::Replan, RecordKind::Detect, RecordKind::Arrive})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed six-decimal rendering keeps trace files byte-stable.
inline std::string fixed6(double v) {
  if (v == 0.0) v = 0.0;  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string join_ids(const std::vector<NodeId>& ids, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(ids[i]);
  }
  return out;
}

inline std::vector<NodeId> split_ids(std::string_view s, char sep = ',') {
  std::vector<NodeId> out;
  if (s.empty() || s == "-") return out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    const std::string tok{s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)};
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw TraceError("bad node list '" + std::string(s) + "'");
    }
    if (used != tok.size()) throw TraceError("bad node list '" + std::string(s) + "'");
    out.push_back(v);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

// One trace line: time, agent, kind and kind-specific fields.
//   pose     x y
//   board    pr status vx vy curr next prev timer nodes x y
//   fsm      from to case
//   compete  node winner basis id:pr:timer,...
//   enter    node
//   replan   path|none
//   detect   deadlocked|free F depth
//   arrive   node
struct TraceRecord {
  double time{0.0};
  AgentId agent{};
  RecordKind kind{RecordKind::Pose};
  std::vector<std::string> fields;
};

inline std::string format_record(const TraceRecord& r) {
  std::string line = fixed6(r.time) + '\t' + std::to_string(r.agent) + '\t' + std::string(to_string(r.kind));
  for (const auto& f : r.fields) line += '\t' + f;
  return line;
}

inline std::vector<std::string> board_fields(const SignBoard& b, const Vec2& pose) {
  auto opt = [](const std::optional<NodeId>& n) { return n ? std::to_string(*n) : std::string("-"); };
  return {std::to_string(b.pr), std::string(to_string(b.status)), fixed6(b.vel.x), fixed6(b.vel.y),
          std::to_string(b.curr), opt(b.next), opt(b.prev), std::to_string(b.timer),
          join_ids(b.nodes), fixed6(pose.x), fixed6(pose.y)};
}

class Trace {
 public:
  void add(TraceRecord r) {
    if (!records_.empty() && r.time < records_.back().time)
      throw TraceError("trace time went backwards at " + fixed6(r.time));
    records_.push_back(std::move(r));
  }
  void add(double time, AgentId agent, RecordKind kind, std::vector<std::string> fields) {
    add(TraceRecord{time, agent, kind, std::move(fields)});
  }

  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }

  void write(std::ostream& out) const {
    for (const auto& r : records_) out << format_record(r) << '\n';
  }
  std::string str() const {
    std::ostringstream ss;
    write(ss);
    return ss.str();
  }

 private:
  std::vector<TraceRecord> records_;
};

namespace detail {

inline double parse_trace_real(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw TraceError("line " + std::to_string(line) + ": bad number '" + s + "'");
}

inline int parse_trace_int(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw TraceError("line " + std::to_string(line) + ": bad integer '" + s + "'");
}

inline std::size_t expected_fields(RecordKind k) {
  switch (k) {
    case RecordKind::Pose: return 2;
    case RecordKind::Board: return 11;
    case RecordKind::Fsm: return 3;
    case RecordKind::Compete: return 4;
    case RecordKind::Enter: return 1;
    case RecordKind::Replan: return 1;
    case RecordKind::Detect: return 3;
    case RecordKind::Arrive: return 1;
  }
  return 0;
}

}  // namespace detail

inline Trace parse_trace(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 3) throw TraceError("line " + std::to_string(n) + ": expected time, agent and kind");
    TraceRecord r;
    r.time = detail::parse_trace_real(cols[0], n);
    r.agent = detail::parse_trace_int(cols[1], n);
    const auto kind = parse_record_kind(cols[2]);
    if (!kind) throw TraceError("line " + std::to_string(n) + ": unknown record kind '" + cols[2] + "'");
    r.kind = *kind;
    r.fields.assign(cols.begin() + 3, cols.end());
    if (r.fields.size() != detail::expected_fields(r.kind))
      throw TraceError("line " + std::to_string(n) + ": wrong field count for " + cols[2]);
    try {
      t.add(std::move(r));
    } catch (const TraceError& e) {
      throw TraceError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return t;
}

inline Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

inline Vec2 pose_of(const TraceRecord& r) {
  if (r.kind == RecordKind::Pose) return {std::stod(r.fields.at(0)), std::stod(r.fields.at(1))};
  if (r.kind == RecordKind::Board) return {std::stod(r.fields.at(9)), std::stod(r.fields.at(10))};
  throw TraceError("record carries no pose");
}

inline SignBoard board_of(const TraceRecord& r) {
  if (r.kind != RecordKind::Board) throw TraceError("not a board record");
  SignBoard b;
  b.id = r.agent;
  b.pr = std::stoi(r.fields[0]);
  const auto s = parse_fsm_state(r.fields[1]);
  if (!s) throw TraceError("bad status '" + r.fields[1] + "'");
  b.status = *s;
  b.vel = {std::stod(r.fields[2]), std::stod(r.fields[3])};
  b.curr = std::stoi(r.fields[4]);
  if (r.fields[5] != "-") b.next = std::stoi(r.fields[5]);
  if (r.fields[6] != "-") b.prev = std::stoi(r.fields[6]);
  b.timer = std::stoi(r.fields[7]);
  b.nodes = split_ids(r.fields[8]);
  return b;
}

// Latest published board (and its pose) of every agent at or before `time`.
inline WorldSnapshot snapshot_at(const Trace& trace, double time) {
  std::map<AgentId, BoardView> latest;
  for (const auto& r : trace.records()) {
    if (r.time > time + 1e-9) break;
    if (r.kind == RecordKind::Board) latest[r.agent] = BoardView{board_of(r), pose_of(r)};
  }
  WorldSnapshot w;
  w.time = time;
  for (auto& [id, v] : latest) w.agents.push_back(std::move(v));
  return w;
}

inline double last_time(const Trace& trace) { return trace.empty() ? 0.0 : trace.records().back().time; }

}  // namespace agv
