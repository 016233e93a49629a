#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "agv/layout.hpp"

namespace agv {

using AgentId = int;

// Ordered run of consecutive shared nodes on the owner's remaining path.
struct MacroResource {
  std::vector<NodeId> nodes;
  AgentId owner{};
  std::vector<AgentId> sharers;  // sorted

  bool contains(NodeId n) const { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); }
  friend bool operator==(const MacroResource&, const MacroResource&) = default;
};

struct AgentPath {
  AgentId id{};
  Path path;
};

// Current node plus the next element: a single node or a macro resource.
struct AgentConfiguration {
  NodeId current{};
  std::optional<NodeId> next_node;
  std::optional<MacroResource> macro;

  bool at_goal() const { return !next_node && !macro; }

  // Node sub-sequence used to classify encounters.
  std::vector<NodeId> sequence() const {
    std::vector<NodeId> s{current};
    if (macro)
      s.insert(s.end(), macro->nodes.begin(), macro->nodes.end());
    else if (next_node)
      s.push_back(*next_node);
    return s;
  }
};

enum class EncounterKind { Crossroad, Follower, Frontal };

inline std::string_view to_string(EncounterKind k) {
  switch (k) {
    case EncounterKind::Crossroad: return "crossroad";
    case EncounterKind::Follower: return "follower";
    case EncounterKind::Frontal: return "frontal";
  }
  return "?";
}

// Nodes present in both paths, ascending.
inline std::vector<NodeId> shared_micro(std::span<const NodeId> p, std::span<const NodeId> q) {
  std::set<NodeId> a(p.begin(), p.end());
  std::set<NodeId> b(q.begin(), q.end());
  std::vector<NodeId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Splits the shared part of `remaining` (current node excluded) into maximal
// consecutive runs, in path order. Each run lists every other agent sharing at
// least one of its nodes.
inline std::vector<MacroResource> macro_resources(AgentId owner, std::span<const NodeId> remaining,
                                                  std::span<const AgentPath> others) {
  std::vector<MacroResource> out;
  if (remaining.size() < 2) return out;
  std::vector<std::set<NodeId>> other_sets;
  other_sets.reserve(others.size());
  for (const AgentPath& o : others) other_sets.emplace_back(o.path.begin(), o.path.end());

  auto sharers_of = [&](NodeId n) {
    std::vector<AgentId> ids;
    for (std::size_t k = 0; k < others.size(); ++k)
      if (others[k].id != owner && other_sets[k].count(n)) ids.push_back(others[k].id);
    return ids;
  };

  MacroResource run;
  std::set<AgentId> run_sharers;
  auto flush = [&] {
    if (run.nodes.empty()) return;
    run.owner = owner;
    run.sharers.assign(run_sharers.begin(), run_sharers.end());
    out.push_back(std::move(run));
    run = {};
    run_sharers.clear();
  };
  for (std::size_t i = 1; i < remaining.size(); ++i) {
    const auto ids = sharers_of(remaining[i]);
    if (ids.empty()) {
      flush();
      continue;
    }
    run.nodes.push_back(remaining[i]);
    run_sharers.insert(ids.begin(), ids.end());
  }
  flush();
  return out;
}

// The agent configuration: {curr, MR} when the next node opens a shared macro
// resource, {curr, next} otherwise, {curr} at the goal.
inline AgentConfiguration agent_configuration(std::span<const NodeId> remaining,
                                              std::span<const MacroResource> macros) {
  AgentConfiguration cfg;
  if (remaining.empty()) return cfg;
  cfg.current = remaining[0];
  if (remaining.size() < 2) return cfg;
  const NodeId next = remaining[1];
  for (const MacroResource& mr : macros) {
    if (mr.contains(next)) {
      cfg.macro = mr;
      cfg.next_node = next;
      return cfg;
    }
  }
  cfg.next_node = next;
  return cfg;
}

namespace detail {

// Length of the longest run of consecutive elements common to both sequences.
inline std::size_t longest_common_run(std::span<const NodeId> a, std::span<const NodeId> b) {
  std::size_t best = 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

}  // namespace detail

// Classifies the encounter between two configuration sub-sequences; none when
// they share no node.
inline std::optional<EncounterKind> classify_encounter(std::span<const NodeId> li, std::span<const NodeId> lj) {
  if (shared_micro(li, lj).empty()) return std::nullopt;
  if (detail::longest_common_run(li, lj) >= 2) return EncounterKind::Follower;
  const std::vector<NodeId> reversed(lj.rbegin(), lj.rend());
  if (detail::longest_common_run(li, reversed) >= 2) return EncounterKind::Frontal;
  return EncounterKind::Crossroad;
}

}  // namespace agv
