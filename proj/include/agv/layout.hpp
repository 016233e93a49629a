#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agv/geometry.hpp"

namespace agv {

using NodeId = int;
using Path = std::vector<NodeId>;

// Raised for any structural problem in a layout; the message names the
// offending entity.
class LayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownNode : public std::invalid_argument {
 public:
  explicit UnknownNode(NodeId id)
      : std::invalid_argument("unknown node " + std::to_string(id)), id_(id) {}
  NodeId id() const { return id_; }

 private:
  NodeId id_;
};

struct Node {
  NodeId id{};
  Vec2 position{};
};

// Named node set: a room or a critical area.
struct Region {
  std::string name;
  std::vector<NodeId> nodes;  // sorted, unique

  bool contains(NodeId n) const { return std::binary_search(nodes.begin(), nodes.end(), n); }
};

struct Arc {
  NodeId a{};
  NodeId b{};
};

inline constexpr double kSpacingTolerance = 1e-9;

// The discretized plant: nodes with positions, undirected arcs, rooms and
// critical areas. Immutable once built.
class LayoutGraph {
 public:
  LayoutGraph() = default;

  // Validates and builds a layout. `spacing_override`, when given, must not be
  // smaller than the longest arc.
  static LayoutGraph build(std::vector<Node> nodes, const std::vector<Arc>& arcs,
                           std::vector<Region> rooms, std::vector<Region> criticals,
                           std::optional<double> spacing_override = std::nullopt) {
    LayoutGraph g;
    std::sort(nodes.begin(), nodes.end(), [](const Node& l, const Node& r) { return l.id < r.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      if (n.id < 0) throw LayoutError("node " + std::to_string(n.id) + ": ids must be non-negative");
      if (!finite(n.position)) throw LayoutError("node " + std::to_string(n.id) + ": position is not finite");
      if (!g.index_.emplace(n.id, i).second) throw LayoutError("duplicate node id " + std::to_string(n.id));
    }
    g.nodes_ = std::move(nodes);
    g.adj_.assign(g.nodes_.size(), {});

    std::set<std::pair<NodeId, NodeId>> seen;
    double longest = 0.0;
    for (const Arc& arc : arcs) {
      const std::string label = "arc (" + std::to_string(arc.a) + "," + std::to_string(arc.b) + ")";
      if (!g.contains(arc.a) || !g.contains(arc.b)) throw LayoutError(label + " references an undeclared node");
      if (arc.a == arc.b) throw LayoutError(label + " is a self-loop");
      const auto key = std::minmax(arc.a, arc.b);
      if (!seen.insert(key).second) continue;  // duplicate arcs are harmless
      g.adj_[g.index_of(arc.a)].push_back(arc.b);
      g.adj_[g.index_of(arc.b)].push_back(arc.a);
      longest = std::max(longest, distance(g.position(arc.a), g.position(arc.b)));
    }
    for (auto& list : g.adj_) std::sort(list.begin(), list.end());

    auto normalise = [&g](std::vector<Region>& regions, const char* kind) {
      for (Region& r : regions) {
        std::sort(r.nodes.begin(), r.nodes.end());
        if (std::adjacent_find(r.nodes.begin(), r.nodes.end()) != r.nodes.end())
          throw LayoutError(std::string(kind) + " " + r.name + " lists a node twice");
        for (NodeId n : r.nodes)
          if (!g.contains(n))
            throw LayoutError(std::string(kind) + " " + r.name + " references undeclared node " + std::to_string(n));
      }
    };
    normalise(rooms, "room");
    normalise(criticals, "critical area");

    std::map<NodeId, std::string> room_of;
    for (const Region& r : rooms)
      for (NodeId n : r.nodes)
        if (auto [it, fresh] = room_of.emplace(n, r.name); !fresh)
          throw LayoutError("node " + std::to_string(n) + " belongs to rooms " + it->second + " and " + r.name);
    for (const Node& n : g.nodes_) {
      const bool in_critical = std::any_of(criticals.begin(), criticals.end(),
                                           [&](const Region& c) { return c.contains(n.id); });
      if (!room_of.count(n.id) && !in_critical)
        throw LayoutError("node " + std::to_string(n.id) + " belongs to no room or critical area");
    }
    g.rooms_ = std::move(rooms);
    g.criticals_ = std::move(criticals);

    if (spacing_override) {
      if (!(*spacing_override > 0.0) || *spacing_override + kSpacingTolerance < longest)
        throw LayoutError("node spacing override " + std::to_string(*spacing_override) +
                          " is smaller than the longest arc " + std::to_string(longest));
      g.spacing_ = *spacing_override;
    } else {
      g.spacing_ = longest;
    }
    return g;
  }

  bool contains(NodeId id) const { return index_.count(id) != 0; }

  std::size_t index_of(NodeId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode(id);
    return it->second;
  }

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  NodeId id_at(std::size_t index) const { return nodes_.at(index).id; }
  const Vec2& position(NodeId id) const { return nodes_[index_of(id)].position; }

  // Sorted ids of the nodes joined to `id` by an arc.
  const std::vector<NodeId>& neighbours(NodeId id) const { return adj_[index_of(id)]; }

  bool adjacent(NodeId a, NodeId b) const {
    const auto& list = neighbours(a);
    return std::binary_search(list.begin(), list.end(), b);
  }

  const std::vector<Region>& rooms() const { return rooms_; }
  const std::vector<Region>& criticals() const { return criticals_; }

  bool is_critical(NodeId id) const {
    return std::any_of(criticals_.begin(), criticals_.end(), [id](const Region& c) { return c.contains(id); });
  }

  // Union of every critical area containing `id` (empty when `id` is not critical).
  std::vector<NodeId> critical_block(NodeId id) const {
    std::set<NodeId> out;
    for (const Region& c : criticals_)
      if (c.contains(id)) out.insert(c.nodes.begin(), c.nodes.end());
    return {out.begin(), out.end()};
  }

  // Maximum node dimension d: the longest arc unless overridden.
  double spacing() const { return spacing_; }

  std::size_t arc_count() const {
    std::size_t total = 0;
    for (const auto& l : adj_) total += l.size();
    return total / 2;
  }

 private:
  std::vector<Node> nodes_;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::vector<NodeId>> adj_;
  std::vector<Region> rooms_;
  std::vector<Region> criticals_;
  double spacing_{0.0};
};

inline const std::vector<NodeId>& neighbours(const LayoutGraph& g, NodeId n) { return g.neighbours(n); }

// Dense symmetric arc-weight matrix over the layout's nodes; +inf marks "no arc".
class WeightedAdjacency {
 public:
  static constexpr double kNoArc = std::numeric_limits<double>::infinity();

  WeightedAdjacency() = default;

  // Unit weight on every arc of `g`.
  static WeightedAdjacency defaults(const LayoutGraph& g) {
    WeightedAdjacency w;
    w.layout_ = &g;
    w.n_ = g.node_count();
    w.m_.assign(w.n_ * w.n_, kNoArc);
    for (std::size_t i = 0; i < w.n_; ++i)
      for (NodeId nb : g.neighbours(g.id_at(i))) w.m_[i * w.n_ + g.index_of(nb)] = 1.0;
    return w;
  }

  double weight(NodeId a, NodeId b) const { return m_[idx(a, b)]; }
  bool has_arc(NodeId a, NodeId b) const { return std::isfinite(weight(a, b)); }

  // Adds `delta` to an existing arc, both directions.
  void increase(NodeId a, NodeId b, double delta) {
    if (!has_arc(a, b))
      throw std::invalid_argument("no arc (" + std::to_string(a) + "," + std::to_string(b) + ")");
    m_[idx(a, b)] += delta;
    m_[idx(b, a)] += delta;
  }

  void set(NodeId a, NodeId b, double value) {
    if (!has_arc(a, b))
      throw std::invalid_argument("no arc (" + std::to_string(a) + "," + std::to_string(b) + ")");
    if (value < 0.0) throw std::invalid_argument("arc weights must be non-negative");
    m_[idx(a, b)] = value;
    m_[idx(b, a)] = value;
  }

  const LayoutGraph& layout() const { return *layout_; }

 private:
  std::size_t idx(NodeId a, NodeId b) const { return layout_->index_of(a) * n_ + layout_->index_of(b); }

  const LayoutGraph* layout_{nullptr};
  std::size_t n_{0};
  std::vector<double> m_;
};

// Total weight of a node sequence; +inf if two consecutive nodes are not joined.
inline double path_cost(const WeightedAdjacency& w, const Path& p) {
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += w.weight(p[i - 1], p[i]);
  return total;
}

namespace detail {

// Costs of reaching `to` from every node (Dijkstra on the reversed, here
// symmetric, graph); nodes in `excluded` are removed.
inline std::vector<double> cost_to(const LayoutGraph& g, const WeightedAdjacency& w, NodeId to,
                                   std::span<const NodeId> excluded) {
  const std::size_t n = g.node_count();
  std::vector<double> dist(n, WeightedAdjacency::kNoArc);
  std::vector<char> banned(n, 0);
  for (NodeId e : excluded) banned[g.index_of(e)] = 1;
  const std::size_t t = g.index_of(to);
  if (banned[t]) return dist;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[t] = 0.0;
  open.emplace(0.0, t);
  while (!open.empty()) {
    const auto [du, u] = open.top();
    open.pop();
    if (du > dist[u]) continue;
    for (NodeId nb : g.neighbours(g.id_at(u))) {
      const std::size_t v = g.index_of(nb);
      if (banned[v]) continue;
      const double nd = du + w.weight(nb, g.id_at(u));
      if (nd < dist[v]) {
        dist[v] = nd;
        open.emplace(nd, v);
      }
    }
  }
  return dist;
}

inline bool same_cost(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace detail

// Minimum-weight path from `from` to `to` avoiding `excluded`; among equal
// costs the lexicographically smallest node sequence. Empty optional when `to`
// is unreachable.
inline std::optional<Path> shortest_path(const LayoutGraph& g, const WeightedAdjacency& w, NodeId from, NodeId to,
                                         std::span<const NodeId> excluded = {}) {
  (void)g.index_of(from);
  const std::vector<double> dist = detail::cost_to(g, w, to, excluded);
  if (!std::isfinite(dist[g.index_of(from)])) return std::nullopt;
  Path path{from};
  std::vector<char> visited(g.node_count(), 0);
  visited[g.index_of(from)] = 1;
  NodeId u = from;
  while (u != to) {
    const double du = dist[g.index_of(u)];
    std::optional<NodeId> step;
    for (NodeId v : g.neighbours(u)) {  // ascending ids: first tight arc is the lexicographic choice
      const std::size_t vi = g.index_of(v);
      if (visited[vi] || !std::isfinite(dist[vi])) continue;
      if (detail::same_cost(w.weight(u, v) + dist[vi], du)) {
        step = v;
        break;
      }
    }
    if (!step) return std::nullopt;  // only reachable with zero-weight cycles
    visited[g.index_of(*step)] = 1;
    path.push_back(*step);
    u = *step;
  }
  return path;
}

inline std::optional<Path> shortest_path(const LayoutGraph& g, NodeId from, NodeId to) {
  return shortest_path(g, WeightedAdjacency::defaults(g), from, to);
}

// Smallest room cardinality m_s.
inline std::size_t min_room_size(const LayoutGraph& g) {
  if (g.rooms().empty()) throw LayoutError("layout declares no rooms");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (const Region& r : g.rooms()) best = std::min(best, r.nodes.size());
  return best;
}

// Fleet size bound m_s - 1 (zero for a layout without rooms or with a one-node room).
inline std::size_t max_agents(const LayoutGraph& g) {
  if (g.rooms().empty()) return 0;
  const std::size_t ms = min_room_size(g);
  return ms == 0 ? 0 : ms - 1;
}

// Checks the Path invariants against a layout: non-empty, known nodes,
// consecutive entries adjacent.
inline bool is_valid_path(const LayoutGraph& g, const Path& p) {
  if (p.empty()) return false;
  for (NodeId n : p)
    if (!g.contains(n)) return false;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] == p[i - 1] || !g.adjacent(p[i - 1], p[i])) return false;
  return true;
}

}  // namespace agv
