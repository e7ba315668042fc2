#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exponent_lab/error.hpp"

namespace exponent_lab {

using VertexId = std::int32_t;
using EdgeId = std::int32_t;
// Sorted, duplicate-free list of vertex ids.
using VertexSet = std::vector<VertexId>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr int kUnreached = -1;

struct Edge {
  VertexId u;
  VertexId v;
  double c;
};

struct Incidence {
  VertexId to;
  EdgeId edge;
};

// Finite rooted conductance multigraph. Immutable once built.
class Network {
 public:
  Network() = default;

  Network(std::size_t n, std::vector<Edge> edges, VertexId root, const std::vector<VertexId>& boundary = {})
      : n_(n), edges_(std::move(edges)), root_(root), boundary_(n, 0), cv_(n, 0.0) {
    if (n == 0) throw InputError("network has no vertices");
    if (n > static_cast<std::size_t>(std::numeric_limits<VertexId>::max()))
      throw ResourceError("network exceeds the vertex id range");
    if (root < 0 || static_cast<std::size_t>(root) >= n)
      throw InputError("root " + std::to_string(root) + " is not a vertex");
    for (VertexId b : boundary) {
      check_vertex(b);
      boundary_[b] = 1;
    }
    std::vector<std::int32_t> deg(n + 1, 0);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n || static_cast<std::size_t>(e.v) >= n)
        throw InputError("edge " + std::to_string(i) + " has an endpoint outside 0.." + std::to_string(n - 1));
      if (!std::isfinite(e.c) || e.c < 0)
        throw InputError("edge " + std::to_string(i) + " has conductance that is negative or not finite");
      ++deg[e.u + 1];
      if (e.v != e.u) ++deg[e.v + 1];
      cv_[e.u] += e.c;
      if (e.v != e.u) cv_[e.v] += e.c;
    }
    for (std::size_t i = 0; i < n; ++i) deg[i + 1] += deg[i];
    offsets_ = deg;
    adj_.resize(offsets_[n]);
    std::vector<std::int32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      adj_[fill[e.u]++] = {e.v, static_cast<EdgeId>(i)};
      if (e.v != e.u) adj_[fill[e.v]++] = {e.u, static_cast<EdgeId>(i)};
    }
    if (!(cv_[root_] > 0)) throw InputError("root has no incident edge of positive conductance");
    check_connected();
  }

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  VertexId root() const { return root_; }
  bool is_boundary(VertexId v) const { return boundary_[v] != 0; }
  const std::vector<char>& boundary_flags() const { return boundary_; }
  std::vector<VertexId> boundary() const {
    std::vector<VertexId> out;
    for (std::size_t v = 0; v < n_; ++v)
      if (boundary_[v]) out.push_back(static_cast<VertexId>(v));
    return out;
  }
  bool has_boundary() const { return std::find(boundary_.begin(), boundary_.end(), 1) != boundary_.end(); }

  // c_v: sum of incident conductances, a self-loop counted once.
  double conductance(VertexId v) const { return cv_[v]; }
  const std::vector<double>& conductances() const { return cv_; }

  std::span<const Incidence> incident(VertexId v) const {
    return {adj_.data() + offsets_[v], adj_.data() + offsets_[v + 1]};
  }
  std::size_t degree(VertexId v) const { return static_cast<std::size_t>(offsets_[v + 1] - offsets_[v]); }

  void check_vertex(VertexId v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= n_)
      throw InputError("vertex " + std::to_string(v) + " is not in 0.." + std::to_string(n_ - 1));
  }

  Network with_root(VertexId r) const { return Network(n_, edges_, r, boundary()); }

 private:
  void check_connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<VertexId> stack{root_};
    seen[root_] = 1;
    while (!stack.empty()) {
      VertexId x = stack.back();
      stack.pop_back();
      for (const Incidence& in : incident(x))
        if (!seen[in.to]) {
          seen[in.to] = 1;
          stack.push_back(in.to);
        }
    }
    for (std::size_t v = 0; v < n_; ++v)
      if (!seen[v] && degree(static_cast<VertexId>(v)) > 0)
        throw InputError("vertex " + std::to_string(v) + " is not connected to the root");
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  VertexId root_ = 0;
  std::vector<char> boundary_;
  std::vector<double> cv_;
  std::vector<std::int32_t> offsets_;
  std::vector<Incidence> adj_;
};

// Nonnegative per-edge lengths indexed like Network::edges().
struct EdgeWeight {
  std::vector<double> values;

  void validate(const Network& net) const {
    if (values.size() != net.edge_count())
      throw InputError("edge weight has " + std::to_string(values.size()) + " entries but the network has " +
                       std::to_string(net.edge_count()) + " edges");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i]) || values[i] < 0)
        throw InputError("edge weight " + std::to_string(i) + " is negative or not finite");
  }
};

inline EdgeWeight constant_weight(const Network& net, double value) {
  return {std::vector<double>(net.edge_count(), value)};
}

// Radii given as reals are read as balls {d <= floor(r)}.
inline int floor_radius(double r) {
  if (!(r >= 0)) return -1;
  if (r >= static_cast<double>(std::numeric_limits<int>::max() / 2)) return std::numeric_limits<int>::max() / 2;
  return static_cast<int>(std::floor(r));
}

inline VertexSet make_set(std::vector<VertexId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline std::vector<char> membership(std::size_t n, const VertexSet& s) {
  std::vector<char> m(n, 0);
  for (VertexId v : s) m[v] = 1;
  return m;
}

// Unweighted BFS over every edge, conductance-zero edges included.
// Stops expanding past max_radius when it is nonnegative.
inline std::vector<int> bfs_distances(const Network& net, const VertexSet& sources, int max_radius = -1) {
  std::vector<int> dist(net.size(), kUnreached);
  std::vector<VertexId> frontier;
  for (VertexId s : sources) {
    net.check_vertex(s);
    if (dist[s] != 0) {
      dist[s] = 0;
      frontier.push_back(s);
    }
  }
  std::size_t head = 0;
  while (head < frontier.size()) {
    VertexId x = frontier[head++];
    if (max_radius >= 0 && dist[x] >= max_radius) continue;
    for (const Incidence& in : net.incident(x))
      if (dist[in.to] == kUnreached) {
        dist[in.to] = dist[x] + 1;
        frontier.push_back(in.to);
      }
  }
  return dist;
}

inline std::vector<int> bfs_distances(const Network& net, VertexId source, int max_radius = -1) {
  return bfs_distances(net, VertexSet{source}, max_radius);
}

// B(center, R) = {y : d(center, y) <= R}.
inline VertexSet graph_ball(const Network& net, VertexId center, int R) {
  net.check_vertex(center);
  if (R < 0) throw InputError("ball radius must be nonnegative");
  auto d = bfs_distances(net, center, R);
  VertexSet out;
  for (std::size_t v = 0; v < d.size(); ++v)
    if (d[v] != kUnreached && d[v] <= R) out.push_back(static_cast<VertexId>(v));
  return out;
}

inline double volume(const Network& net, VertexId center, int R) {
  double s = 0;
  for (VertexId y : graph_ball(net, center, R)) s += net.conductance(y);
  return s;
}

// vol(center, r) for r = 0..R_max from one BFS.
inline std::vector<double> volume_profile(const Network& net, VertexId center, int R_max) {
  net.check_vertex(center);
  auto d = bfs_distances(net, center, R_max);
  std::vector<double> vol(static_cast<std::size_t>(R_max) + 1, 0.0);
  for (std::size_t v = 0; v < d.size(); ++v)
    if (d[v] != kUnreached && d[v] <= R_max) vol[d[v]] += net.conductance(static_cast<VertexId>(v));
  for (std::size_t r = 1; r < vol.size(); ++r) vol[r] += vol[r - 1];
  return vol;
}

// Distance from x to the nearest boundary-flagged vertex, or -1 when none
// is reachable. Balls of radius below this value are exact.
inline int boundary_distance(const Network& net, VertexId x) {
  if (!net.has_boundary()) return kUnreached;
  auto d = bfs_distances(net, x);
  int best = kUnreached;
  for (std::size_t v = 0; v < d.size(); ++v)
    if (net.is_boundary(static_cast<VertexId>(v)) && d[v] != kUnreached && (best == kUnreached || d[v] < best))
      best = d[v];
  return best;
}

// True when B(x, radius) contains no flagged vertex.
inline bool ball_is_clean(const Network& net, VertexId x, int radius) {
  auto d = bfs_distances(net, x, radius);
  for (std::size_t v = 0; v < d.size(); ++v)
    if (d[v] != kUnreached && d[v] <= radius && net.is_boundary(static_cast<VertexId>(v))) return false;
  return true;
}

// Multi-source Dijkstra for the omega pseudometric.
inline std::vector<double> weighted_distances_from(const Network& net, const EdgeWeight& w, const VertexSet& S) {
  std::vector<double> dist(net.size(), kInfinity);
  using Item = std::pair<double, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (VertexId s : S) {
    net.check_vertex(s);
    dist[s] = 0;
    pq.push({0.0, s});
  }
  while (!pq.empty()) {
    auto [d, x] = pq.top();
    pq.pop();
    if (d > dist[x]) continue;
    for (const Incidence& in : net.incident(x)) {
      double nd = d + w.values[in.edge];
      if (nd < dist[in.to]) {
        dist[in.to] = nd;
        pq.push({nd, in.to});
      }
    }
  }
  return dist;
}

inline double weighted_distance(const Network& net, const EdgeWeight& w, const VertexSet& S, const VertexSet& T) {
  if (S.empty() || T.empty()) throw InputError("weighted_distance needs nonempty vertex sets");
  w.validate(net);
  for (VertexId t : T) net.check_vertex(t);
  auto d = weighted_distances_from(net, w, S);
  double best = kInfinity;
  for (VertexId t : T) best = std::min(best, d[t]);
  return best;
}

struct Truncation {
  Network net;
  std::vector<VertexId> to_original;  // new id -> original id
  std::vector<VertexId> to_local;     // original id -> new id, -1 if dropped
};

// Induced subnetwork on `keep` (sorted). Relabelling preserves the original
// order. Existing flags carry over and `extra_boundary` (original ids) is added.
inline Truncation induced_subnetwork(const Network& net, const VertexSet& keep, VertexId root,
                                     const VertexSet& extra_boundary = {}) {
  Truncation t;
  t.to_local.assign(net.size(), -1);
  t.to_original = keep;
  for (std::size_t i = 0; i < keep.size(); ++i) t.to_local[keep[i]] = static_cast<VertexId>(i);
  if (t.to_local[root] < 0) throw InputError("root is not inside the kept vertex set");
  std::vector<Edge> edges;
  for (const Edge& e : net.edges())
    if (t.to_local[e.u] >= 0 && t.to_local[e.v] >= 0) edges.push_back({t.to_local[e.u], t.to_local[e.v], e.c});
  std::vector<VertexId> bd;
  for (VertexId v : keep)
    if (net.is_boundary(v)) bd.push_back(t.to_local[v]);
  for (VertexId v : extra_boundary)
    if (t.to_local[v] >= 0) bd.push_back(t.to_local[v]);
  bd = make_set(std::move(bd));
  VertexId r = t.to_local[root];
  bool root_live = false;
  for (const Edge& e : edges)
    if ((e.u == r || e.v == r) && e.c > 0) root_live = true;
  if (!root_live) throw InputError("root is isolated in the induced subnetwork");
  t.net = Network(keep.size(), std::move(edges), r, bd);
  return t;
}

// Induced subnetwork on B(root, R); vertices at distance exactly R flagged.
inline Truncation truncate_to_ball(const Network& net, int R) {
  if (R < 1) throw InputError("truncation radius must be at least 1");
  auto d = bfs_distances(net, net.root(), R);
  VertexSet keep, rim;
  for (std::size_t v = 0; v < d.size(); ++v)
    if (d[v] != kUnreached && d[v] <= R) {
      keep.push_back(static_cast<VertexId>(v));
      if (d[v] == R) rim.push_back(static_cast<VertexId>(v));
    }
  return induced_subnetwork(net, keep, net.root(), rim);
}

}  // namespace exponent_lab
