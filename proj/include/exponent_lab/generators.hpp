#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "exponent_lab/io.hpp"
#include "exponent_lab/network.hpp"
#include "exponent_lab/rng.hpp"

namespace exponent_lab {

enum class Family { path, cycle, lattice, tree, gasket, gff_lattice, percolation };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::path: return "path";
    case Family::cycle: return "cycle";
    case Family::lattice: return "lattice";
    case Family::tree: return "tree";
    case Family::gasket: return "gasket";
    case Family::gff_lattice: return "gff";
    case Family::percolation: return "percolation";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::path, Family::cycle, Family::lattice, Family::tree, Family::gasket, Family::gff_lattice,
                   Family::percolation})
    if (s == family_name(f)) return f;
  if (s == "gff_lattice") return Family::gff_lattice;
  if (s == "sierpinski_gasket") return Family::gasket;
  throw InputError("unknown family '" + s + "' (path, cycle, lattice, tree, gasket, gff, percolation)");
}

// Critical GFF coupling: the d_f = 2 + 2 (gamma / gamma_c)^2 scale.
inline double gff_gamma_c() { return std::sqrt(std::numbers::pi / 2.0); }

struct GeneratorSpec {
  Family family = Family::path;
  int dim = 2;
  int n = 8;  // half-width N for path/lattice/gff/percolation, length for cycle
  int level = 4;
  int branching = 2;
  int depth = 4;
  double gamma = 1.0;
  double p = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_vertices = 4'000'000;
  int max_retries = 1000;

  void validate() const {
    switch (family) {
      case Family::path:
        if (n < 1) throw InputError("n must be >= 1 for a path");
        break;
      case Family::cycle:
        if (n < 3) throw InputError("n must be >= 3 for a cycle");
        break;
      case Family::lattice:
        if (dim < 1 || dim > 3) throw InputError("dim must be 1, 2 or 3");
        if (n < 1) throw InputError("n (half-width) must be >= 1");
        break;
      case Family::tree:
        if (branching < 1) throw InputError("branching must be >= 1");
        if (depth < 1) throw InputError("depth must be >= 1");
        break;
      case Family::gasket:
        if (level < 0 || level > 10) throw InputError("level must lie in 0..10");
        break;
      case Family::gff_lattice:
        if (n < 2) throw InputError("n (half-width) must be >= 2 for the GFF lattice");
        if (!(gamma > 0) || !std::isfinite(gamma)) throw InputError("gamma must be > 0");
        break;
      case Family::percolation:
        if (dim < 1 || dim > 3) throw InputError("dim must be 1, 2 or 3");
        if (n < 1) throw InputError("n (half-width) must be >= 1");
        if (!(p > 0 && p <= 1)) throw InputError("p must lie in (0, 1]");
        if (max_retries < 1) throw InputError("max_retries must be >= 1");
        break;
    }
  }

  json to_json() const {
    json j{{"family", family_name(family)}, {"seed", seed}};
    switch (family) {
      case Family::path:
      case Family::cycle: j["n"] = n; break;
      case Family::lattice: j["dim"] = dim; j["n"] = n; break;
      case Family::tree: j["branching"] = branching; j["depth"] = depth; break;
      case Family::gasket: j["level"] = level; break;
      case Family::gff_lattice: j["n"] = n; j["gamma"] = gamma; break;
      case Family::percolation: j["dim"] = dim; j["n"] = n; j["p"] = p; break;
    }
    return j;
  }
};

namespace detail {

inline void check_budget(double count, std::size_t cap) {
  if (count > static_cast<double>(cap))
    throw ResourceError("network would have " + std::to_string(static_cast<long long>(count)) +
                        " vertices, above the cap of " + std::to_string(cap));
}

// Box [-N,N]^d with nearest-neighbour edges; ids in row-major coordinate order.
struct Box {
  int dim, N, M;
  std::size_t count;
  Box(int d, int n) : dim(d), N(n), M(2 * n + 1), count(1) {
    for (int k = 0; k < d; ++k) count *= static_cast<std::size_t>(M);
  }
  std::size_t stride(int k) const {
    std::size_t s = 1;
    for (int j = k + 1; j < dim; ++j) s *= static_cast<std::size_t>(M);
    return s;
  }
  int coord(std::size_t v, int k) const { return static_cast<int>((v / stride(k)) % M) - N; }
  VertexId origin() const {
    std::size_t v = 0;
    for (int k = 0; k < dim; ++k) v += static_cast<std::size_t>(N) * stride(k);
    return static_cast<VertexId>(v);
  }
  bool on_face(std::size_t v) const {
    for (int k = 0; k < dim; ++k)
      if (std::abs(coord(v, k)) == N) return true;
    return false;
  }
  // Each undirected edge once, as (v, v + stride(k)).
  template <class Fn>
  void for_each_edge(Fn&& fn) const {
    for (std::size_t v = 0; v < count; ++v)
      for (int k = 0; k < dim; ++k)
        if (coord(v, k) < N) fn(static_cast<VertexId>(v), static_cast<VertexId>(v + stride(k)));
  }
  std::vector<VertexId> faces() const {
    std::vector<VertexId> out;
    for (std::size_t v = 0; v < count; ++v)
      if (on_face(v)) out.push_back(static_cast<VertexId>(v));
    return out;
  }
};

}  // namespace detail

inline Network gen_lattice(int d, int N, std::size_t max_vertices = 4'000'000) {
  GeneratorSpec{Family::lattice, d, N}.validate();
  detail::check_budget(std::pow(2.0 * N + 1, d), max_vertices);
  detail::Box box(d, N);
  std::vector<Edge> edges;
  edges.reserve(box.count * d);
  box.for_each_edge([&](VertexId u, VertexId v) { edges.push_back({u, v, 1.0}); });
  return Network(box.count, std::move(edges), box.origin(), box.faces());
}

// Segment [-N, N] of Z; vertex id k is the point k - N.
inline Network gen_path(int N) { return gen_lattice(1, N); }

inline Network gen_cycle(int n) {
  GeneratorSpec{Family::cycle, 1, n}.validate();
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, 1.0});
  return Network(static_cast<std::size_t>(n), std::move(edges), 0);
}

inline Network gen_tree(int b, int depth, std::size_t max_vertices = 4'000'000) {
  GeneratorSpec s;
  s.family = Family::tree;
  s.branching = b;
  s.depth = depth;
  s.validate();
  double count = b == 1 ? depth + 1.0 : (std::pow(double(b), depth + 1) - 1) / (b - 1);
  detail::check_budget(count, max_vertices);
  std::size_t n = static_cast<std::size_t>(std::llround(count));
  std::size_t internal = b == 1 ? depth : (n - static_cast<std::size_t>(std::llround(std::pow(double(b), depth))));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < internal; ++i)
    for (int k = 1; k <= b; ++k)
      edges.push_back({static_cast<VertexId>(i), static_cast<VertexId>(i * b + k), 1.0});
  std::vector<VertexId> leaves;
  for (std::size_t v = internal; v < n; ++v) leaves.push_back(static_cast<VertexId>(v));
  return Network(n, std::move(edges), 0, leaves);
}

// Level-L gasket in skew coordinates: unit triangle at (a,b) spans
// (a,b), (a+1,b), (a,b+1). Root is the corner (0,0); the other two corners
// are flagged.
inline Network gen_gasket(int L) {
  GeneratorSpec s;
  s.family = Family::gasket;
  s.level = L;
  s.validate();
  std::vector<std::pair<int, int>> tris{{0, 0}};
  for (int l = 0; l < L; ++l) {
    int sh = 1 << l;
    std::size_t m = tris.size();
    for (std::size_t i = 0; i < m; ++i) tris.push_back({tris[i].first + sh, tris[i].second});
    for (std::size_t i = 0; i < m; ++i) tris.push_back({tris[i].first, tris[i].second + sh});
  }
  const long long side = (1LL << L) + 1;
  auto key = [&](int a, int b) { return static_cast<long long>(a) * side + b; };
  std::vector<long long> keys;
  keys.reserve(tris.size() * 3);
  for (auto [a, b] : tris) {
    keys.push_back(key(a, b));
    keys.push_back(key(a + 1, b));
    keys.push_back(key(a, b + 1));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  auto id = [&](int a, int b) {
    return static_cast<VertexId>(std::lower_bound(keys.begin(), keys.end(), key(a, b)) - keys.begin());
  };
  std::vector<Edge> edges;
  edges.reserve(tris.size() * 3);
  for (auto [a, b] : tris) {
    VertexId p = id(a, b), q = id(a + 1, b), r = id(a, b + 1);
    edges.push_back({p, q, 1.0});
    edges.push_back({q, r, 1.0});
    edges.push_back({r, p, 1.0});
  }
  int far = 1 << L;
  return Network(keys.size(), std::move(edges), id(0, 0), make_set({id(far, 0), id(0, far)}));
}

// Samples the zero-boundary discrete GFF on [-N,N]^2: covariance equals the
// Green kernel of simple random walk killed on leaving the box, i.e. 4 A^{-1}
// with A = 4I - adjacency. One sparse Cholesky factor is reused per N.
class GffSampler {
 public:
  explicit GffSampler(int N) : box_(2, N) {
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trip;
    trip.reserve(box_.count * 5);
    for (std::size_t v = 0; v < box_.count; ++v) trip.emplace_back(int(v), int(v), 4.0);
    box_.for_each_edge([&](VertexId u, VertexId v) {
      trip.emplace_back(u, v, -1.0);
      trip.emplace_back(v, u, -1.0);
    });
    Eigen::SparseMatrix<double> A(int(box_.count), int(box_.count));
    A.setFromTriplets(trip.begin(), trip.end());
    llt_.compute(A);
    if (llt_.info() != Eigen::Success)
      throw NumericalError("Cholesky factorization of the box Dirichlet Laplacian failed (N=" + std::to_string(N) + ")");
  }

  int half_width() const { return box_.N; }
  std::size_t size() const { return box_.count; }

  // Field on the box before pinning at the origin.
  std::vector<double> sample_field(std::uint64_t seed) const {
    Rng rng = make_rng(seed, {0x6666});
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(static_cast<Eigen::Index>(box_.count));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    // P A P^T = L L^T, so x = P^T L^{-T} z has covariance A^{-1}.
    Eigen::VectorXd y = llt_.matrixU().solve(z);
    Eigen::VectorXd x = llt_.permutationPinv() * y;
    std::vector<double> eta(box_.count);
    for (std::size_t i = 0; i < box_.count; ++i) eta[i] = 2.0 * x[static_cast<Eigen::Index>(i)];
    return eta;
  }

  Network network(const std::vector<double>& eta, double gamma) const {
    double pin = eta[box_.origin()];
    std::vector<Edge> edges;
    edges.reserve(2 * box_.count);
    box_.for_each_edge([&](VertexId u, VertexId v) {
      double c = std::exp(gamma * ((eta[u] - pin) + (eta[v] - pin)));
      if (!std::isfinite(c)) throw NumericalError("GFF conductance overflow; gamma too large for this box");
      edges.push_back({u, v, c});
    });
    return Network(box_.count, std::move(edges), box_.origin(), box_.faces());
  }

 private:
  detail::Box box_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

inline std::shared_ptr<const GffSampler> gff_sampler(int N) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const GffSampler>> cache;
  std::lock_guard lk(mu);
  auto it = cache.find(N);
  if (it != cache.end()) return it->second;
  auto s = std::make_shared<const GffSampler>(N);
  cache.emplace(N, s);
  return s;
}

// Conductance on {u,v} is exp(gamma (eta_u + eta_v)) with eta pinned to 0
// at the origin.
inline Network gen_gff_lattice(int N, double gamma, std::uint64_t seed, std::size_t max_vertices = 4'000'000) {
  GeneratorSpec s;
  s.family = Family::gff_lattice;
  s.n = N;
  s.gamma = gamma;
  s.validate();
  detail::check_budget(std::pow(2.0 * N + 1, 2), max_vertices);
  auto sampler = gff_sampler(N);
  return sampler->network(sampler->sample_field(seed), gamma);
}

// Open cluster of the origin under Bernoulli(p) bond percolation on the box,
// resampled until it has at least two vertices.
inline Network gen_percolation_cluster(int N, double p, std::uint64_t seed, int dim = 2, int max_retries = 1000,
                                       std::size_t max_vertices = 4'000'000) {
  GeneratorSpec s;
  s.family = Family::percolation;
  s.dim = dim;
  s.n = N;
  s.p = p;
  s.max_retries = max_retries;
  s.validate();
  detail::check_budget(std::pow(2.0 * N + 1, dim), max_vertices);
  detail::Box box(dim, N);
  std::vector<std::pair<VertexId, VertexId>> all;
  box.for_each_edge([&](VertexId u, VertexId v) { all.push_back({u, v}); });
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Rng rng = make_rng(seed, {0x9e7c, static_cast<std::uint64_t>(attempt)});
    std::vector<char> open(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) open[i] = p >= 1.0 || uniform01(rng) < p;
    std::vector<std::vector<std::pair<VertexId, std::size_t>>> adj(box.count);
    for (std::size_t i = 0; i < all.size(); ++i)
      if (open[i]) {
        adj[all[i].first].push_back({all[i].second, i});
        adj[all[i].second].push_back({all[i].first, i});
      }
    std::vector<char> in(box.count, 0);
    std::vector<VertexId> stack{box.origin()};
    in[box.origin()] = 1;
    std::size_t size = 1;
    while (!stack.empty()) {
      VertexId x = stack.back();
      stack.pop_back();
      for (auto [y, e] : adj[x])
        if (!in[y]) {
          in[y] = 1;
          ++size;
          stack.push_back(y);
        }
    }
    if (size < 2) continue;
    std::vector<VertexId> local(box.count, -1);
    VertexId next = 0;
    std::vector<VertexId> faces;
    for (std::size_t v = 0; v < box.count; ++v)
      if (in[v]) {
        local[v] = next++;
        if (box.on_face(v)) faces.push_back(local[v]);
      }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (open[i] && in[all[i].first]) edges.push_back({local[all[i].first], local[all[i].second], 1.0});
    return Network(static_cast<std::size_t>(next), std::move(edges), local[box.origin()], faces);
  }
  throw ResourceError("origin cluster stayed isolated after " + std::to_string(max_retries) + " percolation samples");
}

inline Network generate(const GeneratorSpec& s) {
  s.validate();
  switch (s.family) {
    case Family::path: return gen_path(s.n);
    case Family::cycle: return gen_cycle(s.n);
    case Family::lattice: return gen_lattice(s.dim, s.n, s.max_vertices);
    case Family::tree: return gen_tree(s.branching, s.depth, s.max_vertices);
    case Family::gasket: return gen_gasket(s.level);
    case Family::gff_lattice: return gen_gff_lattice(s.n, s.gamma, s.seed, s.max_vertices);
    case Family::percolation: return gen_percolation_cluster(s.n, s.p, s.seed, s.dim, s.max_retries, s.max_vertices);
  }
  throw InputError("unknown family");
}

}  // namespace exponent_lab
