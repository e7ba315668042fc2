#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "exponent_lab/network.hpp"
#include "exponent_lab/resistance.hpp"
#include "exponent_lab/rng.hpp"

namespace exponent_lab {

enum class Membership { no, yes, unknown };

inline const char* membership_name(Membership m) {
  return m == Membership::yes ? "yes" : m == Membership::no ? "no" : "unknown";
}

// ---------------------------------------------------------------- nets

struct NetSample {
  int R = 0;
  double R_prime = 0;
  double lambda = 0;
  std::uint64_t seed = 0;
  VertexSet selected;
  std::vector<char> marks;  // u_e per edge
};

// Approximate net U_{R,R'}(lambda) with R' = 5 R^{1+eps}: each edge kept
// independently with probability min(1, lambda c(e) / gamma(e)), where
// gamma(e) = max{vol(y,R) : d(e,y) <= 2R'}.
class NetSampler {
 public:
  NetSampler(const Network& net, int R, double eps, double lambda, const VertexSet& audited)
      : net_(&net), R_(R), eps_(eps), lambda_(lambda) {
    if (R < 2) throw InputError("net scale R must be >= 2");
    if (!(eps > 0 && eps < 1)) throw InputError("epsilon must lie in (0,1)");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    R_prime_ = 5.0 * std::pow(double(R), 1.0 + eps);
    for (VertexId x : audited)
      if (!ball_is_clean(net, x, floor_radius(3 * R_prime_)))
        throw ContaminationError("ball B(" + std::to_string(x) + ", 3R') with R'=" + std::to_string(R_prime_) +
                                 " reaches the truncation boundary at scale R=" + std::to_string(R));
    const std::size_t n = net.size();
    volR_.resize(n);
    for (std::size_t v = 0; v < n; ++v) volR_[v] = volume(net, VertexId(v), R);
    const int reach = floor_radius(2 * R_prime_);
    std::vector<double> near_max(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) near_max[v] = max_over_ball(VertexId(v), reach);
    prob_.resize(net.edge_count());
    for (std::size_t i = 0; i < net.edge_count(); ++i) {
      const Edge& e = net.edges()[i];
      double gamma = std::max(near_max[e.u], near_max[e.v]);
      prob_[i] = gamma > 0 ? std::min(1.0, lambda * e.c / gamma) : 0.0;
    }
  }

  double R_prime() const { return R_prime_; }
  const std::vector<double>& probabilities() const { return prob_; }

  NetSample sample(std::uint64_t seed) const {
    NetSample s;
    s.R = R_;
    s.R_prime = R_prime_;
    s.lambda = lambda_;
    s.seed = seed;
    s.marks.assign(prob_.size(), 0);
    Rng rng = make_rng(seed, {0x4e37, std::uint64_t(R_)});
    std::vector<VertexId> sel;
    for (std::size_t i = 0; i < prob_.size(); ++i) {
      double u = uniform01(rng);
      if (u < prob_[i]) {
        s.marks[i] = 1;
        sel.push_back(net_->edges()[i].u);
        sel.push_back(net_->edges()[i].v);
      }
    }
    s.selected = make_set(std::move(sel));
    return s;
  }

  // Upper bound on Pr[x in U].
  double inclusion_bound(VertexId x) const {
    double m = max_over_ball(x, floor_radius(R_prime_));
    return m > 0 ? lambda_ * net_->conductance(x) / m : 1.0;
  }

  // Upper bound on Pr[d(x,U) > r] for 1 <= r <= R.
  double miss_bound(VertexId x, int r) const {
    double big = volume(*net_, x, floor_radius(3 * R_prime_));
    return std::exp(-lambda_ * volume(*net_, x, r) / big);
  }

 private:
  double max_over_ball(VertexId x, int radius) const {
    auto d = bfs_distances(*net_, x, radius);
    double m = 0;
    for (std::size_t v = 0; v < d.size(); ++v)
      if (d[v] != kUnreached && d[v] <= radius) m = std::max(m, volR_[v]);
    return m;
  }

  const Network* net_;
  int R_;
  double eps_, lambda_, R_prime_ = 0;
  std::vector<double> volR_;
  std::vector<double> prob_;
};

inline NetSample sample_net(const Network& net, int R, double eps, double lambda, std::uint64_t seed) {
  return NetSampler(net, R, eps, lambda, {net.root()}).sample(seed);
}

// ---------------------------------------------------- controlled geometry

struct GeometryClass {
  double epsilon = 0;
  int R = 0;
  double d_star = 0;
  Membership in_S = Membership::unknown;
  Membership in_S_prime = Membership::unknown;
  // Both sides of each defining inequality, for reporting.
  double s_mod_lhs = 0, s_mod_rhs = 0, s_vol_lhs = 0, s_vol_rhs = 0;
  double sp_mod_lhs = 0, sp_mod_rhs = 0;
};

// Membership tests for one scale, caching vol(., R) and the annular
// solves so that a weight construction can query many centres cheaply.
class ScaleGeometry {
 public:
  ScaleGeometry(const Network& net, double eps, int R, double d_star, const SolverOptions& opt = {})
      : net_(&net), eps_(eps), R_(R), d_star_(d_star), opt_(opt) {
    if (R < 2) throw InputError("scale R must be >= 2");
    if (!(eps > 0 && eps < 1)) throw InputError("epsilon must lie in (0,1)");
    Rp_ = std::pow(double(R), 1.0 + eps);
    volR_.assign(net.size(), -1.0);
    VertexSet bd = net.boundary();
    to_boundary_ = bd.empty() ? std::vector<int>(net.size(), kUnreached) : bfs_distances(net, bd);
  }

  double R_power() const { return Rp_; }

  // False if B(x, radius) meets a flagged vertex.
  bool clean(VertexId x, int radius) const {
    int d = to_boundary_[x];
    return d == kUnreached || d > radius;
  }

  double vol_R(VertexId y) {
    if (volR_[y] < 0) volR_[y] = volume(*net_, y, R_);
    return volR_[y];
  }

  // x in S(eps, R)
  Membership in_S(VertexId x, GeometryClass* diag = nullptr) {
    if (!clean(x, floor_radius(15 * Rp_))) return Membership::unknown;
    auto vol = volume_profile(*net_, x, floor_radius(15 * Rp_));
    auto v = [&](double r) { return vol[std::size_t(std::min<int>(floor_radius(r), int(vol.size()) - 1))]; };
    double M = annulus(x, 2 * R_, floor_radius(Rp_));
    double lhs1 = (1 + v(5 * Rp_)) / (v(R_) * v(R_)) * M;
    double rhs1 = std::pow(double(R_), -d_star_ + 2 * eps_);
    double lhs2 = v(R_ - 1) / v(15 * Rp_);
    double rhs2 = d_star_ * std::pow(double(R_), -2 * eps_) * std::log(double(R_));
    if (diag) {
      diag->s_mod_lhs = lhs1, diag->s_mod_rhs = rhs1;
      diag->s_vol_lhs = lhs2, diag->s_vol_rhs = rhs2;
    }
    return lhs1 <= rhs1 && lhs2 >= rhs2 ? Membership::yes : Membership::no;
  }

  // z in S'(eps, R); the extremal weight of M(z, R, 2R^{1+eps}) is kept.
  Membership in_S_prime(VertexId z, GeometryClass* diag = nullptr, EdgeWeight* extremal = nullptr) {
    if (!clean(z, floor_radius(4 * Rp_))) return Membership::unknown;
    double big = volume(*net_, z, floor_radius(4 * Rp_));
    double maxvol = 0;
    for (VertexId y : graph_ball(*net_, z, R_)) maxvol = std::max(maxvol, vol_R(y));
    int outer = floor_radius(2 * Rp_);
    double M = annulus(z, R_, outer, extremal);
    double lhs = (1 + big) / (maxvol * maxvol) * M;
    double rhs = std::pow(double(R_), -d_star_ + 2 * eps_);
    if (diag) diag->sp_mod_lhs = lhs, diag->sp_mod_rhs = rhs;
    return lhs <= rhs ? Membership::yes : Membership::no;
  }

 private:
  // Mod(B(x,r) <-> outside B(x,R)); infinite when the two sets touch.
  double annulus(VertexId x, int r, int R, EdgeWeight* extremal = nullptr) {
    if (r >= R) return kInfinity;
    auto d = bfs_distances(*net_, x, R + 1);
    if (std::find(d.begin(), d.end(), R + 1) == d.end()) {  // nothing outside: no paths to block
      if (extremal) extremal->values.assign(net_->edge_count(), 0.0);
      return 0.0;
    }
    AnnulusResult a = annular_modulus(*net_, x, r, R, opt_);
    if (extremal) *extremal = std::move(a.extremal);
    return a.value;
  }

  const Network* net_;
  double eps_;
  int R_;
  double d_star_;
  SolverOptions opt_;
  double Rp_ = 0;
  std::vector<double> volR_;
  std::vector<int> to_boundary_;
};

// Strict form: contamination is an error rather than "unknown".
inline GeometryClass classify_geometry(const Network& net, VertexId x, double eps, int R, double d_star,
                                       const SolverOptions& opt = {}) {
  net.check_vertex(x);
  ScaleGeometry geo(net, eps, R, d_star, opt);
  GeometryClass g;
  g.epsilon = eps;
  g.R = R;
  g.d_star = d_star;
  g.in_S = geo.in_S(x, &g);
  g.in_S_prime = geo.in_S_prime(x, &g);
  if (g.in_S == Membership::unknown || g.in_S_prime == Membership::unknown)
    throw ContaminationError("geometry test at vertex " + std::to_string(x) + ", R=" + std::to_string(R) +
                             " needs balls of radius up to 15 R^{1+eps} = " + std::to_string(15 * geo.R_power()) +
                             " that reach the truncation boundary");
  return g;
}

// -------------------------------------------------------- stretch weights

struct ScaleWeight {
  int R = 0;
  double epsilon = 0, d_star = 0, lambda = 0;
  EdgeWeight omega;
  Membership root_in_S = Membership::unknown;
  std::size_t net_size = 0;        // |U|
  std::size_t gated_centres = 0;   // z in U that passed the S' gate
  std::size_t indicator_edges = 0; // edges carrying the indicator term
  bool separation_checked = false;
  double min_far_distance = kInfinity;  // min dist_omega(rho, x) over d(rho,x) >= 3 R^{1+eps}
};

// omega_R = sum over z in U of the gated extremal annulus weights, plus the
// indicator of edges outside B(U,R) with an endpoint in S(eps,R).
inline ScaleWeight build_scale_weight(const Network& net, int R, double eps, double d_star,
                                      std::optional<double> lambda, std::uint64_t seed,
                                      const SolverOptions& opt = {}) {
  ScaleWeight out;
  out.R = R;
  out.epsilon = eps;
  out.d_star = d_star;
  out.lambda = lambda ? *lambda : std::pow(double(R), 2 * eps);
  NetSampler sampler(net, R, eps, out.lambda, {});
  NetSample U = sampler.sample(seed);
  out.net_size = U.selected.size();
  ScaleGeometry geo(net, eps, R, d_star, opt);
  const double Rp = geo.R_power();

  out.omega.values.assign(net.edge_count(), 0.0);
  EdgeWeight ext;
  for (VertexId z : U.selected) {
    if (geo.in_S_prime(z, nullptr, &ext) != Membership::yes) continue;
    ++out.gated_centres;
    for (std::size_t i = 0; i < ext.values.size(); ++i) out.omega.values[i] += ext.values[i];
  }

  std::vector<int> toU = U.selected.empty() ? std::vector<int>(net.size(), kUnreached) : bfs_distances(net, U.selected);
  auto far = [&](VertexId v) { return toU[v] == kUnreached || toU[v] > R; };
  std::vector<signed char> sm(net.size(), -1);
  auto member = [&](VertexId v) {
    if (sm[v] < 0) sm[v] = geo.in_S(v) == Membership::yes;
    return sm[v] == 1;
  };
  for (std::size_t i = 0; i < net.edge_count(); ++i) {
    const Edge& e = net.edges()[i];
    if (!(far(e.u) || far(e.v))) continue;
    if (member(e.u) || member(e.v)) {
      out.omega.values[i] += 1.0;
      ++out.indicator_edges;
    }
  }

  out.root_in_S = geo.in_S(net.root());
  if (out.root_in_S == Membership::yes) {
    out.separation_checked = true;
    auto hop = bfs_distances(net, net.root());
    auto dw = weighted_distances_from(net, out.omega, {net.root()});
    for (std::size_t x = 0; x < net.size(); ++x)
      if (hop[x] != kUnreached && hop[x] >= 3 * Rp) out.min_far_distance = std::min(out.min_far_distance, dw[x]);
    if (out.min_far_distance < 1 - 1e-9)
      throw NumericalError("separation failed at scale R=" + std::to_string(R) +
                           ": dist_omega(root, far vertex) = " + std::to_string(out.min_far_distance));
  }
  return out;
}

struct MultiscaleWeight {
  double epsilon = 0, d_star = 0;
  int k_max = 0;
  EdgeWeight omega;
  std::vector<ScaleWeight> scales;
  std::vector<int> growth_R;             // dyadic radii
  std::vector<double> growth_distance;   // dist_omega(rho, outside B(rho, R))
};

// omega = sqrt( sum_k 2^{k(d*-4eps)} / k^2 * omega_{2^k}^2 ).
inline MultiscaleWeight build_multiscale_weight(const Network& net, double eps, double d_star, int k_max,
                                                std::uint64_t seed, const SolverOptions& opt = {}) {
  if (k_max < 1) throw InputError("k_max must be >= 1");
  int safe = floor_radius(std::pow(2.0, k_max * (1 + eps)));
  if (!ball_is_clean(net, net.root(), safe))
    throw ContaminationError("B(root, 2^{k_max(1+eps)}) with radius " + std::to_string(safe) +
                             " reaches the truncation boundary; lower k_max or enlarge the network");
  MultiscaleWeight out;
  out.epsilon = eps;
  out.d_star = d_star;
  out.k_max = k_max;
  std::vector<double> sq(net.edge_count(), 0.0);
  auto hop = bfs_distances(net, net.root());
  for (int k = 1; k <= k_max; ++k) {
    ScaleWeight w = build_scale_weight(net, 1 << k, eps, d_star, std::nullopt, derive_seed(seed, {std::uint64_t(k)}), opt);
    double coef = std::pow(2.0, k * (d_star - 4 * eps)) / (double(k) * k);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += coef * w.omega.values[i] * w.omega.values[i];
    out.scales.push_back(std::move(w));
  }
  out.omega.values.resize(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i) out.omega.values[i] = std::sqrt(sq[i]);

  auto dw = weighted_distances_from(net, out.omega, {net.root()});
  for (int k = 1; k <= k_max; ++k) {
    if (out.scales[std::size_t(k - 1)].root_in_S != Membership::yes) continue;
    double need = std::pow(2.0, k * (d_star - 4 * eps) / 2) / k;
    double reach = 3 * std::pow(2.0, k * (1 + eps));
    for (std::size_t x = 0; x < net.size(); ++x)
      if (hop[x] != kUnreached && hop[x] >= reach && dw[x] < need * (1 - 1e-9))
        throw NumericalError("multiscale weight too short at vertex " + std::to_string(x) + " for scale k=" +
                             std::to_string(k));
  }
  int ecc = *std::max_element(hop.begin(), hop.end());
  for (int R = 1; R < ecc; R *= 2) {
    double m = kInfinity;
    for (std::size_t x = 0; x < net.size(); ++x)
      if (hop[x] > R) m = std::min(m, dw[x]);
    out.growth_R.push_back(R);
    out.growth_distance.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------- partitions

// Independent Exp(mu_x) clocks; zero or negative rates are replaced by 1.
inline std::vector<double> exp_clocks(const std::vector<double>& mu, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xbe7a});
  std::vector<double> beta(mu.size());
  for (std::size_t x = 0; x < mu.size(); ++x) {
    double rate = mu[x] > 0 ? mu[x] : 1.0;
    beta[x] = -std::log1p(-uniform01(rng)) / rate;
  }
  return beta;
}

struct Partition {
  double delta = 0;
  double radius = 0;               // R uniform in [delta/4, delta/2)
  std::vector<VertexId> labels;    // l(x)
  std::vector<int> cluster;        // component id of x in the kept-edge graph
  std::vector<VertexSet> clusters;

  bool kept(const Edge& e) const { return labels[e.u] == labels[e.v]; }
};

// l(x) = argmin{beta_y : y in B(x,R)}; clusters are components of the
// edges whose endpoints share a label.
inline Partition exp_clock_partition(const Network& net, double delta, const std::vector<double>& mu,
                                     std::uint64_t seed) {
  if (!(delta > 0) || !std::isfinite(delta)) throw InputError("delta must be a positive real");
  if (mu.size() != net.size()) throw InputError("mu must have one rate per vertex");
  Partition p;
  p.delta = delta;
  Rng rng = make_rng(seed, {0x7a11});
  p.radius = delta / 4 + uniform01(rng) * (delta / 4);
  const int r = floor_radius(p.radius);
  auto beta = exp_clocks(mu, seed);
  std::vector<VertexId> order(net.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](VertexId a, VertexId b) { return beta[a] < beta[b]; });
  p.labels.assign(net.size(), -1);
  std::size_t unlabeled = net.size();
  // local BFS with reused buffers; balls are small next to the network
  std::vector<VertexId> stamp(net.size(), -1);
  std::vector<std::pair<VertexId, int>> queue;
  for (VertexId y : order) {
    if (unlabeled == 0) break;
    queue.assign(1, {y, 0});
    stamp[y] = y;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      auto [x, d] = queue[head];
      if (p.labels[x] < 0) {
        p.labels[x] = y;
        --unlabeled;
      }
      if (d == r) continue;
      for (const Incidence& in : net.incident(x))
        if (stamp[in.to] != y) {
          stamp[in.to] = y;
          queue.emplace_back(in.to, d + 1);
        }
    }
  }
  p.cluster.assign(net.size(), -1);
  for (std::size_t s = 0; s < net.size(); ++s) {
    if (p.cluster[s] >= 0) continue;
    int id = int(p.clusters.size());
    p.clusters.emplace_back();
    std::vector<VertexId> stack{VertexId(s)};
    p.cluster[s] = id;
    while (!stack.empty()) {
      VertexId x = stack.back();
      stack.pop_back();
      p.clusters[std::size_t(id)].push_back(x);
      for (const Incidence& in : net.incident(x))
        if (p.cluster[in.to] < 0 && p.labels[in.to] == p.labels[x]) {
          p.cluster[in.to] = id;
          stack.push_back(in.to);
        }
    }
    p.clusters[std::size_t(id)] = make_set(std::move(p.clusters[std::size_t(id)]));
  }
  return p;
}

inline Partition exp_clock_partition(const Network& net, double delta, std::uint64_t seed) {
  return exp_clock_partition(net, delta, net.conductances(), seed);
}

// Largest graph distance (in the whole network) between two cluster members.
inline int cluster_diameter(const Network& net, const VertexSet& cluster, int cap) {
  int diam = 0;
  for (VertexId x : cluster) {
    auto d = bfs_distances(net, x, cap + 1);
    for (VertexId y : cluster) diam = std::max(diam, d[y] == kUnreached ? cap + 1 : d[y]);
  }
  return diam;
}

}  // namespace exponent_lab
