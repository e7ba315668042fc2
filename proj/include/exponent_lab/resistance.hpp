#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "exponent_lab/linear_solver.hpp"
#include "exponent_lab/network.hpp"

namespace exponent_lab {

struct Potential {
  std::vector<double> values;
  VertexSet zero_set;
  VertexSet one_set;
  double energy = 0;
  SolveInfo info;
};

inline double dirichlet_energy(const Network& net, const std::vector<double>& g) {
  double e = 0;
  for (const Edge& ed : net.edges()) {
    double d = g[ed.u] - g[ed.v];
    e += ed.c * d * d;
  }
  return e;
}

namespace detail {

inline void check_sets(const Network& net, const VertexSet& S, const VertexSet& T) {
  if (S.empty() || T.empty()) throw InputError("boundary sets S and T must be nonempty");
  for (VertexId v : S) net.check_vertex(v);
  for (VertexId v : T) net.check_vertex(v);
  auto ms = membership(net.size(), S);
  for (VertexId v : T)
    if (ms[v]) throw InputError("S and T overlap at vertex " + std::to_string(v));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace detail

// Harmonic extension with g = 0 on S and g = 1 on T.
inline Potential solve_potential(const Network& net, const VertexSet& S, const VertexSet& T,
                                 const SolverOptions& opt = {}) {
  detail::check_sets(net, S, T);
  std::vector<char> fixed(net.size(), 0);
  std::vector<double> val(net.size(), 0.0);
  for (VertexId v : S) fixed[v] = 1;
  for (VertexId v : T) {
    fixed[v] = 1;
    val[v] = 1.0;
  }
  Potential p;
  p.values = solve_dirichlet(net, fixed, val, {}, opt, p.info);
  p.zero_set = S;
  p.one_set = T;
  p.energy = dirichlet_energy(net, p.values);
  return p;
}

// Infinity when S and T are not joined by positive-conductance edges.
inline double effective_resistance(const Network& net, const VertexSet& S, const VertexSet& T,
                                   const SolverOptions& opt = {}) {
  double e = solve_potential(net, S, T, opt).energy;
  return e > 0 ? 1.0 / e : kInfinity;
}

struct ModulusResult {
  double value = 0;  // equals 1 / R_eff
  double reff = kInfinity;
  EdgeWeight extremal;
  SolveInfo info;
};

// Mod(S <-> T) with extremal weight omega(e) = |g(x) - g(y)|. The duality
// identities are re-checked on the way out.
inline ModulusResult modulus(const Network& net, const VertexSet& S, const VertexSet& T, const SolverOptions& opt = {}) {
  Potential p = solve_potential(net, S, T, opt);
  ModulusResult m;
  m.info = p.info;
  m.value = p.energy;
  m.reff = p.energy > 0 ? 1.0 / p.energy : kInfinity;
  m.extremal.values.resize(net.edge_count());
  double mass = 0;
  for (std::size_t i = 0; i < net.edge_count(); ++i) {
    const Edge& e = net.edges()[i];
    m.extremal.values[i] = std::abs(p.values[e.u] - p.values[e.v]);
    mass += e.c * m.extremal.values[i] * m.extremal.values[i];
  }
  double dist = weighted_distance(net, m.extremal, S, T);
  if (dist < 1 - 1e-6)
    throw NumericalError("extremal weight is not admissible: dist(S,T) = " + std::to_string(dist));
  if (m.value > 0 && detail::rel_diff(mass, m.value) > 1e-6)
    throw NumericalError("extremal weight mass " + std::to_string(mass) + " differs from modulus " +
                         std::to_string(m.value));
  return m;
}

struct AnnulusResult {
  VertexId center = 0;
  int r = 0;
  int R = 0;
  double value = 0;
  double reff = kInfinity;
  EdgeWeight extremal;  // indexed by the input network's edges
  SolveInfo info;
};

namespace detail {

// Induced network on B(x, R+1) after checking it is free of boundary flags.
inline Truncation clean_ball(const Network& net, VertexId x, int R, std::vector<int>& dist_out) {
  net.check_vertex(x);
  dist_out = bfs_distances(net, x, R + 1);
  VertexSet keep;
  bool outer = false;
  for (std::size_t v = 0; v < dist_out.size(); ++v) {
    int d = dist_out[v];
    if (d == kUnreached) continue;
    keep.push_back(VertexId(v));
    if (net.is_boundary(VertexId(v)))
      throw ContaminationError("ball B(" + std::to_string(x) + ", " + std::to_string(R + 1) +
                               ") reaches truncation-boundary vertex " + std::to_string(v) + " (scale R=" +
                               std::to_string(R) + "); enlarge the network");
    if (d == R + 1) outer = true;
  }
  if (!outer)
    throw InputError("complement of B(" + std::to_string(x) + ", " + std::to_string(R) + ") is empty");
  return induced_subnetwork(net, keep, x);
}

}  // namespace detail

// M(x, r, R) = Mod(B(x,r) <-> complement of B(x,R)), solved on B(x, R+1).
inline AnnulusResult annular_modulus(const Network& net, VertexId x, int r, int R, const SolverOptions& opt = {}) {
  if (r < 0 || r >= R)
    throw InputError("annulus needs 0 <= r < R (got r=" + std::to_string(r) + ", R=" + std::to_string(R) + ")");
  std::vector<int> dist;
  Truncation t = detail::clean_ball(net, x, R, dist);
  VertexSet S, T;
  for (std::size_t i = 0; i < t.to_original.size(); ++i) {
    int d = dist[t.to_original[i]];
    if (d <= r) S.push_back(VertexId(i));
    if (d == R + 1) T.push_back(VertexId(i));
  }
  ModulusResult m = modulus(t.net, S, T, opt);
  AnnulusResult a;
  a.center = x;
  a.r = r;
  a.R = R;
  a.value = m.value;
  a.reff = m.reff;
  a.info = m.info;
  a.extremal.values.assign(net.edge_count(), 0.0);
  // Edges of the induced network were emitted in input order.
  std::size_t k = 0;
  for (std::size_t i = 0; i < net.edge_count(); ++i) {
    const Edge& e = net.edges()[i];
    if (t.to_local[e.u] >= 0 && t.to_local[e.v] >= 0) a.extremal.values[i] = m.extremal.values[k++];
  }
  return a;
}

struct GreenKernel {
  VertexId source = 0;
  VertexSet killed_off;
  std::vector<double> values;  // g_S(source, y)
  SolveInfo info;
};

// Expected visits to y before leaving S: g_S(x,y) = c_y phi(y) where phi is
// the voltage for unit current into x with V \ S grounded.
inline GreenKernel green_kernel(const Network& net, VertexId x, const VertexSet& S, const SolverOptions& opt = {}) {
  net.check_vertex(x);
  for (VertexId v : S) net.check_vertex(v);
  auto inS = membership(net.size(), S);
  if (!inS[x]) throw InputError("source " + std::to_string(x) + " is not inside S");
  if (S.size() >= net.size()) throw InputError("V \\ S is empty: the walk is never killed");
  if (!(net.conductance(x) > 0)) throw InputError("source " + std::to_string(x) + " has zero conductance");
  std::vector<char> fixed(net.size());
  for (std::size_t v = 0; v < net.size(); ++v) fixed[v] = !inS[v];
  std::vector<double> f(net.size(), 0.0);
  f[x] = 1.0;
  GreenKernel g;
  g.source = x;
  g.killed_off = S;
  std::vector<double> phi = solve_dirichlet(net, fixed, std::vector<double>(net.size(), 0.0), f, opt, g.info);
  g.values.assign(net.size(), 0.0);
  for (VertexId y : S) g.values[y] = net.conductance(y) * phi[y];

  VertexSet outside;
  for (std::size_t v = 0; v < net.size(); ++v)
    if (!inS[v]) outside.push_back(VertexId(v));
  double reff = effective_resistance(net, outside, {x}, opt);
  double expect = net.conductance(x) * reff;
  if (detail::rel_diff(g.values[x], expect) > 1e-7)
    throw NumericalError("Green kernel g(x,x) = " + std::to_string(g.values[x]) + " but c_x R_eff = " +
                         std::to_string(expect));
  return g;
}

struct HittingProbability {
  VertexId center = 0;
  int R = 0;
  std::vector<double> values;  // indexed by the input network; 0 outside B(center, R)
  double energy = 0;
  double reff = kInfinity;     // R_eff(center <-> complement of B(center, R))
};

// Q(y) = Pr_y[hit center before leaving B(center, R)].
inline HittingProbability hitting_probability(const Network& net, VertexId rho, int R, const SolverOptions& opt = {}) {
  if (R < 0) throw InputError("radius must be nonnegative");
  std::vector<int> dist;
  Truncation t = detail::clean_ball(net, rho, R, dist);
  const Network& h = t.net;
  VertexSet outer, ball;
  for (std::size_t i = 0; i < t.to_original.size(); ++i) {
    if (dist[t.to_original[i]] == R + 1)
      outer.push_back(VertexId(i));
    else
      ball.push_back(VertexId(i));
  }
  VertexId c = h.root();
  Potential q = solve_potential(h, outer, {c}, opt);
  HittingProbability out;
  out.center = rho;
  out.R = R;
  out.energy = q.energy;
  out.values.assign(net.size(), 0.0);
  for (VertexId y : ball) out.values[t.to_original[y]] = q.values[y];

  // Cross-check against the Green kernel killed off the ball.
  GreenKernel g = green_kernel(h, c, ball, opt);
  double g00 = g.values[c];
  out.reff = g00 / h.conductance(c);
  for (VertexId y : ball) {
    if (!(h.conductance(y) > 0)) continue;
    double via_green = h.conductance(c) / h.conductance(y) * g.values[y] / g00;
    if (std::abs(via_green - q.values[y]) > 1e-7 * std::max(1.0, std::abs(via_green)))
      throw NumericalError("hitting probability at vertex " + std::to_string(t.to_original[y]) +
                           " disagrees with the Green-kernel formula");
  }
  if (detail::rel_diff(q.energy, 1.0 / out.reff) > 1e-7)
    throw NumericalError("energy of the hitting probability differs from 1/R_eff at scale R=" + std::to_string(R));
  return out;
}

}  // namespace exponent_lab
