#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "exponent_lab/network.hpp"
#include "exponent_lab/parallel.hpp"
#include "exponent_lab/rng.hpp"

namespace exponent_lab {

// Walker's alias tables over each vertex's incidence list, so a step costs
// one 64-bit draw.
class TransitionSampler {
 public:
  explicit TransitionSampler(const Network& net) : net_(&net) {
    const std::size_t n = net.size();
    offset_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) offset_[v + 1] = offset_[v] + net.degree(VertexId(v));
    prob_.assign(offset_[n], 1.0);
    alias_.assign(offset_[n], 0);
    std::vector<double> scaled;
    std::vector<std::uint32_t> small, large;
    for (std::size_t v = 0; v < n; ++v) {
      auto inc = net.incident(VertexId(v));
      const std::size_t k = inc.size();
      double cv = net.conductance(VertexId(v));
      if (k == 0 || !(cv > 0)) continue;
      scaled.assign(k, 0.0);
      small.clear();
      large.clear();
      for (std::size_t j = 0; j < k; ++j) {
        scaled[j] = net.edge(inc[j].edge).c * double(k) / cv;
        (scaled[j] < 1.0 ? small : large).push_back(std::uint32_t(j));
      }
      const std::size_t base = offset_[v];
      while (!small.empty() && !large.empty()) {
        auto s = small.back();
        small.pop_back();
        auto l = large.back();
        prob_[base + s] = scaled[s];
        alias_[base + s] = l;
        scaled[l] -= 1.0 - scaled[s];
        if (scaled[l] < 1.0) {
          large.pop_back();
          small.push_back(l);
        }
      }
      for (auto j : large) prob_[base + j] = 1.0, alias_[base + j] = j;
      for (auto j : small) prob_[base + j] = 1.0, alias_[base + j] = j;
    }
  }

  const Network& network() const { return *net_; }

  // Index into x's incidence list of the next step.
  std::uint32_t pick(VertexId x, std::uint64_t r) const {
    const std::uint64_t k = offset_[x + 1] - offset_[x];
    const std::uint32_t col = std::uint32_t(((r >> 32) * k) >> 32);
    const double coin = double(r & 0xFFFFFFFFULL) * 0x1.0p-32;
    const std::size_t at = offset_[x] + col;
    return coin < prob_[at] ? col : alias_[at];
  }

  VertexId step(VertexId x, Rng& rng) const { return net_->incident(x)[pick(x, rng())].to; }

 private:
  const Network* net_;
  std::vector<std::size_t> offset_;
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

struct WalkConfig {
  std::int64_t n_steps = 1 << 20;  // hard cap on the length of each walk
  std::size_t n_walkers = 1024;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  // Largest n on the displacement grid; -1 means n_steps. Walkers stop once
  // every exit scale is resolved and this horizon is reached.
  std::int64_t disp_horizon = -1;
  int max_R = -1;                  // cap for the exit-radius grid; -1 means no cap

  void validate() const {
    if (n_steps < 1) throw InputError("n_steps must be >= 1");
    if (n_walkers < 1) throw InputError("n_walkers must be >= 1");
  }
};

// Per-walker samples; -1 marks a censored or unresolved sample.
struct WalkStats {
  std::vector<int> R_grid;
  std::vector<std::int64_t> n_grid;
  std::vector<std::vector<std::int64_t>> sigma;  // [scale][walker]
  std::vector<std::vector<int>> max_disp;        // [scale][walker]
  std::size_t walkers = 0;

  static std::size_t resolved(const std::vector<std::int64_t>& s) {
    return std::size_t(std::count_if(s.begin(), s.end(), [](auto v) { return v >= 0; }));
  }
  static std::size_t resolved(const std::vector<int>& s) {
    return std::size_t(std::count_if(s.begin(), s.end(), [](auto v) { return v >= 0; }));
  }
};

inline std::vector<int> dyadic_radii(int lo_exp, int max_value) {
  std::vector<int> out;
  for (int k = lo_exp; k < 31 && (1 << k) <= max_value; ++k) out.push_back(1 << k);
  return out;
}

// Walks from the root: exit times sigma_R over R = 2, 4, ... and running
// maxima M_n over n = 4, 8, .... A sample is kept only if the walk had not
// touched a boundary-flagged vertex before it was determined.
inline WalkStats simulate_walks(const Network& net, const WalkConfig& cfg) {
  cfg.validate();
  const TransitionSampler sampler(net);
  const VertexId rho = net.root();
  const std::vector<int> dist = bfs_distances(net, rho);
  int ecc = 0;
  for (int d : dist) ecc = std::max(ecc, d);
  WalkStats st;
  st.walkers = cfg.n_walkers;
  int rmax = ecc - 1;
  if (cfg.max_R >= 0) rmax = std::min(rmax, cfg.max_R);
  st.R_grid = dyadic_radii(1, rmax);
  const std::int64_t horizon = cfg.disp_horizon < 0 ? cfg.n_steps : std::min(cfg.disp_horizon, cfg.n_steps);
  for (std::int64_t n = 4; n <= horizon; n *= 2) st.n_grid.push_back(n);
  const std::size_t nR = st.R_grid.size(), nn = st.n_grid.size();
  st.sigma.assign(nR, std::vector<std::int64_t>(cfg.n_walkers, -1));
  st.max_disp.assign(nn, std::vector<int>(cfg.n_walkers, -1));

  parallel_for(cfg.n_walkers, worker_count(cfg.threads), [&](std::size_t w) {
    Rng rng = make_rng(cfg.seed, {0x3a1c, w});
    VertexId x = rho;
    int maxd = 0;
    std::size_t kR = 0, kn = 0;
    for (std::int64_t t = 0;; ++t) {
      int d = dist[x];
      if (d > maxd) maxd = d;
      while (kR < nR && maxd > st.R_grid[kR]) st.sigma[kR++][w] = t;
      while (kn < nn && st.n_grid[kn] == t) st.max_disp[kn++][w] = maxd;
      if (net.is_boundary(x) || (kR == nR && kn == nn) || t == cfg.n_steps) break;
      x = sampler.step(x, rng);
    }
  });
  return st;
}

// Per-trajectory checks: M_n >= R whenever sigma_R <= n, and both sequences
// are monotone. Returns the number of violations.
inline std::size_t count_displacement_violations(const WalkStats& st) {
  std::size_t bad = 0;
  for (std::size_t w = 0; w < st.walkers; ++w) {
    for (std::size_t i = 1; i < st.sigma.size(); ++i)
      if (st.sigma[i][w] >= 0 && st.sigma[i - 1][w] >= 0 && st.sigma[i][w] < st.sigma[i - 1][w]) ++bad;
    for (std::size_t j = 1; j < st.max_disp.size(); ++j)
      if (st.max_disp[j][w] >= 0 && st.max_disp[j - 1][w] >= 0 && st.max_disp[j][w] < st.max_disp[j - 1][w]) ++bad;
    for (std::size_t i = 0; i < st.sigma.size(); ++i) {
      auto s = st.sigma[i][w];
      if (s < 0) continue;
      for (std::size_t j = 0; j < st.max_disp.size(); ++j) {
        int m = st.max_disp[j][w];
        if (m >= 0 && s <= st.n_grid[j] && m < st.R_grid[i]) ++bad;
      }
    }
  }
  return bad;
}

struct HeatKernel {
  int n_max = 0;
  std::vector<double> p;       // p_t(rho, rho), t = 0..2 n_max
  std::vector<double> green;   // Gr_t(rho, rho) = sum_{s <= t} p_s
  int exact_limit = 0;         // p_{2n} is the untruncated value for n <= exact_limit
  double p_even(int n) const { return p[std::size_t(2 * n)]; }
};

// Exact return probabilities by pushing the point mass at the root through
// the transition operator 2 n_max times.
inline HeatKernel heat_kernel_exact(const Network& net, int n_max, std::size_t vertex_cap = 200'000) {
  if (n_max < 1) throw InputError("n_max must be >= 1");
  if (net.size() > vertex_cap)
    throw ResourceError("exact heat kernel needs " + std::to_string(net.size()) + " vertices, above the cap of " +
                        std::to_string(vertex_cap) + "; truncate the network or use Monte-Carlo walks");
  const VertexId rho = net.root();
  std::vector<int> dist = bfs_distances(net, rho);
  std::vector<VertexId> order;
  for (std::size_t v = 0; v < net.size(); ++v)
    if (dist[v] != kUnreached) order.push_back(VertexId(v));
  std::stable_sort(order.begin(), order.end(), [&](VertexId a, VertexId b) { return dist[a] < dist[b]; });
  std::vector<std::size_t> upto(std::size_t(dist[order.back()]) + 1, 0);  // vertices at distance <= d
  for (VertexId v : order) ++upto[std::size_t(dist[v])];
  for (std::size_t d = 1; d < upto.size(); ++d) upto[d] += upto[d - 1];
  auto reach = [&](int t) { return upto[std::min<std::size_t>(std::size_t(t), upto.size() - 1)]; };

  HeatKernel hk;
  hk.n_max = n_max;
  int b = boundary_distance(net, rho);
  hk.exact_limit = b == kUnreached ? n_max : std::min(n_max, b - 1);
  const int T = 2 * n_max;
  std::vector<double> cur(net.size(), 0.0), nxt(net.size(), 0.0);
  cur[rho] = 1.0;
  hk.p.assign(std::size_t(T) + 1, 0.0);
  hk.green.assign(std::size_t(T) + 1, 0.0);
  hk.p[0] = hk.green[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const std::size_t src = reach(t - 1), dst = reach(t);
    for (std::size_t i = 0; i < dst; ++i) nxt[order[i]] = 0.0;
    for (std::size_t i = 0; i < src; ++i) {
      VertexId x = order[i];
      double m = cur[x];
      if (m == 0.0) continue;
      double scale = m / net.conductance(x);
      for (const Incidence& in : net.incident(x)) nxt[in.to] += scale * net.edge(in.edge).c;
    }
    std::swap(cur, nxt);
    double total = 0;
    for (std::size_t i = 0; i < dst; ++i) total += cur[order[i]];
    if (std::abs(total - 1.0) > 1e-12)
      throw NumericalError("heat kernel lost mass at step " + std::to_string(t) + " (sum " + std::to_string(total) + ")");
    hk.p[t] = cur[rho];
    hk.green[t] = hk.green[t - 1] + cur[rho];
  }
  for (int n = 1; n <= n_max; ++n)
    if (hk.p_even(n) > hk.p_even(n - 1) * (1 + 1e-12) + 1e-300)
      throw NumericalError("even return probabilities increased at n=" + std::to_string(n));
  return hk;
}

enum class StartLaw { root, stationary };

struct RestrictedConfig {
  std::int64_t n_steps = 1000;
  std::size_t n_walkers = 1;
  std::uint64_t seed = 0;
  StartLaw start = StartLaw::stationary;
  unsigned threads = 0;
};

namespace detail {

inline void check_restriction(const Network& net, const VertexSet& S) {
  if (S.empty()) throw InputError("restricted walk needs a nonempty set");
  double mass = 0;
  for (VertexId v : S) {
    net.check_vertex(v);
    mass += net.conductance(v);
  }
  if (!(mass > 0)) throw InputError("the restricted set carries no conductance");
}

// Stationary start: pi_S(x) proportional to c_x on S.
inline VertexId draw_stationary(const VertexSet& S, const std::vector<double>& cum, Rng& rng) {
  double u = uniform01(rng) * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return S[std::min<std::size_t>(std::size_t(it - cum.begin()), S.size() - 1)];
}

inline std::vector<double> cumulative_conductance(const Network& net, const VertexSet& S) {
  std::vector<double> cum;
  double s = 0;
  for (VertexId v : S) cum.push_back(s += net.conductance(v));
  return cum;
}

}  // namespace detail

// Normalised restricted stationary law c_x / sum_{y in S} c_y.
inline std::vector<double> restricted_stationary(const Network& net, const VertexSet& S) {
  detail::check_restriction(net, S);
  double total = 0;
  for (VertexId v : S) total += net.conductance(v);
  std::vector<double> pi;
  for (VertexId v : S) pi.push_back(net.conductance(v) / total);
  return pi;
}

// Chain on S that holds in place whenever the ordinary walk would leave S.
inline std::vector<std::vector<VertexId>> restricted_walk(const Network& net, const VertexSet& S,
                                                          const RestrictedConfig& cfg) {
  detail::check_restriction(net, S);
  if (cfg.n_steps < 0 || cfg.n_walkers < 1) throw InputError("need n_steps >= 0 and n_walkers >= 1");
  auto inS = membership(net.size(), S);
  if (cfg.start == StartLaw::root && !inS[net.root()]) throw InputError("root is not in the restricted set");
  const TransitionSampler sampler(net);
  const auto cum = detail::cumulative_conductance(net, S);
  std::vector<std::vector<VertexId>> out(cfg.n_walkers);
  parallel_for(cfg.n_walkers, worker_count(cfg.threads), [&](std::size_t w) {
    Rng rng = make_rng(cfg.seed, {0x5e57, w});
    VertexId x = cfg.start == StartLaw::root ? net.root() : detail::draw_stationary(S, cum, rng);
    auto& path = out[w];
    path.reserve(std::size_t(cfg.n_steps) + 1);
    path.push_back(x);
    for (std::int64_t t = 0; t < cfg.n_steps; ++t) {
      if (net.conductance(x) > 0) {
        VertexId y = net.incident(x)[sampler.pick(x, rng())].to;
        if (inS[y]) x = y;
      }
      path.push_back(x);
    }
  });
  return out;
}

struct CoupledPaths {
  std::vector<VertexId> free;        // ordinary walk
  std::vector<VertexId> restricted;  // same random stream, held at the edge of S
  std::int64_t exit_time = -1;       // first t with free[t] outside S, -1 if none
};

inline CoupledPaths coupled_walk(const Network& net, const VertexSet& S, VertexId start, std::int64_t n_steps,
                                 std::uint64_t seed) {
  detail::check_restriction(net, S);
  auto inS = membership(net.size(), S);
  if (!inS[start]) throw InputError("start vertex is not in S");
  const TransitionSampler sampler(net);
  Rng rng = make_rng(seed, {0xc0c0});
  CoupledPaths cp;
  VertexId a = start, b = start;
  cp.free.push_back(a);
  cp.restricted.push_back(b);
  for (std::int64_t t = 1; t <= n_steps; ++t) {
    std::uint64_t r = rng();
    a = net.incident(a)[sampler.pick(a, r)].to;
    VertexId y = net.incident(b)[sampler.pick(b, r)].to;
    if (inS[y]) b = y;
    cp.free.push_back(a);
    cp.restricted.push_back(b);
    if (cp.exit_time < 0 && !inS[a]) cp.exit_time = t;
  }
  return cp;
}

struct MarkovTypeResult {
  int n = 0;
  double ratio = 0;
  double stderr_ = 0;
  double numerator = 0;    // E max_{t<=n} dist(Z_0, Z_t)^2
  double denominator = 0;  // E dist(Z_0, Z_1)^2
};

// E[max_{t<=n} dist_w(Z_0,Z_t)^2] / (n E[dist_w(Z_0,Z_1)^2]) for the
// stationary restricted walk, both moments from the same walkers.
inline MarkovTypeResult markov_type_ratio(const Network& net, const VertexSet& S, const EdgeWeight& w, int n,
                                          std::size_t walkers = 4096, std::uint64_t seed = 0, unsigned threads = 0) {
  if (n < 1) throw InputError("n must be >= 1");
  w.validate(net);
  RestrictedConfig cfg;
  cfg.n_steps = n;
  cfg.n_walkers = walkers;
  cfg.seed = seed;
  cfg.threads = threads;
  auto paths = restricted_walk(net, S, cfg);
  std::vector<double> a(walkers), b(walkers);
  parallel_for(walkers, worker_count(threads), [&](std::size_t i) {
    auto d = weighted_distances_from(net, w, {paths[i][0]});
    double m = 0;
    for (VertexId z : paths[i]) m = std::max(m, d[z] * d[z]);
    a[i] = m;
    b[i] = d[paths[i][1]] * d[paths[i][1]];
  });
  MarkovTypeResult r;
  r.n = n;
  for (std::size_t i = 0; i < walkers; ++i) r.numerator += a[i] / double(walkers), r.denominator += b[i] / double(walkers);
  if (!(r.denominator > 0)) throw InputError("metric gives zero one-step displacement; the ratio is undefined");
  double q = r.numerator / r.denominator;
  r.ratio = q / n;
  double v = 0;
  for (std::size_t i = 0; i < walkers; ++i) v += (a[i] - q * b[i]) * (a[i] - q * b[i]);
  v /= double(walkers > 1 ? walkers - 1 : 1);
  r.stderr_ = std::sqrt(v / double(walkers)) / r.denominator / n;
  return r;
}

}  // namespace exponent_lab
