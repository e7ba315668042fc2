// Acceptance runner: `acceptance <criterion>` with criterion 1..7. Prints one
// PASS/FAIL line per check and exits 1 if any check failed.

#include <array>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "exponent_lab/estimators.hpp"
#include "exponent_lab/generators.hpp"
#include "exponent_lab/resistance.hpp"
#include "exponent_lab/structures.hpp"
#include "exponent_lab/walks.hpp"
#include "oracles.hpp"

using namespace exponent_lab;

namespace {

int failures = 0;

void line(bool ok, const std::string& name, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
void line(bool ok, const std::string& name, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), buf);
  std::fflush(stdout);
  if (!ok) ++failures;
}

void within(const std::string& name, double v, double target, double tol) {
  line(std::abs(v - target) <= tol, name, "%.4f, want %.4f +- %.4f", v, target, tol);
}

void in_range(const std::string& name, double v, double lo, double hi) {
  line(v >= lo && v <= hi, name, "%.4f, want [%.4f, %.4f]", v, lo, hi);
}

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void runtime(const std::string& name, const Clock& c, double budget) {
  double s = c.seconds();
  line(s < budget, name, "%.1f s, budget %.0f s", s, budget);
}

double se_binom(double p, int n) { return std::sqrt(std::max(p * (1 - p), 1e-12) / n); }

struct MeanSe {
  double mean = 0, se = 0;
  std::size_t n = 0;
};

template <class T>
MeanSe moments(const std::vector<T>& xs) {
  MeanSe m;
  double s = 0, s2 = 0;
  for (T x : xs)
    if (x >= 0) s += double(x), s2 += double(x) * double(x), ++m.n;
  if (m.n == 0) return m;
  m.mean = s / double(m.n);
  m.se = m.n > 1 ? std::sqrt(std::max(0.0, s2 / double(m.n) - m.mean * m.mean) / double(m.n - 1)) : 0.0;
  return m;
}

GeneratorSpec gasket_spec(int L) {
  GeneratorSpec s;
  s.family = Family::gasket;
  s.level = L;
  return s;
}

GeneratorSpec lattice_spec(int dim, int n) {
  GeneratorSpec s;
  s.family = dim == 1 ? Family::path : Family::lattice;
  s.dim = dim;
  s.n = n;
  return s;
}

GeneratorSpec gff_spec(int n, double gamma, std::uint64_t seed = 1) {
  GeneratorSpec s;
  s.family = Family::gff_lattice;
  s.n = n;
  s.gamma = gamma;
  s.seed = seed;
  return s;
}

void report_estimates(const ExponentReport& r) {
  std::printf("     d_f %.4f(%.4f) zeta~ %.4f(%.4f) zeta0 %.4f(%.4f) d_w %.4f(%.4f) beta %.4f d_s %.4f(%.4f)\n",
              r.d_f.value, r.d_f.stderr_, r.zeta_tilde.value, r.zeta_tilde.stderr_, r.zeta_0.value, r.zeta_0.stderr_,
              r.d_w.value, r.d_w.stderr_, r.beta.value, r.d_s.value, r.d_s.stderr_);
}

// ---------------------------------------------------------------- 1

void duality() {
  Clock c;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(4, 50);
  double worst_prod = 0, worst_len = 0, worst_mass = 0, worst_oracle = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = size(rng);
    auto net = oracle::random_network(rng, n, n / 2 + 1, 0.01, 100.0);
    VertexSet S{0}, T{VertexId(n - 1)};
    if (n >= 8) S = {0, 1}, T = {VertexId(n - 2), VertexId(n - 1)};
    auto m = modulus(net, S, T);
    double reff = effective_resistance(net, S, T);
    worst_prod = std::max(worst_prod, std::abs(m.value * reff - 1));
    worst_len = std::max(worst_len, 1 - weighted_distance(net, m.extremal, S, T));
    double mass = 0;
    for (std::size_t i = 0; i < net.edge_count(); ++i)
      mass += net.edge(i).c * m.extremal.values[i] * m.extremal.values[i];
    worst_mass = std::max(worst_mass, std::abs(mass - m.value) / m.value);
    // the product above shares one solve; the dense LU does not
    double dense = oracle::dense_energy(net, oracle::dense_potential(net, S, T));
    worst_oracle = std::max(worst_oracle, std::abs(m.value - dense) / dense);
  }
  line(worst_prod <= 1e-7, "1.duality product", "max |Mod * R_eff - 1| = %.2e over 200 networks, tol 1e-7", worst_prod);
  line(worst_len <= 1e-6, "1.extremal admissible", "max 1 - dist_w(S,T) = %.2e, tol 1e-6", worst_len);
  line(worst_mass <= 1e-6, "1.extremal mass", "max relative |mass - Mod| = %.2e, tol 1e-6", worst_mass);
  line(worst_oracle <= 1e-7, "1.modulus vs dense oracle", "max relative error %.2e, tol 1e-7", worst_oracle);
  runtime("1.runtime", c, 10);
}

// ---------------------------------------------------------------- 2

void gasket() {
  Clock c;
  double worst = 0, worst_dense = 0;
  for (int L = 0; L <= 4; ++L) {
    auto g = gen_gasket(L);
    auto b = g.boundary();
    double r = effective_resistance(g, {g.root()}, {b[0]});
    worst = std::max(worst, std::abs(r - 2.0 / 3.0 * std::pow(5.0 / 3.0, L)));
    auto pot = oracle::dense_potential(g, {g.root()}, {b[0]});
    worst_dense = std::max(worst_dense, std::abs(1.0 / oracle::dense_energy(g, pot) - r));
  }
  line(worst <= 1e-9, "2.renormalization (5/3)^L, L<=4", "max error %.2e, tol 1e-9", worst);
  line(worst_dense <= 1e-9, "2.renormalization dense oracle", "max error %.2e, tol 1e-9", worst_dense);

  auto spec = gasket_spec(8);
  auto cfg = default_estimate_config(spec);
  cfg.walkers = 16384;
  cfg.seed = 1;
  auto r = estimate_family(spec, cfg);
  report_estimates(r);
  const double zeta = std::log(5.0 / 3.0) / std::log(2.0);
  within("2.d_f", r.d_f.value, 1.585, 0.08);
  within("2.zeta_tilde", r.zeta_tilde.value, 0.737, 0.06);
  within("2.zeta_0", r.zeta_0.value, 0.737, 0.06);
  within("2.d_w (16384 walkers)", r.d_w.value, 2.32, 0.12);
  within("2.d_s", r.d_s.value, 1.365, 0.10);
  auto res = r.residuals();
  line(std::abs(res.walk) <= 0.15, "2.residual d_w - d_f - zeta~", "%.4f, want |.| <= 0.15", res.walk);
  line(std::abs(res.spectral) <= 0.15, "2.residual d_s - 2d_f/d_w", "%.4f, want |.| <= 0.15", res.spectral);
  line(r.diagnostics["displacement_violations"] == 0, "2.displacement invariant", "%s violations",
       r.diagnostics["displacement_violations"].dump().c_str());
  std::printf("     exact zeta %.4f\n", zeta);
  runtime("2.runtime", c, 900);
}

// ---------------------------------------------------------------- 3

void lattices() {
  Clock c;
  {
    auto spec = lattice_spec(1, 1100);
    auto cfg = default_estimate_config(spec);
    cfg.walkers = 4096;
    cfg.seed = 1;
    auto r = estimate_family(spec, cfg);
    report_estimates(r);
    within("3.Z d_f", r.d_f.value, 1, 0.05);
    within("3.Z zeta_0", r.zeta_0.value, 1, 0.05);
    within("3.Z d_w", r.d_w.value, 2, 0.05);
    within("3.Z d_s", r.d_s.value, 1, 0.05);
  }
  {
    auto spec = lattice_spec(2, 600);
    auto cfg = default_estimate_config(spec);
    cfg.walkers = 4096;
    cfg.seed = 1;
    auto r = estimate_family(spec, cfg);
    report_estimates(r);
    within("3.Z2 d_f", r.d_f.value, 2, 0.03);
    // R_eff grows like log R here, so a log-log slope over [4,128] stays well above 0.10
    in_range("3.Z2 zeta_0 slope", r.zeta_0.value, -0.05, 0.10);
    within("3.Z2 d_w", r.d_w.value, 2, 0.07);
    within("3.Z2 d_s", r.d_s.value, 2, 0.12);
  }
  runtime("3.runtime", c, 600);
}

// ---------------------------------------------------------------- 4

void gff() {
  Clock c;
  const double gc = gff_gamma_c();
  std::vector<double> df;
  for (double k : {0.5, 1.0, 1.5}) {
    auto spec = gff_spec(256, k * gc, 17);
    auto cfg = default_estimate_config(spec);
    cfg.seeds = 20;
    cfg.walks = cfg.heat = cfg.zeta = false;
    auto r = estimate_family(spec, cfg);
    df.push_back(r.d_f.value);
    std::printf("     gamma %.2f gamma_c: d_f %.4f(%.4f)\n", k, r.d_f.value, r.d_f.stderr_);
  }
  in_range("4.d_f at gamma_c, N=256, 20 seeds", df[1], 3.2, 4.5);
  line(df[0] < df[1] && df[1] < df[2], "4.d_f increasing in gamma", "%.4f < %.4f < %.4f", df[0], df[1], df[2]);

  auto spec = gff_spec(256, gc, 29);
  auto cfg = default_estimate_config(spec);
  cfg.seeds = 400;
  cfg.walks = cfg.heat = false;
  auto r = estimate_family(spec, cfg);
  std::printf("     zeta~ %.4f(%.4f) over %d seeds on [%lld, %lld]\n", r.zeta_tilde.value, r.zeta_tilde.stderr_, cfg.seeds,
              (long long)r.zeta_tilde.lo, (long long)r.zeta_tilde.hi);
  in_range("4.annulus slope at gamma_c", r.zeta_tilde.value, -0.15, 0.15);
  runtime("4.runtime", c, 1800);
}

// ---------------------------------------------------------------- 5

void constructions() {
  Clock c;
  {  // (a)
    std::vector<double> mu{1, 2, 3};
    const int draws = 100000;
    std::array<int, 3> wins{};
    for (int s = 0; s < draws; ++s) {
      auto b = exp_clocks(mu, std::uint64_t(s));
      ++wins[std::size_t(std::min_element(b.begin(), b.end()) - b.begin())];
    }
    double worst = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      double p = mu[i] / 6.0;
      worst = std::max(worst, std::abs(wins[i] / double(draws) - p) / se_binom(p, draws));
    }
    line(worst <= 3, "5a.exp-clock argmin law", "max |z| = %.2f over 1e5 draws, want <= 3", worst);
  }
  {  // (b)
    std::vector<Network> nets{gen_gasket(5), gen_lattice(2, 12), gen_path(60), gen_cycle(50),
                              gen_gff_lattice(8, gff_gamma_c(), 5)};
    long pairs = 0, bad = 0;
    for (const Network& net : nets)
      for (double delta : {2.0, 5.0, 9.5, 16.0})
        for (std::uint64_t seed = 0; seed < 500; ++seed, ++pairs) {
          Partition p = exp_clock_partition(net, delta, seed);
          for (const auto& k : p.clusters)
            if (cluster_diameter(net, k, int(delta) + 1) > delta) {
              ++bad;
              break;
            }
        }
    line(bad == 0, "5b.cluster diameter <= Delta", "%ld of %ld (net, seed) pairs violate", bad, pairs);
  }
  {  // (c)
    auto g = gen_lattice(2, 40);
    const int trials = 10000;
    double worst = -kInfinity;
    for (double delta : {8.0, 16.0}) {
      auto mu_ball = [&](double s) { return volume(g, g.root(), floor_radius(s)); };
      std::array<int, 4> miss{};
      std::array<VertexSet, 4> balls;
      for (int r = 1; r <= 3; ++r) balls[std::size_t(r)] = graph_ball(g, g.root(), r);
      for (int s = 0; s < trials; ++s) {
        Partition p = exp_clock_partition(g, delta, std::uint64_t(s));
        int k = p.cluster[g.root()];
        for (int r = 1; r <= 3; ++r)
          for (VertexId y : balls[std::size_t(r)])
            if (p.cluster[y] != k) {
              ++miss[std::size_t(r)];
              break;
            }
      }
      for (int r = 1; r <= 3; ++r) {
        double emp = miss[std::size_t(r)] / double(trials);
        double bound = 16.0 * r / delta * (1 + std::log(mu_ball(5 * delta / 8) / mu_ball(delta / 8)));
        worst = std::max(worst, emp - bound - 3 * se_binom(emp, trials));
        std::printf("     Delta %.0f r %d: miss %.4f bound %.4f\n", delta, r, emp, bound);
      }
    }
    line(worst <= 0, "5c.capture bound", "max excess over bound + 3 sigma = %.4f", worst);
  }
  {  // (d)
    auto g = gen_lattice(2, 40);
    const int R = 2, trials = 4000;
    double worst1 = -kInfinity, worst2 = -kInfinity;
    for (double eps : {0.2, 0.3}) {
      NetSampler sampler(g, R, eps, std::pow(R, 2 * eps), {g.root()});
      std::vector<VertexId> probes{g.root(), VertexId(g.root() + 1), VertexId(g.root() + 3)};
      std::vector<int> hit(probes.size(), 0);
      std::vector<std::array<int, 3>> far(probes.size());
      for (int s = 0; s < trials; ++s) {
        NetSample U = sampler.sample(std::uint64_t(s));
        auto in = membership(g.size(), U.selected);
        auto d = U.selected.empty() ? std::vector<int>(g.size(), kUnreached) : bfs_distances(g, U.selected, R + 1);
        for (std::size_t i = 0; i < probes.size(); ++i) {
          hit[i] += in[probes[i]];
          for (int r = 1; r <= R; ++r) far[i][std::size_t(r)] += d[probes[i]] == kUnreached || d[probes[i]] > r;
        }
      }
      for (std::size_t i = 0; i < probes.size(); ++i) {
        double ph = hit[i] / double(trials);
        worst1 = std::max(worst1, ph - sampler.inclusion_bound(probes[i]) - 3 * se_binom(ph, trials));
        for (int r = 1; r <= R; ++r) {
          double pf = far[i][std::size_t(r)] / double(trials);
          worst2 = std::max(worst2, pf - sampler.miss_bound(probes[i], r) - 3 * se_binom(pf, trials));
        }
      }
    }
    line(worst1 <= 0, "5d.net inclusion bound", "max excess over bound + 3 sigma = %.4f", worst1);
    line(worst2 <= 0, "5d.net miss bound", "max excess over bound + 3 sigma = %.4f", worst2);
  }
  {  // (e)
    auto p = gen_path(800);
    const int R = 8;
    const double eps = 0.9;
    int gated = 0, separated = 0;
    double worst = -kInfinity;
    for (double ds : {0.05, 0.15}) {
      std::vector<double> m2;
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        ScaleWeight w = build_scale_weight(p, R, eps, ds, std::nullopt, seed);
        if (w.root_in_S != Membership::yes) continue;
        ++gated;
        separated += w.separation_checked && w.min_far_distance >= 1.0;
        double s = 0;
        for (const Incidence& in : p.incident(p.root()))
          s += p.edge(in.edge).c / p.conductance(p.root()) * std::pow(w.omega.values[std::size_t(in.edge)], 2);
        m2.push_back(s);
      }
      auto m = moments(m2);
      double bound = 2 * std::pow(R, -ds + 4 * eps);
      worst = std::max(worst, m.mean - bound - 3 * m.se);
      std::printf("     d* %.2f: E omega^2 %.4f(%.4f) bound %.4f\n", ds, m.mean, m.se, bound);
    }
    // multiscale weights carry the per-scale separation through
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      MultiscaleWeight m = build_multiscale_weight(p, eps, 0.15, 3, seed);
      ++gated;
      auto dw = weighted_distances_from(p, m.omega, {p.root()});
      auto hop = bfs_distances(p, p.root());
      double need = std::pow(2.0, 3 * (0.15 - 4 * eps) / 2) / 3;
      bool ok = true;
      for (std::size_t x = 0; x < p.size(); ++x)
        if (hop[x] >= 3 * std::pow(8.0, 1 + eps) && dw[x] < need) ok = false;
      separated += ok;
    }
    line(worst <= 0, "5e.second moment", "max excess over bound + 3 sigma = %.4f", worst);
    line(gated > 0 && separated == gated, "5e.separation on gated instances", "%d of %d instances separated",
         separated, gated);
  }
  runtime("5.runtime", c, 600);
}

// ---------------------------------------------------------------- 6

void walk_laws() {
  Clock c;
  {
    double worst = 0;
    std::vector<Network> bases{gen_lattice(2, 3), gen_gasket(3), gen_gff_lattice(4, gff_gamma_c(), 2)};
    for (std::size_t k = 0; k < bases.size(); ++k) {
      std::vector<Edge> edges = bases[k].edges();
      Rng rng(77 + k);
      if (k == 0)
        for (auto& e : edges) e.c = 0.5 + 2.0 * uniform01(rng);
      Network net(bases[k].size(), edges, bases[k].root(), bases[k].boundary());
      // the 10 vertices closest to the root form a connected set
      auto d = bfs_distances(net, net.root());
      VertexSet S;
      for (int r = 0; S.size() < 10; ++r)
        for (std::size_t x = 0; x < net.size() && S.size() < 10; ++x)
          if (d[x] == r) S.push_back(VertexId(x));
      S = make_set(S);
      RestrictedConfig cfg;
      cfg.n_steps = 1000000;
      cfg.seed = 4 + k;
      auto path = restricted_walk(net, S, cfg)[0];
      auto pi = restricted_stationary(net, S);
      std::map<VertexId, double> occ;
      for (std::size_t t = 0; t + 1 < path.size(); ++t) occ[path[t]] += 1.0 / double(path.size() - 1);
      double tv = 0;
      for (std::size_t i = 0; i < S.size(); ++i) tv += 0.5 * std::abs(occ[S[i]] - pi[i]);
      worst = std::max(worst, tv);
    }
    line(worst <= 0.01, "6.restricted walk stationarity", "max TV %.5f at 1e6 steps on 10-vertex sets, tol 0.01", worst);
  }
  std::vector<std::pair<std::string, Network>> fams{{"gasket L6", gen_gasket(6)},
                                                    {"Z", gen_path(200)},
                                                    {"Z2", gen_lattice(2, 40)},
                                                    {"tree", gen_tree(2, 12)},
                                                    {"GFF N=32", gen_gff_lattice(32, gff_gamma_c(), 3)}};
  std::size_t violations = 0, checked = 0;
  double worst = -kInfinity;
  for (auto& [name, net] : fams) {
    WalkConfig cfg;
    cfg.n_walkers = 4000;
    cfg.n_steps = 1 << 22;
    cfg.disp_horizon = 1 << 15;
    cfg.max_R = 16;
    cfg.seed = 21;
    auto st = simulate_walks(net, cfg);
    violations += count_displacement_violations(st);
    for (std::size_t w = 0; w < st.walkers; ++w)
      for (std::size_t i = 0; i < st.R_grid.size(); ++i)
        for (std::size_t j = 0; j < st.n_grid.size(); ++j) {
          if (st.sigma[i][w] < 0 || st.max_disp[j][w] < 0) continue;
          ++checked;
          if (st.sigma[i][w] <= st.n_grid[j] && st.max_disp[j][w] < st.R_grid[i]) ++violations;
        }
    for (std::size_t i = 0; i < st.R_grid.size(); ++i) {
      int R = st.R_grid[i];
      if (!ball_is_clean(net, net.root(), R + 1)) continue;
      auto m = moments(st.sigma[i]);
      double bound = annular_modulus(net, net.root(), 0, R).reff * volume(net, net.root(), R);
      worst = std::max(worst, (m.mean - bound) / std::max(m.se, 1e-300) - 3);
      std::printf("     %s R %d: E sigma %.1f(%.1f) bound %.1f\n", name.c_str(), R, m.mean, m.se, bound);
    }
  }
  line(violations == 0, "6.M_n >= 1{sigma_R <= n} R per trajectory", "%zu violations over %zu (walker, R, n)",
       violations, checked);
  line(worst <= 0, "6.commute bound E sigma_R <= R_eff vol", "max excess %.2f sigma beyond 3 sigma", worst);
  runtime("6.runtime", c, 300);
}

// ---------------------------------------------------------------- 7

void mtp() {
  Clock c;
  auto spec = gff_spec(16, gff_gamma_c(), 11);
  auto f1 = mtp_diagnostic(spec, Transport::neighbour_count, 1000);
  std::printf("     F1 %s\n", f1.to_json().dump().c_str());
  in_range("7.F1 transport z", f1.transport.z, -4, 4);
  in_range("7.swap z log c", f1.swap_log.z, -4, 4);
  in_range("7.swap z ordering", f1.swap_order.z, -4, 4);
  runtime("7.runtime", c, 600);
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<void()>> suites{{"1", duality},       {"2", gasket},
                                                             {"3", lattices},      {"4", gff},
                                                             {"5", constructions}, {"6", walk_laws},
                                                             {"7", mtp}};
  std::vector<std::string> which;
  for (int i = 1; i < argc; ++i) which.push_back(argv[i]);
  if (which.empty())
    for (auto& [k, _] : suites) which.push_back(k);
  for (const auto& k : which) {
    auto it = suites.find(k);
    if (it == suites.end()) {
      std::fprintf(stderr, "unknown criterion %s (want 1..7)\n", k.c_str());
      return 2;
    }
    try {
      it->second();
    } catch (const std::exception& e) {
      line(false, k + ".exception", "%s", e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
