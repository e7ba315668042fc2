#include <catch_amalgamated.hpp>

#include <cmath>

#include "exponent_lab/generators.hpp"
#include "exponent_lab/structures.hpp"

using namespace exponent_lab;

namespace {

double se_binom(double p, int n) { return std::sqrt(std::max(p * (1 - p), 1e-12) / n); }

}  // namespace

TEST_CASE("exponential clocks: argmin frequencies are mu_y / mu(S)", "[structures]") {
  std::vector<double> mu{1, 2, 3};
  const int draws = 100000;
  std::array<int, 3> wins{};
  for (int s = 0; s < draws; ++s) {
    auto b = exp_clocks(mu, std::uint64_t(s));
    ++wins[std::size_t(std::min_element(b.begin(), b.end()) - b.begin())];
  }
  for (int i = 0; i < 3; ++i) {
    double p = mu[std::size_t(i)] / 6.0;
    CHECK(std::abs(wins[std::size_t(i)] / double(draws) - p) < 4 * se_binom(p, draws));
  }
  // zero rates fall back to 1
  auto b = exp_clocks({0.0, -1.0}, 3);
  CHECK(std::isfinite(b[0]));
  CHECK(std::isfinite(b[1]));
}

TEST_CASE("partition clusters have diameter at most delta", "[structures]") {
  for (const Network& net : {gen_gasket(5), gen_lattice(2, 12), gen_path(60)}) {
    for (double delta : {2.0, 5.0, 9.5, 16.0}) {
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Partition p = exp_clock_partition(net, delta, seed);
        REQUIRE(p.radius >= delta / 4);
        REQUIRE(p.radius < delta / 2);
        std::size_t covered = 0;
        for (std::size_t k = 0; k < p.clusters.size(); ++k) {
          covered += p.clusters[k].size();
          REQUIRE(cluster_diameter(net, p.clusters[k], int(delta)) <= delta);
          for (VertexId x : p.clusters[k]) REQUIRE(p.cluster[x] == int(k));
        }
        REQUIRE(covered == net.size());
        // labels are centres within R, and kept edges never cross clusters
        for (std::size_t x = 0; x < net.size(); ++x) {
          auto d = bfs_distances(net, VertexId(x), floor_radius(p.radius));
          REQUIRE(d[p.labels[x]] != kUnreached);
        }
        for (const Edge& e : net.edges())
          if (p.kept(e)) REQUIRE(p.cluster[e.u] == p.cluster[e.v]);
      }
    }
  }
  CHECK_THROWS_AS(exp_clock_partition(gen_path(4), 0.0, 1), InputError);
}

TEST_CASE("partition capture bound", "[structures]") {
  auto g = gen_lattice(2, 40);
  const double delta = 16;
  const int trials = 3000;
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
    CHECK(emp <= bound + 3 * se_binom(emp, trials));
  }
}

TEST_CASE("partition law is invariant under re-rooting on a cycle", "[structures]") {
  auto c = gen_cycle(48);
  const int trials = 4000;
  double a = 0, a2 = 0, b = 0, b2 = 0;
  for (int s = 0; s < trials; ++s) {
    Partition p = exp_clock_partition(c, 10, std::uint64_t(s));
    double x = double(p.clusters[std::size_t(p.cluster[0])].size());
    double y = double(p.clusters[std::size_t(p.cluster[17])].size());
    a += x, a2 += x * x, b += y, b2 += y * y;
  }
  double ma = a / trials, mb = b / trials;
  double se = std::sqrt((a2 / trials - ma * ma + b2 / trials - mb * mb) / trials);
  CHECK(std::abs(ma - mb) < 4 * se);
}

TEST_CASE("net sampling bounds", "[structures]") {
  auto g = gen_lattice(2, 40);
  const int R = 2;
  const double eps = 0.3, lambda = std::pow(R, 2 * eps);
  NetSampler sampler(g, R, eps, lambda, {g.root()});
  for (double p : sampler.probabilities()) REQUIRE((p >= 0 && p <= 1));
  const int trials = 4000;
  int hit = 0;
  std::array<int, 3> far{};
  for (int s = 0; s < trials; ++s) {
    NetSample U = sampler.sample(std::uint64_t(s));
    auto in = membership(g.size(), U.selected);
    hit += in[g.root()];
    auto d = U.selected.empty() ? std::vector<int>(g.size(), kUnreached) : bfs_distances(g, U.selected);
    for (int r = 1; r <= R; ++r) far[std::size_t(r)] += d[g.root()] == kUnreached || d[g.root()] > r;
  }
  double ph = hit / double(trials);
  CHECK(ph <= sampler.inclusion_bound(g.root()) + 3 * se_binom(ph, trials));
  for (int r = 1; r <= R; ++r) {
    double pf = far[std::size_t(r)] / double(trials);
    CHECK(pf <= sampler.miss_bound(g.root(), r) + 3 * se_binom(pf, trials));
  }
  // same seed, same net
  CHECK(sampler.sample(9).selected == sampler.sample(9).selected);
  CHECK_THROWS_AS(NetSampler(gen_lattice(2, 20), R, eps, lambda, {0}), ContaminationError);
  CHECK_THROWS_AS(sample_net(gen_lattice(2, 20), 1, eps, lambda, 0), InputError);
}

TEST_CASE("geometry classes", "[structures]") {
  auto p = gen_path(800);
  auto g = classify_geometry(p, p.root(), 0.9, 8, 0.15);
  CHECK(g.in_S == Membership::yes);
  CHECK(g.s_mod_lhs <= g.s_mod_rhs);
  CHECK(g.s_vol_lhs >= g.s_vol_rhs);
  // condition two fails once d* is too large
  CHECK(classify_geometry(p, p.root(), 0.9, 8, 0.25).in_S == Membership::no);
  CHECK_THROWS_AS(classify_geometry(gen_path(100), 100, 0.9, 8, 0.15), ContaminationError);

  // S is contained in S' wherever both are decided.
  for (const Network& net : {gen_path(900), gen_gasket(7), gen_lattice(2, 60)}) {
    for (int R : {2, 4, 8, 16})
      for (double ds : {0.05, 0.15, 1.0}) {
        ScaleGeometry geo(net, 0.9, R, ds);
        auto d = bfs_distances(net, net.root(), 3);
        for (std::size_t x = 0; x < net.size(); ++x) {
          if (d[x] == kUnreached) continue;
          Membership s = geo.in_S(VertexId(x));
          if (s == Membership::unknown) continue;
          if (s == Membership::yes) CHECK(geo.in_S_prime(VertexId(x)) == Membership::yes);
        }
      }
  }
}

TEST_CASE("scale weight separates the root from far vertices", "[structures]") {
  auto p = gen_path(800);
  const int R = 8;
  const double eps = 0.9, ds = 0.15;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ScaleWeight w = build_scale_weight(p, R, eps, ds, std::nullopt, seed);
    REQUIRE(w.root_in_S == Membership::yes);
    CHECK(w.separation_checked);
    CHECK(w.min_far_distance >= 1.0);
    for (double v : w.omega.values) REQUIRE(v >= 0);
    // second moment at the root; both steps equally likely
    double m2 = 0;
    for (const Incidence& in : p.incident(p.root())) m2 += 0.5 * std::pow(w.omega.values[std::size_t(in.edge)], 2);
    CHECK(m2 <= 2 * std::pow(R, -ds + 4 * eps));
  }
  // Without any net centres, the indicator alone carries the separation.
  ScaleWeight bare = build_scale_weight(p, R, eps, ds, 0.0, 1);
  CHECK(bare.net_size == 0);
  CHECK(bare.min_far_distance >= 1.0);
  CHECK(bare.indicator_edges > 0);

  // On a small gasket the root test is contaminated and nothing is asserted.
  ScaleWeight gw = build_scale_weight(gen_gasket(6), 4, 0.3, 1.0, std::nullopt, 2);
  CHECK(gw.root_in_S != Membership::yes);
  CHECK_FALSE(gw.separation_checked);
}

TEST_CASE("multiscale weight", "[structures]") {
  auto p = gen_path(800);
  const double eps = 0.9, ds = 0.15;
  MultiscaleWeight m = build_multiscale_weight(p, eps, ds, 3, 7);
  REQUIRE(m.scales.size() == 3);
  CHECK(m.scales[2].root_in_S == Membership::yes);
  auto dw = weighted_distances_from(p, m.omega, {p.root()});
  auto hop = bfs_distances(p, p.root());
  double need = std::pow(2.0, 3 * (ds - 4 * eps) / 2) / 3;
  for (std::size_t x = 0; x < p.size(); ++x)
    if (hop[x] >= 3 * std::pow(8.0, 1 + eps)) CHECK(dw[x] >= need);
  for (std::size_t i = 1; i < m.growth_distance.size(); ++i)
    CHECK(m.growth_distance[i] >= m.growth_distance[i - 1]);
  CHECK_THROWS_AS(build_multiscale_weight(gen_path(30), eps, ds, 3, 1), ContaminationError);
}
