#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "exponent_lab/generators.hpp"
#include "exponent_lab/io.hpp"
#include "exponent_lab/parallel.hpp"
#include "exponent_lab/resistance.hpp"
#include "exponent_lab/structures.hpp"
#include "exponent_lab/walks.hpp"

namespace exponent_lab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kMaxCensor = 0.05;

// ------------------------------------------------------------ series

enum class SeriesKind { volume, sigma, maxdisp, return_prob, reff_point, reff_annulus };

inline const char* kind_name(SeriesKind k) {
  switch (k) {
    case SeriesKind::volume: return "volume";
    case SeriesKind::sigma: return "sigma";
    case SeriesKind::maxdisp: return "maxdisp";
    case SeriesKind::return_prob: return "return_prob";
    case SeriesKind::reff_point: return "reff_point";
    case SeriesKind::reff_annulus: return "reff_annulus";
  }
  return "?";
}

inline SeriesKind parse_kind(const std::string& s) {
  for (auto k : {SeriesKind::volume, SeriesKind::sigma, SeriesKind::maxdisp, SeriesKind::return_prob,
                 SeriesKind::reff_point, SeriesKind::reff_annulus})
    if (s == kind_name(k)) return k;
  throw InputError("unknown series kind '" + s + "'");
}

struct ScaleSeries {
  SeriesKind kind = SeriesKind::volume;
  std::string statistic = "value";  // how walkers or seeds were combined
  std::vector<std::int64_t> scale;
  std::vector<double> value;
  std::vector<double> stderr_;
  std::vector<double> censor_frac;

  std::string name() const { return std::string(kind_name(kind)) + "_" + statistic; }

  void push(std::int64_t s, double v, double se = 0, double censor = 0) {
    scale.push_back(s);
    value.push_back(v);
    stderr_.push_back(se);
    censor_frac.push_back(censor);
  }

  void validate() const {
    std::size_t n = scale.size();
    if (value.size() != n || stderr_.size() != n || censor_frac.size() != n)
      throw InputError("series " + name() + " has columns of different lengths");
    for (std::size_t i = 1; i < n; ++i)
      if (scale[i] <= scale[i - 1]) throw InputError("series " + name() + " scales are not strictly increasing");
  }

  json to_json() const {
    json j{{"kind", kind_name(kind)}, {"statistic", statistic}, {"scale", scale}};
    json v = json::array(), s = json::array(), c = json::array();
    for (std::size_t i = 0; i < scale.size(); ++i) {
      v.push_back(number_or_inf(value[i]));
      s.push_back(number_or_inf(stderr_[i]));
      c.push_back(censor_frac[i]);
    }
    j["value"] = v;
    j["stderr"] = s;
    j["censor_frac"] = c;
    return j;
  }

  static ScaleSeries from_json(const json& j) {
    ScaleSeries s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.statistic = j.value("statistic", "value");
    s.scale = j.at("scale").get<std::vector<std::int64_t>>();
    for (const auto& x : j.at("value")) s.value.push_back(read_number(x));
    for (const auto& x : j.at("stderr")) s.stderr_.push_back(read_number(x));
    s.censor_frac = j.at("censor_frac").get<std::vector<double>>();
    s.validate();
    return s;
  }

  std::string to_csv() const {
    std::string out = "scale,value,stderr,censor_frac\n";
    for (std::size_t i = 0; i < scale.size(); ++i) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(scale[i]), value[i],
                    stderr_[i], censor_frac[i]);
      out += buf;
    }
    return out;
  }
};

struct Window {
  std::int64_t lo = 0;
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  json to_json() const { return json::array({lo, hi}); }
};

struct Fit {
  double slope = kNaN, intercept = kNaN, stderr_ = kNaN;
  double r2 = kNaN;
  std::int64_t lo = 0, hi = 0;  // scales actually used
  std::size_t points = 0;
  // -2 slope for return probabilities, the slope otherwise
  double exponent = kNaN, exponent_stderr = kNaN;
};

// Least squares of log value on log scale over the window, dropping scales
// censored above 5%. The standard error combines the residual scatter with
// the per-point standard errors carried by the series.
inline Fit fit_exponent(const ScaleSeries& s, const Window& w = {}) {
  s.validate();
  std::vector<double> x, y, sy;
  for (std::size_t i = 0; i < s.scale.size(); ++i) {
    if (s.scale[i] < w.lo || s.scale[i] > w.hi || s.scale[i] <= 0) continue;
    if (!(s.value[i] > 0) || !std::isfinite(s.value[i]) || s.censor_frac[i] > kMaxCensor) continue;
    x.push_back(std::log(double(s.scale[i])));
    y.push_back(std::log(s.value[i]));
    sy.push_back(std::isfinite(s.stderr_[i]) ? s.stderr_[i] / s.value[i] : 0.0);
  }
  const std::size_t n = x.size();
  if (n < 3)
    throw EstimationError("series " + s.name() + " has " + std::to_string(n) + " usable scales in [" +
                          std::to_string(w.lo) + ", " + std::to_string(w.hi) + "]; at least 3 are needed");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= double(n), my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Fit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0, prop = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - f.intercept - f.slope * x[i];
    ssr += r * r;
    double wi = (x[i] - mx) / sxx;
    prop += wi * wi * sy[i] * sy[i];
  }
  double ols = std::sqrt(ssr / double(n - 2) / sxx);
  f.stderr_ = std::sqrt(ols * ols + prop);
  f.r2 = syy > 0 ? 1 - ssr / syy : 1.0;
  f.points = n;
  f.lo = std::int64_t(std::llround(std::exp(x.front())));
  f.hi = std::int64_t(std::llround(std::exp(x.back())));
  bool ret = s.kind == SeriesKind::return_prob;
  f.exponent = ret ? -2 * f.slope : f.slope;
  f.exponent_stderr = ret ? 2 * f.stderr_ : f.stderr_;
  return f;
}

// R^2 of value against log scale, the natural form for logarithmic growth.
inline double loglinear_r2(const ScaleSeries& s, const Window& w = {}) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.scale.size(); ++i)
    if (s.scale[i] >= w.lo && s.scale[i] <= w.hi && s.scale[i] > 0 && std::isfinite(s.value[i]) &&
        s.censor_frac[i] <= kMaxCensor)
      x.push_back(std::log(double(s.scale[i]))), y.push_back(s.value[i]);
  if (x.size() < 3) return kNaN;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= double(x.size()), my /= double(x.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my), syy += (y[i] - my) * (y[i] - my);
  return syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
}

// ------------------------------------------------------ measurements

inline ScaleSeries volume_series(const Network& net, const std::vector<int>& radii) {
  ScaleSeries s;
  s.kind = SeriesKind::volume;
  if (radii.empty()) return s;
  int top = *std::max_element(radii.begin(), radii.end());
  int b = boundary_distance(net, net.root());
  auto prof = volume_profile(net, net.root(), top);
  for (int R : radii)
    if (b == kUnreached || R < b) s.push(R, prof[std::size_t(R)]);
  return s;
}

struct ZetaEstimate {
  double delta = 0.25;
  ScaleSeries annulus, point;
  std::vector<int> dropped;  // contaminated scales
};

// R_eff(B(rho, R^{1-delta}) <-> outside B(rho,R)) and R_eff(rho <-> outside
// B(rho,R)) for each R; scales that reach the boundary are dropped.
inline ZetaEstimate measure_zeta(const Network& net, double delta, const std::vector<int>& radii,
                                 const SolverOptions& opt = {}) {
  if (!(delta > 0 && delta < 1)) throw InputError("delta must lie in (0,1)");
  ZetaEstimate z;
  z.delta = delta;
  z.annulus.kind = SeriesKind::reff_annulus;
  z.point.kind = SeriesKind::reff_point;
  for (int R : radii) {
    if (R < 2) continue;
    try {
      int r = std::max(1, floor_radius(std::pow(double(R), 1 - delta)));
      AnnulusResult a = annular_modulus(net, net.root(), r, R, opt);
      AnnulusResult p = annular_modulus(net, net.root(), 0, R, opt);
      z.annulus.push(R, a.reff);
      z.point.push(R, p.reff);
    } catch (const ContaminationError&) {
      z.dropped.push_back(R);
    } catch (const InputError&) {  // nothing outside the ball
      z.dropped.push_back(R);
    }
  }
  return z;
}

struct ZetaFits {
  Fit tilde, zero;
  ZetaEstimate data;
};

inline ZetaFits estimate_zeta(const Network& net, double delta, const std::vector<int>& radii,
                              const Window& w = {}, const SolverOptions& opt = {}) {
  ZetaFits f;
  f.data = measure_zeta(net, delta, radii, opt);
  f.tilde = fit_exponent(f.data.annulus, w);
  f.zero = fit_exponent(f.data.point, w);
  return f;
}

// Walk series: exit times by radius, running maxima by time.
struct WalkSeries {
  ScaleSeries sigma_log, sigma_mean, disp_log, disp_sq;
  std::size_t violations = 0;
};

inline WalkSeries walk_series(const WalkStats& st) {
  WalkSeries out;
  out.sigma_log.kind = out.sigma_mean.kind = SeriesKind::sigma;
  out.disp_log.kind = out.disp_sq.kind = SeriesKind::maxdisp;
  out.sigma_log.statistic = out.disp_log.statistic = "geometric_mean";
  out.sigma_mean.statistic = "mean";
  out.disp_sq.statistic = "second_moment";
  const double W = double(st.walkers);
  auto add = [&](ScaleSeries& lg, ScaleSeries& ar, std::int64_t scale, auto const& col, int power) {
    double sl = 0, sl2 = 0, sa = 0, sa2 = 0;
    std::size_t k = 0;
    for (auto v : col) {
      if (v < 0) continue;
      double x = double(v);
      if (x <= 0) continue;
      double l = std::log(x), a = std::pow(x, power);
      sl += l, sl2 += l * l, sa += a, sa2 += a * a, ++k;
    }
    double censor = 1 - double(k) / W;
    if (k < 2) {
      lg.push(scale, kNaN, kNaN, censor);
      ar.push(scale, kNaN, kNaN, censor);
      return;
    }
    double kk = double(k);
    double ml = sl / kk, vl = std::max(0.0, sl2 / kk - ml * ml);
    double ma = sa / kk, va = std::max(0.0, sa2 / kk - ma * ma);
    double g = std::exp(ml);
    lg.push(scale, g, g * std::sqrt(vl / kk), censor);
    ar.push(scale, ma, std::sqrt(va / kk), censor);
  };
  for (std::size_t i = 0; i < st.R_grid.size(); ++i) add(out.sigma_log, out.sigma_mean, st.R_grid[i], st.sigma[i], 1);
  for (std::size_t j = 0; j < st.n_grid.size(); ++j) add(out.disp_log, out.disp_sq, st.n_grid[j], st.max_disp[j], 2);
  out.violations = count_displacement_violations(st);
  return out;
}

// p_{2n}(rho, rho) for dyadic n <= n_max from the exact kernel on B(rho, n_max+1).
inline ScaleSeries return_series(const Network& net, int n_max) {
  ScaleSeries s;
  s.kind = SeriesKind::return_prob;
  auto d = bfs_distances(net, net.root());
  int ecc = *std::max_element(d.begin(), d.end());
  HeatKernel hk;
  if (ecc > n_max + 1) {
    Truncation t = truncate_to_ball(net, n_max + 1);
    hk = heat_kernel_exact(t.net, n_max);
  } else {
    hk = heat_kernel_exact(net, n_max);
  }
  for (int n = 1; n <= n_max; n *= 2) s.push(n, hk.p_even(n), 0.0, n <= hk.exact_limit ? 0.0 : 1.0);
  return s;
}

// ------------------------------------------------------------ reports

struct Estimate {
  double value = kNaN, stderr_ = kNaN;
  std::int64_t lo = 0, hi = 0;
  std::size_t points = 0;

  bool present() const { return std::isfinite(value); }

  static Estimate of(const Fit& f) { return {f.exponent, f.exponent_stderr, f.lo, f.hi, f.points}; }
  // 1/slope and 2/slope for the displacement exponents
  static Estimate inverse(const Fit& f, double k) {
    return {k / f.slope, k * f.stderr_ / (f.slope * f.slope), f.lo, f.hi, f.points};
  }

  json to_json() const {
    if (!present()) return nullptr;
    return json{{"estimate", value}, {"stderr", number_or_inf(stderr_)}, {"scales_used", {lo, hi}}, {"points", points}};
  }
  static Estimate from_json(const json& j) {
    Estimate e;
    if (j.is_null()) return e;
    e.value = read_number(j.at("estimate"));
    e.stderr_ = read_number(j.at("stderr"));
    if (j.contains("scales_used")) e.lo = j["scales_used"].at(0), e.hi = j["scales_used"].at(1);
    e.points = j.value("points", std::size_t(0));
    return e;
  }
};

struct ChainCheck {
  std::string name;
  double lhs = 0, rhs = 0, slack = 0;
  bool satisfied = true;
  json to_json() const { return {{"name", name}, {"lhs", lhs}, {"rhs", rhs}, {"satisfied", satisfied}, {"slack", slack}}; }
};

struct Residuals {
  double walk = kNaN, walk_stderr = kNaN;          // d_w - d_f - zeta~
  double spectral = kNaN, spectral_stderr = kNaN;  // d_s - 2 d_f / d_w
};

struct ExponentReport {
  Estimate d_f, d_w, beta, d_s, zeta_tilde, zeta_0;
  Estimate beta_A, d_w_A;  // annealed versions from second moments and mean exit times
  double delta = 0.25;
  json meta = json::object();         // family, generator spec, config, windows
  json diagnostics = json::object();
  std::vector<ScaleSeries> series;

  Residuals residuals() const;
  std::vector<ChainCheck> chain(double sigmas = 3) const;
  json to_json(const json& provenance = json::object()) const;
  static ExponentReport from_json(const json& j);
};

inline double se_sum(std::initializer_list<double> ses) {
  double s = 0;
  for (double x : ses) s += std::isfinite(x) ? x * x : 0;
  return std::sqrt(s);
}

inline Residuals ExponentReport::residuals() const {
  Residuals r;
  if (d_w.present() && d_f.present() && zeta_tilde.present()) {
    r.walk = d_w.value - d_f.value - zeta_tilde.value;
    r.walk_stderr = se_sum({d_w.stderr_, d_f.stderr_, zeta_tilde.stderr_});
  }
  if (d_s.present() && d_f.present() && d_w.present()) {
    double q = 2 * d_f.value / d_w.value;
    r.spectral = d_s.value - q;
    r.spectral_stderr = se_sum({d_s.stderr_, 2 * d_f.stderr_ / d_w.value, q * d_w.stderr_ / d_w.value});
  }
  return r;
}

// The inequality chain with point estimates; each link may fail by at most
// `sigmas` propagated standard errors. Missing annealed exponents collapse
// onto their quenched counterparts.
inline std::vector<ChainCheck> ExponentReport::chain(double sigmas) const {
  std::vector<ChainCheck> out;
  auto link = [&](std::string name, double lhs, double se_l, double rhs, double se_r) {
    ChainCheck c;
    c.name = std::move(name);
    c.lhs = lhs, c.rhs = rhs;
    c.slack = sigmas * se_sum({se_l, se_r});
    c.satisfied = lhs <= rhs + c.slack;
    out.push_back(c);
  };
  const Estimate bA = beta_A.present() ? beta_A : beta;
  const Estimate wA = d_w_A.present() ? d_w_A : d_w;
  if (d_f.present() && zeta_tilde.present() && bA.present())
    link("relation-mt: d_f + zeta_tilde <= beta_A", d_f.value + zeta_tilde.value, se_sum({d_f.stderr_, zeta_tilde.stderr_}),
         bA.value, bA.stderr_);
  if (bA.present() && beta.present()) link("beta_A <= beta", bA.value, bA.stderr_, beta.value, beta.stderr_);
  if (beta.present() && d_w.present())
    link("relation-easy: beta <= d_w", beta.value, beta.stderr_, d_w.value, d_w.stderr_);
  if (d_w.present() && wA.present()) link("d_w <= d_w_A", d_w.value, d_w.stderr_, wA.value, wA.stderr_);
  if (wA.present() && d_f.present() && zeta_0.present())
    link("relation-commute: d_w_A <= d_f + zeta_0", wA.value, wA.stderr_, d_f.value + zeta_0.value,
         se_sum({d_f.stderr_, zeta_0.stderr_}));
  if (d_s.present() && zeta_0.present() && d_w.present()) {
    double lo = 2 * (1 - zeta_0.value / d_w.value);
    double se_lo = 2 * se_sum({zeta_0.stderr_ / d_w.value, zeta_0.value * d_w.stderr_ / (d_w.value * d_w.value)});
    link("relation-ds lower: 2(1 - zeta_0/d_w) <= d_s", lo, se_lo, d_s.value, d_s.stderr_);
  }
  if (d_s.present() && d_f.present() && d_w.present()) {
    double hi = 2 * d_f.value / d_w.value;
    double se_hi = se_sum({2 * d_f.stderr_ / d_w.value, hi * d_w.stderr_ / d_w.value});
    link("relation-ds upper: d_s <= 2 d_f/d_w", d_s.value, d_s.stderr_, hi, se_hi);
  }
  return out;
}

inline json ExponentReport::to_json(const json& provenance) const {
  json j;
  j["schema"] = 1;
  j["d_f"] = d_f.to_json();
  j["d_w"] = d_w.to_json();
  j["beta"] = beta.to_json();
  j["d_s"] = d_s.to_json();
  j["zeta_tilde"] = zeta_tilde.to_json();
  j["zeta_0"] = zeta_0.to_json();
  j["annealed"] = {{"beta_A", beta_A.to_json()}, {"d_w_A", d_w_A.to_json()}};
  j["delta"] = delta;
  Residuals r = residuals();
  j["einstein_residuals"] = {{"walk", number_or_inf(r.walk)}, {"spectral", number_or_inf(r.spectral)}};
  json ch = json::array();
  for (const auto& c : chain()) ch.push_back(c.to_json());
  j["inequality_chain"] = ch;
  j["meta"] = meta;
  j["diagnostics"] = diagnostics;
  json ss = json::array();
  for (const auto& s : series) ss.push_back(s.to_json());
  j["series"] = ss;
  j["provenance"] = provenance;
  return j;
}

inline ExponentReport ExponentReport::from_json(const json& j) {
  if (!j.is_object() || j.value("schema", 0) != 1) throw InputError("report is not a schema-1 exponent report");
  ExponentReport r;
  try {
    auto get = [&](const char* k) { return j.contains(k) ? Estimate::from_json(j[k]) : Estimate{}; };
    r.d_f = get("d_f"), r.d_w = get("d_w"), r.beta = get("beta");
    r.d_s = get("d_s"), r.zeta_tilde = get("zeta_tilde"), r.zeta_0 = get("zeta_0");
    if (j.contains("annealed")) {
      r.beta_A = Estimate::from_json(j["annealed"].value("beta_A", json(nullptr)));
      r.d_w_A = Estimate::from_json(j["annealed"].value("d_w_A", json(nullptr)));
    }
    r.delta = j.value("delta", 0.25);
    r.meta = j.value("meta", json::object());
    r.diagnostics = j.value("diagnostics", json::object());
    if (j.contains("series"))
      for (const auto& s : j["series"]) r.series.push_back(ScaleSeries::from_json(s));
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed report: ") + ex.what());
  }
  // stored residuals must agree with the stored estimates
  if (j.contains("einstein_residuals")) {
    Residuals now = r.residuals();
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= 1e-9 * (1 + std::abs(a)); };
    double w = read_number(j["einstein_residuals"].value("walk", json(nullptr)));
    double s = read_number(j["einstein_residuals"].value("spectral", json(nullptr)));
    if (!same(w, now.walk) || !same(s, now.spectral))
      throw InputError("report residuals do not match its exponent estimates");
  }
  return r;
}

struct EinsteinVerdict {
  Residuals residuals;
  double tol_walk = 0, tol_spectral = 0;
  bool walk_ok = false, spectral_ok = false;
  std::vector<ChainCheck> chain;

  bool chain_ok() const {
    return std::all_of(chain.begin(), chain.end(), [](const ChainCheck& c) { return c.satisfied; });
  }
  bool passed() const { return walk_ok && spectral_ok && chain_ok(); }

  json to_json() const {
    json ch = json::array();
    for (const auto& c : chain) ch.push_back(c.to_json());
    return {{"walk_residual", residuals.walk},   {"walk_tol", tol_walk},         {"walk_ok", walk_ok},
            {"spectral_residual", residuals.spectral}, {"spectral_tol", tol_spectral}, {"spectral_ok", spectral_ok},
            {"chain", ch},                       {"chain_ok", chain_ok()},       {"passed", passed()}};
  }
};

// Default tolerance: three combined standard errors for each residual.
inline EinsteinVerdict verify_einstein(const ExponentReport& r, std::optional<double> tol = std::nullopt) {
  for (const Estimate* e : {&r.d_f, &r.d_w, &r.beta, &r.d_s, &r.zeta_tilde})
    if (!e->present()) throw InputError("report lacks one of d_f, d_w, beta, d_s, zeta_tilde");
  EinsteinVerdict v;
  v.residuals = r.residuals();
  v.tol_walk = tol ? *tol : 3 * v.residuals.walk_stderr;
  v.tol_spectral = tol ? *tol : 3 * v.residuals.spectral_stderr;
  v.walk_ok = std::abs(v.residuals.walk) <= v.tol_walk;
  v.spectral_ok = std::abs(v.residuals.spectral) <= v.tol_spectral;
  v.chain = r.chain();
  return v;
}

// ------------------------------------------------------------ pipeline

struct EstimateConfig {
  int seeds = 1;  // independent environments, pooled by the mean of logs
  std::size_t walkers = 4096;
  std::int64_t steps = 1 << 22;
  std::int64_t disp_horizon = 1 << 16;
  int heat_n_max = 128;
  double delta = 0.25;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool walks = true, heat = true, zeta = true;
  Window volume_window, zeta_window, walk_window, disp_window, return_window;

  json to_json() const {
    return {{"seeds", seeds},
            {"walkers", walkers},
            {"steps", steps},
            {"disp_horizon", disp_horizon},
            {"heat_n_max", heat_n_max},
            {"delta", delta},
            {"seed", seed},
            {"walks", walks},
            {"heat", heat},
            {"zeta", zeta},
            {"windows",
             {{"volume", volume_window.to_json()},
              {"zeta", zeta_window.to_json()},
              {"sigma", walk_window.to_json()},
              {"maxdisp", disp_window.to_json()},
              {"return_prob", return_window.to_json()}}}};
  }
};

// Fitting windows that work at desk scale for each benchmark family.
inline EstimateConfig default_estimate_config(const GeneratorSpec& spec) {
  EstimateConfig c;
  auto both = [](std::int64_t lo, std::int64_t hi) { return Window{lo, hi}; };
  switch (spec.family) {
    case Family::gasket:
      c.volume_window = c.zeta_window = both(4, 128);
      c.walk_window = both(16, 128);  // exit times at R < 16 still see the lattice
      c.disp_window = both(64, 1 << 16);
      c.return_window = both(4, 128);
      c.heat_n_max = std::min(128, std::max(1, (1 << std::max(spec.level, 0)) - 1));
      break;
    case Family::path:
    case Family::lattice:
      c.volume_window = c.walk_window = both(32, 512);
      c.zeta_window = spec.dim == 1 || spec.family == Family::path ? both(32, 512) : both(4, 128);
      c.disp_window = both(1 << 10, 1 << 18);
      c.disp_horizon = 1 << 18;
      c.return_window = both(32, 512);
      c.heat_n_max = std::max(1, std::min(spec.n - 1, spec.family == Family::lattice && spec.dim >= 2 ? 256 : 512));
      break;
    case Family::gff_lattice:
      c.seeds = 4;
      c.volume_window = c.zeta_window = c.walk_window = both(4, 128);
      c.disp_window = both(64, 1 << 16);
      c.return_window = both(4, 128);
      c.heat_n_max = std::max(1, std::min(128, spec.n - 1));
      break;
    default:
      c.volume_window = c.zeta_window = c.walk_window = both(2, 1 << 20);
      c.disp_window = both(16, 1 << 20);
      c.return_window = both(2, 1 << 20);
      c.heat_n_max = 64;
      break;
  }
  return c;
}

struct EnvironmentSeries {
  ScaleSeries volume, reff_annulus, reff_point, sigma_log, sigma_mean, disp_log, disp_sq, return_prob;
  std::size_t violations = 0;
  std::vector<int> dropped;
};

inline std::vector<int> dyadic_up_to(int top) {
  std::vector<int> r;
  for (int R = 1; R <= top; R *= 2) r.push_back(R);
  return r;
}

inline EnvironmentSeries measure_environment(const Network& net, const EstimateConfig& cfg, std::uint64_t seed,
                                             unsigned threads) {
  EnvironmentSeries e;
  auto d = bfs_distances(net, net.root());
  int ecc = *std::max_element(d.begin(), d.end());
  int b = boundary_distance(net, net.root());
  int reach = b == kUnreached ? ecc : b - 1;
  e.volume = volume_series(net, dyadic_up_to(reach));
  if (cfg.zeta) {
    auto z = measure_zeta(net, cfg.delta, dyadic_up_to(std::min<std::int64_t>(reach, cfg.zeta_window.hi)));
    e.reff_annulus = z.annulus, e.reff_point = z.point, e.dropped = z.dropped;
  }
  if (cfg.walks) {
    WalkConfig wc;
    wc.n_walkers = cfg.walkers;
    wc.n_steps = cfg.steps;
    wc.seed = seed;
    wc.threads = threads;
    wc.disp_horizon = cfg.disp_horizon;
    wc.max_R = int(std::min<std::int64_t>(cfg.walk_window.hi, 1 << 20));
    WalkSeries ws = walk_series(simulate_walks(net, wc));
    e.sigma_log = ws.sigma_log, e.sigma_mean = ws.sigma_mean;
    e.disp_log = ws.disp_log, e.disp_sq = ws.disp_sq;
    e.violations = ws.violations;
  }
  if (cfg.heat) e.return_prob = return_series(net, cfg.heat_n_max);
  return e;
}

// Geometric mean over environments at scales every environment reports;
// the standard error is the spread of the logs when there are several.
inline ScaleSeries pool_series(const std::vector<const ScaleSeries*>& parts) {
  ScaleSeries out;
  if (parts.empty()) return out;
  out.kind = parts[0]->kind;
  out.statistic = parts[0]->statistic;
  if (parts.size() == 1) return *parts[0];
  out.statistic += "_pooled";
  for (std::size_t i = 0; i < parts[0]->scale.size(); ++i) {
    std::int64_t s = parts[0]->scale[i];
    double sl = 0, sl2 = 0, cens = 0;
    std::size_t k = 0;
    bool ok = true;
    for (const ScaleSeries* p : parts) {
      auto it = std::find(p->scale.begin(), p->scale.end(), s);
      if (it == p->scale.end()) {
        ok = false;
        break;
      }
      std::size_t j = std::size_t(it - p->scale.begin());
      cens = std::max(cens, p->censor_frac[j]);
      if (!(p->value[j] > 0) || !std::isfinite(p->value[j])) continue;
      double l = std::log(p->value[j]);
      sl += l, sl2 += l * l, ++k;
    }
    if (!ok) continue;
    if (k < 2) {
      out.push(s, kNaN, kNaN, 1.0);
      continue;
    }
    double m = sl / double(k), var = std::max(0.0, sl2 / double(k) - m * m) * double(k) / double(k - 1);
    double g = std::exp(m);
    out.push(s, g, g * std::sqrt(var / double(k)), cens);
  }
  return out;
}

// Generates the environments, measures every series, pools and fits.
inline ExponentReport estimate_family(const GeneratorSpec& spec, const EstimateConfig& cfg) {
  spec.validate();
  if (cfg.seeds < 1) throw InputError("seeds must be >= 1");
  if (cfg.walkers < 1) throw InputError("walkers must be >= 1");
  const unsigned workers = worker_count(cfg.threads);
  std::vector<EnvironmentSeries> env(std::size_t(cfg.seeds));
  const bool fan_out = cfg.seeds > 1;
  parallel_for(env.size(), fan_out ? workers : 1, [&](std::size_t i) {
    GeneratorSpec s = spec;
    s.seed = cfg.seeds == 1 ? spec.seed : derive_seed(spec.seed, {0xe17, i});
    Network net = generate(s);
    env[i] = measure_environment(net, cfg, derive_seed(cfg.seed, {0x3a1c, i}), fan_out ? 1 : workers);
  });

  ExponentReport r;
  r.delta = cfg.delta;
  auto pooled = [&](ScaleSeries EnvironmentSeries::*m) {
    std::vector<const ScaleSeries*> parts;
    for (const auto& e : env) parts.push_back(&(e.*m));
    return pool_series(parts);
  };
  ScaleSeries vol = pooled(&EnvironmentSeries::volume);
  r.series.push_back(vol);
  r.d_f = Estimate::of(fit_exponent(vol, cfg.volume_window));
  std::size_t violations = 0;
  std::vector<int> dropped;
  for (const auto& e : env) {
    violations += e.violations;
    dropped.insert(dropped.end(), e.dropped.begin(), e.dropped.end());
  }
  if (cfg.zeta) {
    ScaleSeries a = pooled(&EnvironmentSeries::reff_annulus), p = pooled(&EnvironmentSeries::reff_point);
    r.series.push_back(a);
    r.series.push_back(p);
    r.zeta_tilde = Estimate::of(fit_exponent(a, cfg.zeta_window));
    r.zeta_0 = Estimate::of(fit_exponent(p, cfg.zeta_window));
    r.diagnostics["zeta_0_loglog_r2"] = fit_exponent(p, cfg.zeta_window).r2;
    r.diagnostics["zeta_0_loglinear_r2"] = number_or_inf(loglinear_r2(p, cfg.zeta_window));
  }
  if (cfg.walks) {
    ScaleSeries sl = pooled(&EnvironmentSeries::sigma_log), sm = pooled(&EnvironmentSeries::sigma_mean);
    ScaleSeries dl = pooled(&EnvironmentSeries::disp_log), dq = pooled(&EnvironmentSeries::disp_sq);
    for (auto* s : {&sl, &sm, &dl, &dq}) r.series.push_back(*s);
    r.d_w = Estimate::of(fit_exponent(sl, cfg.walk_window));
    r.d_w_A = Estimate::of(fit_exponent(sm, cfg.walk_window));
    r.beta = Estimate::inverse(fit_exponent(dl, cfg.disp_window), 1.0);
    r.beta_A = Estimate::inverse(fit_exponent(dq, cfg.disp_window), 2.0);
    r.diagnostics["displacement_violations"] = violations;
  }
  if (cfg.heat) {
    ScaleSeries rp = pooled(&EnvironmentSeries::return_prob);
    r.series.push_back(rp);
    r.d_s = Estimate::of(fit_exponent(rp, cfg.return_window));
  }
  r.diagnostics["dropped_scales"] = dropped;
  r.meta = {{"generator", spec.to_json()}, {"config", cfg.to_json()}};
  return r;
}

// ------------------------------------------------ transport diagnostics

enum class RootLaw { stationary, fixed };
enum class Transport { neighbour_count, cluster_mass };

inline const char* transport_name(Transport t) { return t == Transport::neighbour_count ? "F1" : "F2"; }

struct MtpOptions {
  RootLaw root = RootLaw::stationary;
  double delta = 4;   // partition scale for F2
  double theta = 4;   // F2 sends mass only from vertices with c_x >= theta
  unsigned threads = 0;
};

struct PairedZ {
  double mean_a = 0, mean_b = 0, se_a = 0, se_b = 0, mean_diff = 0, se_diff = 0, z = 0;
  json to_json() const {
    return {{"lhs", mean_a}, {"rhs", mean_b}, {"lhs_stderr", se_a}, {"rhs_stderr", se_b}, {"z", z}};
  }
};

inline PairedZ paired_z(const std::vector<double>& a, const std::vector<double>& b) {
  PairedZ p;
  const double n = double(a.size());
  auto mv = [&](auto f, double& m, double& se) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += f(i), s2 += f(i) * f(i);
    m = s / n;
    se = n > 1 ? std::sqrt(std::max(0.0, s2 / n - m * m) / (n - 1)) : 0.0;
  };
  mv([&](std::size_t i) { return a[i]; }, p.mean_a, p.se_a);
  mv([&](std::size_t i) { return b[i]; }, p.mean_b, p.se_b);
  mv([&](std::size_t i) { return a[i] - b[i]; }, p.mean_diff, p.se_diff);
  p.z = p.se_diff > 0 ? p.mean_diff / p.se_diff : (p.mean_diff == 0 ? 0.0 : std::copysign(kInfinity, p.mean_diff));
  return p;
}

struct MtpResult {
  Transport functional = Transport::neighbour_count;
  RootLaw root = RootLaw::stationary;
  int n_seeds = 0;
  PairedZ transport;   // (1/c_rho) sum_x F(rho,x) against (1/c_rho) sum_x F(x,rho)
  PairedZ swap_log;    // log c_X0 against log c_X1
  PairedZ swap_order;  // 1{c_X0 > c_X1} against 1{c_X1 > c_X0}

  bool within(double z) const {
    return std::abs(transport.z) <= z && std::abs(swap_log.z) <= z && std::abs(swap_order.z) <= z;
  }
  json to_json() const {
    return {{"functional", transport_name(functional)},
            {"root", root == RootLaw::stationary ? "stationary" : "fixed"},
            {"n_seeds", n_seeds},
            {"transport", transport.to_json()},
            {"swap_log_conductance", swap_log.to_json()},
            {"swap_order", swap_order.to_json()}};
  }
};

// Both sides of the transport identity over independent environments. With
// the root drawn from c / c(V) on the finite environment the identity is
// exact, so the z-scores test the machinery; a fixed root shows the bias.
inline MtpResult mtp_diagnostic(const GeneratorSpec& spec, Transport F, int n_seeds, const MtpOptions& opt = {}) {
  spec.validate();
  if (n_seeds < 2) throw InputError("mtp-check needs at least 2 seeds");
  const int support = F == Transport::neighbour_count ? 1 : int(std::ceil(opt.delta));
  std::vector<double> lhs(static_cast<std::size_t>(n_seeds)), rhs(lhs), c0(lhs), c1(lhs), up(lhs), down(lhs);
  parallel_for(std::size_t(n_seeds), worker_count(opt.threads), [&](std::size_t i) {
    GeneratorSpec s = spec;
    s.seed = derive_seed(spec.seed, {0x4d7, i});
    Network net = generate(s);
    Rng rng = make_rng(s.seed, {0x5a});
    VertexId rho = net.root();
    if (opt.root == RootLaw::stationary) {
      double total = 0;
      for (double c : net.conductances()) total += c;
      double u = uniform01(rng) * total;
      for (std::size_t v = 0; v < net.size(); ++v) {
        u -= net.conductance(VertexId(v));
        if (u < 0 && net.conductance(VertexId(v)) > 0) {
          rho = VertexId(v);
          break;
        }
      }
    } else if (!ball_is_clean(net, rho, support)) {
      throw ContaminationError("transport functional needs B(root, " + std::to_string(support) +
                               ") inside the truncation");
    }
    const double cr = net.conductance(rho);
    if (F == Transport::neighbour_count) {
      double a = 0, b = 0;
      auto d = bfs_distances(net, rho, 1);
      for (std::size_t x = 0; x < net.size(); ++x)
        if (d[x] == 1) a += cr, b += net.conductance(VertexId(x));
      lhs[i] = a / cr, rhs[i] = b / cr;
    } else {
      Partition p = exp_clock_partition(net, opt.delta, derive_seed(s.seed, {0x9a}));
      const VertexSet& K = p.clusters[std::size_t(p.cluster[rho])];
      double cK = 0, cKS = 0;
      for (VertexId y : K) {
        cK += net.conductance(y);
        if (net.conductance(y) >= opt.theta) cKS += net.conductance(y);
      }
      lhs[i] = cr >= opt.theta ? 1.0 : 0.0;
      rhs[i] = cKS / cK;
    }
    TransitionSampler sampler(net);
    VertexId x1 = sampler.step(rho, rng);
    c0[i] = std::log(cr), c1[i] = std::log(net.conductance(x1));
    up[i] = cr > net.conductance(x1), down[i] = net.conductance(x1) > cr;
  });
  MtpResult r;
  r.functional = F;
  r.root = opt.root;
  r.n_seeds = n_seeds;
  r.transport = paired_z(lhs, rhs);
  r.swap_log = paired_z(c0, c1);
  r.swap_order = paired_z(up, down);
  return r;
}

}  // namespace exponent_lab
