// exponent-lab: generate networks, measure them, estimate exponents.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "exponent_lab/estimators.hpp"
#include "exponent_lab/io.hpp"
#include "exponent_lab/structures.hpp"

namespace el = exponent_lab;
using el::json;

namespace {

struct Options {
  std::string command;
  el::GeneratorSpec spec;
  std::string family = "path";
  std::string net_path, out_path, report_path, csv_prefix;
  unsigned threads = 0;

  // resist
  int inner = 0, outer = 1;
  std::string center = "root";
  bool print_json = false;
  double tol = 1e-10;
  std::string method = "auto";

  // walk
  std::size_t walkers = 4096;
  double steps = double(1 << 20);
  std::int64_t disp_horizon = -1;
  int max_R = -1;
  std::uint64_t seed = 0;
  bool samples = false;

  // stretch
  double eps = 0.3, dstar = 2.0;
  int kmax = 3;

  // estimate
  int seeds = 0;
  double delta = 0.25;
  int heat_n = 0;
  bool no_walks = false, no_heat = false, no_zeta = false;
  std::optional<std::size_t> est_walkers;
  std::optional<double> est_steps;
  std::optional<std::int64_t> est_horizon;

  // verify
  std::optional<double> verify_tol;
  bool strict = false;

  // mtp-check
  std::string functional = "F1", root_law = "stationary";
  double part_delta = 4, theta = 4;
  int mtp_seeds = 1000;
};

json provenance(const Options& o, const json& config) {
  return {{"tool", "exponent-lab"}, {"version", el::kVersion}, {"command", o.command}, {"config", config}};
}

void emit(const Options& o, const std::string& text) {
  if (o.out_path.empty())
    std::cout << text << '\n';
  else
    el::write_atomic(o.out_path, text + '\n');
}

el::SolverOptions solver(const Options& o) {
  el::SolverOptions s;
  s.tol = o.tol;
  if (o.method == "auto") s.method = el::SolverMethod::automatic;
  else if (o.method == "jacobi") s.method = el::SolverMethod::jacobi_cg;
  else if (o.method == "ichol") s.method = el::SolverMethod::ichol_cg;
  else if (o.method == "direct") s.method = el::SolverMethod::direct;
  else throw el::InputError("--method must be auto, jacobi, ichol or direct");
  if (!(o.tol > 0)) throw el::InputError("--tol must be positive");
  return s;
}

void write_csv(const std::string& prefix, const el::ScaleSeries& s) {
  if (prefix.empty()) return;
  el::write_atomic(prefix + "_" + s.name() + ".csv", s.to_csv());
}

void add_generator_flags(CLI::App* sub, Options& o) {
  sub->add_option("--family", o.family, "path, cycle, lattice, tree, gasket, gff, percolation")->required();
  sub->add_option("--n", o.spec.n, "half-width (path, lattice, gff, percolation) or length (cycle)");
  sub->add_option("--dim", o.spec.dim, "lattice or percolation dimension");
  sub->add_option("--level", o.spec.level, "gasket level");
  sub->add_option("--branching", o.spec.branching, "tree branching");
  sub->add_option("--depth", o.spec.depth, "tree depth");
  sub->add_option("--gamma", o.spec.gamma, "GFF coupling");
  sub->add_option("--p", o.spec.p, "percolation edge probability");
  sub->add_option("--seed", o.spec.seed, "environment seed");
  sub->add_option("--max-vertices", o.spec.max_vertices, "refuse larger networks");
  sub->add_option("--max-retries", o.spec.max_retries, "percolation resampling budget");
}

el::GeneratorSpec generator(const Options& o) {
  el::GeneratorSpec s = o.spec;
  s.family = el::parse_family(o.family);
  s.validate();
  return s;
}

el::VertexId parse_center(const el::Network& net, const std::string& c) {
  if (c == "root") return net.root();
  try {
    std::size_t used = 0;
    long v = std::stol(c, &used);
    if (used != c.size()) throw std::invalid_argument(c);
    net.check_vertex(el::VertexId(v));
    return el::VertexId(v);
  } catch (const std::logic_error&) {
    throw el::InputError("--center must be 'root' or a vertex id, got '" + c + "'");
  }
}

int run_generate(const Options& o) {
  el::GeneratorSpec s = generator(o);
  el::Network net = el::generate(s);
  emit(o, el::network_to_json(net, provenance(o, s.to_json())));
  return 0;
}

int run_resist(const Options& o) {
  el::Network net = el::read_network(o.net_path);
  el::VertexId x = parse_center(net, o.center);
  el::AnnulusResult a = el::annular_modulus(net, x, o.inner, o.outer, solver(o));
  json j{{"r", o.inner},
         {"R", o.outer},
         {"center", x},
         {"reff", el::number_or_inf(a.reff)},
         {"modulus", el::number_or_inf(a.value)},
         {"residual", a.info.residual},
         {"solver", a.info.method}};
  j["provenance"] = provenance(o, {{"net", o.net_path}, {"inner", o.inner}, {"outer", o.outer}, {"center", o.center},
                                   {"tol", o.tol}, {"method", o.method}});
  if (!o.out_path.empty()) el::write_atomic(o.out_path, j.dump(2) + '\n');
  if (o.print_json)
    std::cout << j.dump(2) << '\n';
  else if (o.out_path.empty())
    std::printf("reff %.17g modulus %.17g residual %.3g\n", a.reff, a.value, a.info.residual);
  return 0;
}

int run_walk(const Options& o) {
  el::Network net = el::read_network(o.net_path);
  el::WalkConfig cfg;
  if (!(o.steps >= 1) || o.steps > 9e18) throw el::InputError("--steps must be at least 1");
  cfg.n_steps = std::int64_t(o.steps);
  cfg.n_walkers = o.walkers;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.disp_horizon = o.disp_horizon;
  cfg.max_R = o.max_R;
  el::WalkStats st = el::simulate_walks(net, cfg);
  el::WalkSeries ws = el::walk_series(st);
  json j;
  j["walkers"] = st.walkers;
  j["R"] = st.R_grid;
  j["n"] = st.n_grid;
  auto counts = [&](const auto& cols) {
    json res = json::array(), cen = json::array();
    for (const auto& c : cols) {
      auto k = el::WalkStats::resolved(c);
      res.push_back(k);
      cen.push_back(st.walkers - k);
    }
    return json{{"resolved", res}, {"censored", cen}};
  };
  j["sigma"] = counts(st.sigma);
  j["maxdisp"] = counts(st.max_disp);
  j["series"] = json::array();
  for (const auto* s : {&ws.sigma_log, &ws.sigma_mean, &ws.disp_log, &ws.disp_sq}) {
    j["series"].push_back(s->to_json());
    write_csv(o.csv_prefix, *s);
  }
  j["displacement_violations"] = ws.violations;
  if (o.samples) {
    j["sigma"]["samples"] = st.sigma;
    j["maxdisp"]["samples"] = st.max_disp;
  }
  j["provenance"] = provenance(o, {{"net", o.net_path}, {"walkers", o.walkers}, {"steps", cfg.n_steps},
                                   {"seed", o.seed}, {"disp_horizon", o.disp_horizon}, {"max_R", o.max_R}});
  emit(o, j.dump());
  return 0;
}

int run_stretch(const Options& o) {
  el::Network net = el::read_network(o.net_path);
  el::MultiscaleWeight m = el::build_multiscale_weight(net, o.eps, o.dstar, o.kmax, o.seed, solver(o));
  json scales = json::array();
  for (const auto& s : m.scales)
    scales.push_back({{"R", s.R},
                      {"root_in_S", el::membership_name(s.root_in_S)},
                      {"net_size", s.net_size},
                      {"gated_centres", s.gated_centres},
                      {"indicator_edges", s.indicator_edges},
                      {"separation_checked", s.separation_checked},
                      {"min_far_distance", el::number_or_inf(s.min_far_distance)}});
  json growth = json::array();
  for (std::size_t i = 0; i < m.growth_R.size(); ++i)
    growth.push_back({{"R", m.growth_R[i]}, {"distance", el::number_or_inf(m.growth_distance[i])}});
  json j{{"omega", el::edge_weight_to_json(m.omega)}, {"scales", scales}, {"growth", growth}};
  j["provenance"] = provenance(o, {{"net", o.net_path}, {"eps", o.eps}, {"dstar", o.dstar}, {"kmax", o.kmax},
                                   {"seed", o.seed}});
  emit(o, j.dump());
  return 0;
}

int run_estimate(const Options& o) {
  el::GeneratorSpec s = generator(o);
  el::EstimateConfig cfg = el::default_estimate_config(s);
  if (o.seeds > 0) cfg.seeds = o.seeds;
  if (o.est_walkers) cfg.walkers = *o.est_walkers;
  if (o.est_steps) {
    if (!(*o.est_steps >= 1)) throw el::InputError("--steps must be at least 1");
    cfg.steps = std::int64_t(*o.est_steps);
  }
  if (o.est_horizon) cfg.disp_horizon = *o.est_horizon;
  if (o.heat_n > 0) cfg.heat_n_max = o.heat_n;
  cfg.delta = o.delta;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.walks = !o.no_walks;
  cfg.heat = !o.no_heat;
  cfg.zeta = !o.no_zeta;
  el::ExponentReport r = el::estimate_family(s, cfg);
  for (const auto& series : r.series) write_csv(o.csv_prefix, series);
  emit(o, r.to_json(provenance(o, r.meta)).dump(2));
  return 0;
}

int run_verify(const Options& o) {
  el::ExponentReport r = el::ExponentReport::from_json(el::read_json_file(o.report_path));
  el::EinsteinVerdict v = el::verify_einstein(r, o.verify_tol);
  json j = v.to_json();
  j["provenance"] = provenance(o, {{"report", o.report_path}, {"tol", o.verify_tol ? json(*o.verify_tol) : json("3 stderr")}});
  emit(o, j.dump(2));
  if (o.strict && !v.passed()) {
    std::cerr << "verdict failed:";
    if (!v.walk_ok) std::cerr << " walk residual " << v.residuals.walk << " beyond " << v.tol_walk << ';';
    if (!v.spectral_ok) std::cerr << " spectral residual " << v.residuals.spectral << " beyond " << v.tol_spectral << ';';
    for (const auto& c : v.chain)
      if (!c.satisfied) std::cerr << " [" << c.name << "]";
    std::cerr << '\n';
    return 3;
  }
  return 0;
}

int run_mtp(const Options& o) {
  el::GeneratorSpec s = generator(o);
  el::Transport F;
  if (o.functional == "F1") F = el::Transport::neighbour_count;
  else if (o.functional == "F2") F = el::Transport::cluster_mass;
  else throw el::InputError("--functional must be F1 or F2");
  el::MtpOptions opt;
  if (o.root_law == "stationary") opt.root = el::RootLaw::stationary;
  else if (o.root_law == "fixed") opt.root = el::RootLaw::fixed;
  else throw el::InputError("--root must be stationary or fixed");
  opt.delta = o.part_delta;
  opt.theta = o.theta;
  opt.threads = o.threads;
  if (!(opt.delta > 0)) throw el::InputError("--delta must be positive");
  el::MtpResult r = el::mtp_diagnostic(s, F, o.mtp_seeds, opt);
  json j = r.to_json();
  j["provenance"] = provenance(o, {{"generator", s.to_json()}, {"functional", o.functional}, {"root", o.root_law},
                                   {"seeds", o.mtp_seeds}, {"delta", o.part_delta}, {"theta", o.theta}});
  emit(o, j.dump(2));
  return 0;
}

// --config run.json: {"command": "walk", "net": "net.json", "walkers": 64, ...}.
// Keys become flags placed before the real arguments, so the latter win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + long(i), args.begin() + long(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + long(i));
      break;
    }
  }
  if (path.empty()) return args;
  json cfg = el::read_json_file(path);
  if (!cfg.is_object()) throw el::InputError("config " + path + " must hold a JSON object");
  std::vector<std::string> out;
  bool has_command = !args.empty() && args[0].rfind("-", 0) != 0;
  std::vector<std::string> flags;
  for (auto& [key, value] : cfg.items()) {
    if (key == "command") continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) flags.push_back("--" + key);
    } else if (value.is_string()) {
      flags.push_back("--" + key);
      flags.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      flags.push_back("--" + key);
      flags.push_back(value.dump());
    } else {
      throw el::InputError("config key '" + key + "' must be a string, number or boolean");
    }
  }
  if (has_command) {
    out.push_back(args[0]);
    out.insert(out.end(), flags.begin(), flags.end());
    out.insert(out.end(), args.begin() + 1, args.end());
  } else {
    if (!cfg.contains("command") || !cfg["command"].is_string())
      throw el::InputError("config " + path + " names no command and none was given");
    out.push_back(cfg["command"].get<std::string>());
    out.insert(out.end(), flags.begin(), flags.end());
    out.insert(out.end(), args.begin(), args.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"exponent-lab: electrical networks, random walks and scaling exponents", "exponent-lab"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", el::kVersion);

  auto* gen = app.add_subcommand("generate", "write a network JSON");
  add_generator_flags(gen, o);
  gen->add_option("--out", o.out_path, "output path (stdout if absent)");

  auto* res = app.add_subcommand("resist", "annular modulus and effective resistance");
  res->add_option("--net", o.net_path, "network JSON")->required();
  res->add_option("--inner", o.inner, "inner radius r")->required();
  res->add_option("--outer", o.outer, "outer radius R")->required();
  res->add_option("--center", o.center, "'root' or a vertex id");
  res->add_flag("--json", o.print_json, "print JSON");
  res->add_option("--out", o.out_path, "write JSON here");
  res->add_option("--tol", o.tol, "relative residual tolerance");
  res->add_option("--method", o.method, "auto, jacobi, ichol or direct");

  auto* walk = app.add_subcommand("walk", "exit times and running maxima from the root");
  walk->add_option("--net", o.net_path, "network JSON")->required();
  walk->add_option("--walkers", o.walkers, "independent walkers");
  walk->add_option("--steps", o.steps, "step cap per walker (1e6 style accepted)");
  walk->add_option("--seed", o.seed, "walker seed");
  walk->add_option("--disp-horizon", o.disp_horizon, "largest n for running maxima");
  walk->add_option("--max-R", o.max_R, "largest exit radius");
  walk->add_flag("--samples", o.samples, "include per-walker samples");
  walk->add_option("--out", o.out_path, "write JSON here");
  walk->add_option("--csv", o.csv_prefix, "write <prefix>_<series>.csv files");

  auto* str = app.add_subcommand("stretch", "multiscale stretch weight");
  str->add_option("--net", o.net_path, "network JSON")->required();
  str->add_option("--eps", o.eps, "epsilon in (0, 1)");
  str->add_option("--dstar", o.dstar, "target exponent d*");
  str->add_option("--kmax", o.kmax, "largest dyadic scale 2^k");
  str->add_option("--seed", o.seed, "net sampling seed");
  str->add_option("--out", o.out_path, "write JSON here");
  str->add_option("--tol", o.tol, "relative residual tolerance");
  str->add_option("--method", o.method, "auto, jacobi, ichol or direct");

  auto* est = app.add_subcommand("estimate", "fit all exponents for a generated family");
  add_generator_flags(est, o);
  est->add_option("--walkers", o.est_walkers, "walkers per environment");
  est->add_option("--steps", o.est_steps, "step cap per walker");
  est->add_option("--disp-horizon", o.est_horizon, "largest n for running maxima");
  est->add_option("--seeds", o.seeds, "independent environments to pool");
  est->add_option("--delta", o.delta, "annulus exponent: inner radius R^(1-delta)");
  est->add_option("--heat-n", o.heat_n, "largest n for p_2n");
  est->add_option("--walk-seed", o.seed, "seed for the walkers");
  est->add_flag("--no-walks", o.no_walks, "skip d_w and beta");
  est->add_flag("--no-heat", o.no_heat, "skip d_s");
  est->add_flag("--no-zeta", o.no_zeta, "skip resistance exponents");
  est->add_option("--out", o.out_path, "write the report here");
  est->add_option("--csv", o.csv_prefix, "write <prefix>_<series>.csv files");

  auto* ver = app.add_subcommand("verify", "Einstein residuals and the inequality chain");
  ver->add_option("--report", o.report_path, "report from estimate")->required();
  ver->add_option("--tol", o.verify_tol, "absolute tolerance (default 3 combined stderr)");
  ver->add_flag("--strict", o.strict, "exit 3 when the verdict fails");
  ver->add_option("--out", o.out_path, "write the verdict here");

  auto* mtp = app.add_subcommand("mtp-check", "mass-transport and reversibility diagnostics");
  add_generator_flags(mtp, o);
  mtp->add_option("--functional", o.functional, "F1 or F2");
  mtp->add_option("--seeds", o.mtp_seeds, "independent environments");
  mtp->add_option("--root", o.root_law, "stationary or fixed");
  mtp->add_option("--delta", o.part_delta, "partition scale for F2");
  mtp->add_option("--theta", o.theta, "F2 source threshold on c_x");
  mtp->add_option("--out", o.out_path, "write JSON here");

  app.add_option("--threads", o.threads, "worker count (EXPONENT_LAB_THREADS wins)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const el::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  }

  try {
    for (auto* sub : app.get_subcommands()) o.command = sub->get_name();
    if (o.command == "generate") return run_generate(o);
    if (o.command == "resist") return run_resist(o);
    if (o.command == "walk") return run_walk(o);
    if (o.command == "stretch") return run_stretch(o);
    if (o.command == "estimate") return run_estimate(o);
    if (o.command == "verify") return run_verify(o);
    if (o.command == "mtp-check") return run_mtp(o);
  } catch (const el::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
