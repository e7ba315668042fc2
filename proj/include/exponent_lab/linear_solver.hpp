#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "exponent_lab/error.hpp"
#include "exponent_lab/network.hpp"

namespace exponent_lab {

enum class SolverMethod { automatic, jacobi_cg, ichol_cg, direct };

struct SolverOptions {
  double tol = 1e-10;         // relative residual |b - Ax| / |b|
  std::size_t max_iter = 0;   // 0 means 20 * unknowns
  SolverMethod method = SolverMethod::automatic;
  // Automatic mode factors directly up to this many unknowns; high-contrast
  // conductances make CG slow long before a sparse factor gets expensive.
  std::size_t direct_limit = 200'000;
};

struct SolveInfo {
  double residual = 0;
  long iterations = 0;
  std::string method;
  std::size_t unknowns = 0;
  std::size_t excluded = 0;  // free vertices left out of the system
};

using SparseMatrix = Eigen::SparseMatrix<double>;

namespace detail {

inline double relative_residual(const SparseMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  double nb = b.norm();
  double nr = (b - A * x).norm();
  return nb > 0 ? nr / nb : nr;
}

template <class Precond>
inline bool try_cg(const SparseMatrix& A, const Eigen::VectorXd& b, const SolverOptions& opt, Eigen::VectorXd& x,
                   SolveInfo& info, const char* name) {
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Precond> cg;
  cg.setTolerance(opt.tol);
  cg.setMaxIterations(static_cast<Eigen::Index>(opt.max_iter ? opt.max_iter : 20 * std::max<Eigen::Index>(A.rows(), 1)));
  cg.compute(A);
  if (cg.info() != Eigen::Success) return false;
  x = cg.solve(b);
  info.iterations += static_cast<long>(cg.iterations());
  info.method = name;
  info.residual = relative_residual(A, x, b);
  // Eigen's own stopping test is on the preconditioned estimate; re-check.
  return info.residual <= opt.tol * 10;
}

}  // namespace detail

// Symmetric positive definite solve. Automatic mode uses a sparse LDL^T
// factor for small systems; otherwise Jacobi-preconditioned CG, then
// incomplete-Cholesky CG, then the factor as a last resort.
inline Eigen::VectorXd solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, const SolverOptions& opt,
                                 SolveInfo& info) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  info.unknowns = static_cast<std::size_t>(A.rows());
  if (A.rows() == 0 || b.norm() == 0) {
    info.residual = 0;
    info.method = "trivial";
    return x;
  }
  using Jacobi = Eigen::DiagonalPreconditioner<double>;
  using IChol = Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>;
  auto direct = [&] {
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NumericalError("sparse LDL^T factorization failed");
    x = ldlt.solve(b);
    info.method = "direct";
    info.residual = detail::relative_residual(A, x, b);
    return info.residual <= opt.tol * 10;
  };
  bool ok = false;
  switch (opt.method) {
    case SolverMethod::jacobi_cg: ok = detail::try_cg<Jacobi>(A, b, opt, x, info, "jacobi_cg"); break;
    case SolverMethod::ichol_cg: ok = detail::try_cg<IChol>(A, b, opt, x, info, "ichol_cg"); break;
    case SolverMethod::direct: ok = direct(); break;
    case SolverMethod::automatic:
      if (static_cast<std::size_t>(A.rows()) <= opt.direct_limit) {
        ok = direct();
        break;
      }
      ok = detail::try_cg<Jacobi>(A, b, opt, x, info, "jacobi_cg") ||
           detail::try_cg<IChol>(A, b, opt, x, info, "ichol_cg") || direct();
      break;
  }
  if (!ok)
    throw NumericalError("linear solve did not reach tolerance " + std::to_string(opt.tol) + " (final residual " +
                         std::to_string(info.residual) + ", " + info.method + ")");
  return x;
}

// Solves L phi = f on the free vertices with phi prescribed on fixed ones,
// L the weighted Laplacian of the positive-conductance subgraph. Free
// vertices with c = 0, and free components without a positive edge to a
// fixed vertex, are excluded and get value 0 (their f must vanish).
inline std::vector<double> solve_dirichlet(const Network& net, const std::vector<char>& fixed,
                                           const std::vector<double>& fixed_value, const std::vector<double>& f,
                                           const SolverOptions& opt, SolveInfo& info) {
  const std::size_t n = net.size();
  std::vector<double> phi(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (fixed[v]) phi[v] = fixed_value[v];

  // Free components reachable through positive edges; keep those anchored.
  std::vector<int> comp(n, -1);
  std::vector<char> anchored;
  std::vector<VertexId> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (fixed[s] || comp[s] >= 0 || !(net.conductance(VertexId(s)) > 0)) continue;
    int id = static_cast<int>(anchored.size());
    anchored.push_back(0);
    comp[s] = id;
    stack.assign(1, VertexId(s));
    while (!stack.empty()) {
      VertexId x = stack.back();
      stack.pop_back();
      for (const Incidence& in : net.incident(x)) {
        if (!(net.edge(in.edge).c > 0)) continue;
        if (fixed[in.to]) {
          anchored[id] = 1;
        } else if (comp[in.to] < 0) {
          comp[in.to] = id;
          stack.push_back(in.to);
        }
      }
    }
  }
  std::vector<int> index(n, -1);
  int m = 0;
  info.excluded = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (fixed[v]) continue;
    if (comp[v] >= 0 && anchored[comp[v]]) {
      index[v] = m++;
    } else {
      ++info.excluded;
      if (!f.empty() && f[v] != 0)
        throw InputError("vertex " + std::to_string(v) + " carries a source but has no path to the boundary set");
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (std::size_t v = 0; v < n; ++v) {
    int i = index[v];
    if (i < 0) continue;
    if (!f.empty()) b[i] += f[v];
    double diag = 0;
    for (const Incidence& in : net.incident(VertexId(v))) {
      double c = net.edge(in.edge).c;
      if (!(c > 0) || in.to == VertexId(v)) continue;
      diag += c;
      if (fixed[in.to])
        b[i] += c * phi[in.to];
      else if (index[in.to] >= 0)
        trip.emplace_back(i, index[in.to], -c);
    }
    trip.emplace_back(i, i, diag);
  }
  SparseMatrix A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd x = solve_spd(A, b, opt, info);
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] >= 0) phi[v] = x[index[v]];
  return phi;
}

}  // namespace exponent_lab
