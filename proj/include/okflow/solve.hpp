// solve.hpp
// Sparse symmetric solves: plain SPD systems and singular SPD systems with a
// mean constraint imposed through a Lagrange multiplier.
//
// Iterative path: Jacobi-preconditioned conjugate gradients; constrained
// systems use the null-space variant (consistent right-hand side, CG in the
// range, kernel shift at the end) so symmetry is never given up.
// Direct path: LDLT factorizations; a singular stiffness gets one node
// pinned, which is exact because the residual of the pinned solve lies in
// the kernel row that was replaced.
#pragma once

#include <Eigen/SparseCholesky>
#include <cmath>

#include "okflow/types.hpp"

namespace okflow {

struct SolveOptions {
  double rel_tolerance = 1e-10;
  double abs_tolerance = 1e-14;
  int max_iterations = 0;  // 0: defaults to 10 * unknowns
  enum class Method { cg, direct };
  Method method = Method::cg;
};

namespace detail {

inline int effective_max_iterations(const SolveOptions& opts, Eigen::Index n) {
  return opts.max_iterations > 0 ? opts.max_iterations
                                 : static_cast<int>(10 * n);
}

// Jacobi-preconditioned CG. If `project_kernel` is set, the residual is kept
// orthogonal to the constant vector each iteration (singular consistent
// systems with kernel = constants).
inline Vec pcg(const SparseMatrix& A, const Vec& b, const SolveOptions& opts,
               bool project_kernel) {
  const Eigen::Index n = A.rows();
  const int max_iter = effective_max_iterations(opts, n);
  const double target = std::max(opts.abs_tolerance,
                                 opts.rel_tolerance * b.norm());
  Vec diag_inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = A.coeff(i, i);
    diag_inv[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  auto project = [&](Vec& v) {
    if (project_kernel) v.array() -= v.mean();
  };
  Vec x = Vec::Zero(n);
  Vec r = b;
  project(r);
  if (r.norm() <= target) return x;
  Vec z = diag_inv.asDiagonal() * r;
  Vec p = z;
  double rz = r.dot(z);
  double final_res = r.norm();
  for (int it = 1; it <= max_iter; ++it) {
    Vec Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw SolverError("cg: non-positive curvature encountered", final_res, it);
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    project(r);
    final_res = r.norm();
    if (final_res <= target) {
      // verify against the true residual before accepting
      Vec true_r = b - A * x;
      project(true_r);
      final_res = true_r.norm();
      if (final_res <= target) return x;
      r = true_r;
      z = diag_inv.asDiagonal() * r;
      p = z;
      rz = r.dot(z);
      continue;
    }
    z = diag_inv.asDiagonal() * r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("cg: no convergence within iteration budget", final_res,
                    max_iter);
}

}  // namespace detail

// SPD direct factorization, reusable across right-hand sides.
class SpdDirectSolver {
 public:
  explicit SpdDirectSolver(const SparseMatrix& A) {
    SparseMatrixCol Ac = A;
    ldlt_.compute(Ac);
    if (ldlt_.info() != Eigen::Success)
      throw SolverError("direct: SPD factorization failed", 0.0, 0);
  }
  Vec solve(const Vec& b) const { return ldlt_.solve(b); }

 private:
  Eigen::SimplicialLDLT<SparseMatrixCol> ldlt_;
};

// Direct factorization of a singular SPD matrix with kernel = constants.
// Pins one node; solutions of consistent systems come out with that node at
// zero and are shifted to the requested mean afterwards.
class PinnedSpdSolver {
 public:
  explicit PinnedSpdSolver(const SparseMatrix& A) {
    SparseMatrixCol Ac = A;
    double sigma = Ac.coeff(0, 0);
    if (!(sigma > 0.0)) sigma = 1.0;
    Ac.coeffRef(0, 0) += sigma;
    ldlt_.compute(Ac);
    if (ldlt_.info() != Eigen::Success)
      throw SolverError("direct: pinned factorization failed", 0.0, 0);
  }
  Vec solve(const Vec& consistent_rhs) const {
    return ldlt_.solve(consistent_rhs);
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrixCol> ldlt_;
};

inline Vec solve_spd(const SparseMatrix& A, const Vec& b,
                     const SolveOptions& opts = {}) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::invalid_argument("solve_spd: shape mismatch");
  if (opts.method == SolveOptions::Method::direct) {
    const Vec x = SpdDirectSolver(A).solve(b);
    const double res = (A * x - b).norm();
    const double target =
        std::max(opts.abs_tolerance, opts.rel_tolerance * b.norm());
    if (res > std::max(target, 1e-12 * b.norm()))
      throw SolverError("direct: residual contract violated", res, 0);
    return x;
  }
  return detail::pcg(A, b, opts, /*project_kernel=*/false);
}

struct ConstrainedSolution {
  Vec x;
  double lambda;
};

// Solves A x + lambda c = b with c^T x = 0, for symmetric PSD A whose kernel
// is spanned by the constant vector. The multiplier is determined by
// consistency (left-multiplying by the constant vector), the remaining
// singular system is solved in the range of A, and the kernel component is
// fixed by the constraint.
inline ConstrainedSolution solve_constrained(const SparseMatrix& A,
                                             const Vec& c, const Vec& b,
                                             const SolveOptions& opts = {}) {
  if (A.rows() != A.cols() || A.rows() != b.size() || c.size() != b.size())
    throw std::invalid_argument("solve_constrained: shape mismatch");
  const double c_mass = c.sum();
  if (c_mass == 0.0)
    throw std::invalid_argument("solve_constrained: c^T 1 must be nonzero");
  const double lambda = b.sum() / c_mass;
  const Vec b_tilde = b - lambda * c;
  Vec x;
  if (opts.method == SolveOptions::Method::direct) {
    x = PinnedSpdSolver(A).solve(b_tilde);
  } else {
    x = detail::pcg(A, b_tilde, opts, /*project_kernel=*/true);
  }
  x.array() -= c.dot(x) / c_mass;
  return {std::move(x), lambda};
}

}  // namespace okflow
