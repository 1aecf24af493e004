// scheme.hpp
// The fully discrete time step: implicit convex potential part, explicit
// concave part, mobility lagged at the previous state, and the nonlocal
// variable kept mean-free through a Lagrange multiplier. The coupled system
// in (phi, mu, nu, lambda) is solved monolithically by Newton's method; the
// only nonlinearity is the convex-part load, whose Jacobian block is a
// weighted mass matrix.
#pragma once

#include <Eigen/UmfPackSupport>
#include <memory>
#include <random>

#include "okflow/diagnostics.hpp"
#include "okflow/fem.hpp"
#include "okflow/model.hpp"
#include "okflow/solve.hpp"

namespace okflow {

struct SchemeConfig {
  double tau = 1e-2;
  double t_end = 1.0;
  double newton_rel_tol = 1e-10;
  double newton_abs_tol = 1e-12;
  int newton_max_iter = 25;
};

struct StepResult {
  FieldVector phi_next, mu_next, nu_next;
  double lagrange_multiplier = 0.0;
  int newton_iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
};

enum class NewtonGuess { previous_state, zero };

class Stepper {
 public:
  Stepper(const FemSpace& space, const ModelSpec& spec,
          const SchemeConfig& cfg)
      : space_(&space),
        spec_(&spec),
        cfg_(cfg),
        N_(space.mass().rows()),
        c_(space.weighted_mean_functional()),
        mass_solver_(space.mass()),
        stiffness_solver_(space.stiffness()) {
    if (!(cfg.tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(cfg.newton_rel_tol > 0.0) || !(cfg.newton_abs_tol > 0.0))
      throw std::invalid_argument("Newton tolerances must be positive");
    km_values_.resize(space.stiffness().nonZeros());
    w_values_.resize(space.mass().nonZeros());
    build_jacobian_skeleton();
  }

  const FemSpace& space() const { return *space_; }
  const SchemeConfig& config() const { return cfg_; }
  // Weighted stiffness at the previous state, valid after a step() call.
  const SparseMatrix& mobility_stiffness() const { return Km_; }
  // Forcing load at the previous state, valid after a step() call.
  const Vec& forcing_load() const { return bf_; }

  // Chemical potential and nonlocal variable consistent with a given state.
  // Used for the Newton initialization and for reporting the initial state.
  void consistent_potentials(const Vec& phi, Vec& mu, Vec& nu,
                             double& lambda) const {
    const Vec b_nu = space_->mass() * phi;
    lambda = b_nu.sum() / c_.sum();
    nu = stiffness_solver_.solve(b_nu - lambda * c_);
    nu.array() -= c_.dot(nu) / c_.sum();
    const FieldVector phi_f{phi, space_->mesh().level};
    const Vec rhs = spec_->epsilon_sq * (space_->stiffness() * phi) +
                    assemble_nonlinear_load(space_->mesh(), phi_f,
                                            spec_->psi1_d1)
                        .values +
                    assemble_nonlinear_load(space_->mesh(), phi_f,
                                            spec_->psi2_d1)
                        .values +
                    spec_->kappa * (space_->mass() * nu);
    mu = mass_solver_.solve(rhs);
  }

  StepResult step(const FieldVector& phi_n,
                  NewtonGuess guess = NewtonGuess::previous_state) {
    if (phi_n.size() != N_)
      throw std::invalid_argument("step: field/mesh mismatch");
    if (!phi_n.values.allFinite())
      throw std::invalid_argument("step: previous state is not finite");

    prepare_step(phi_n.values);

    Vec phi = guess == NewtonGuess::previous_state ? phi_n.values
                                                   : Vec::Zero(N_).eval();
    Vec mu, nu;
    double lambda;
    consistent_potentials(phi, mu, nu, lambda);

    const ScalarMap& psi1_dd = spec_->psi1_d2;
    std::vector<double> history;
    Vec F(3 * N_ + 1), dx;
    double target = 0.0;
    for (int iter = 0;; ++iter) {
      const double res = residual(phi_n.values, phi, mu, nu, lambda, F);
      history.push_back(res);
      if (iter == 0)
        target = std::max(cfg_.newton_abs_tol, cfg_.newton_rel_tol * res);
      if (res <= target || !std::isfinite(res)) {
        if (!std::isfinite(res))
          throw StepError("Newton residual is not finite", history);
        StepResult out;
        const int level = space_->mesh().level;
        out.phi_next = {std::move(phi), level};
        out.mu_next = {std::move(mu), level};
        out.nu_next = {std::move(nu), level};
        out.lagrange_multiplier = lambda;
        out.newton_iterations = iter;
        out.final_residual = res;
        out.residual_history = std::move(history);
        return out;
      }
      if (iter >= cfg_.newton_max_iter)
        throw StepError(
            "Newton did not converge within " +
                std::to_string(cfg_.newton_max_iter) +
                " iterations (time step too large for this state?)",
            history);

      space_->weighted_mass_values(phi, psi1_dd, w_values_.data());
      const double* kv = space_->stiffness().valuePtr();
      double* jv = J_.valuePtr();
      for (std::size_t k = 0; k < pos_convex_.size(); ++k)
        jv[pos_convex_[k]] = spec_->epsilon_sq * kv[k] + w_values_[k];
      lu_current_ = false;
      const double linear_target = std::max(0.01 * target, 1e-13 * res);
      dx = solve_linear(-F, linear_target);
      phi += dx.segment(0, N_);
      mu += dx.segment(N_, N_);
      nu += dx.segment(2 * N_, N_);
      lambda += dx[3 * N_];
    }
  }

 private:
  void build_jacobian_skeleton() {
    const SparseMatrix& S = space_->mass();  // shared pattern
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(8) * S.nonZeros() + 2 * N_);
    auto add_block = [&](int rb, int cb) {
      for (int r = 0; r < N_; ++r)
        for (int p = S.outerIndexPtr()[r]; p < S.outerIndexPtr()[r + 1]; ++p)
          trips.emplace_back(rb * N_ + r, cb * N_ + S.innerIndexPtr()[p], 1.0);
    };
    add_block(0, 0);  // M / tau
    add_block(0, 1);  // K_m
    add_block(1, 0);  // eps^2 K + W
    add_block(1, 1);  // -M
    add_block(1, 2);  // kappa M
    add_block(2, 0);  // -M
    add_block(2, 2);  // K
    for (int r = 0; r < N_; ++r) {
      trips.emplace_back(2 * N_ + r, 3 * N_, 1.0);
      trips.emplace_back(3 * N_, 2 * N_ + r, 1.0);
    }
    J_.resize(3 * N_ + 1, 3 * N_ + 1);
    J_.setFromTriplets(trips.begin(), trips.end());
    J_.makeCompressed();

    auto block_positions = [&](int rb, int cb, std::vector<int>& pos) {
      pos.resize(S.nonZeros());
      std::size_t k = 0;
      for (int r = 0; r < N_; ++r)
        for (int p = S.outerIndexPtr()[r]; p < S.outerIndexPtr()[r + 1]; ++p)
          pos[k++] = col_index(rb * N_ + r, cb * N_ + S.innerIndexPtr()[p]);
    };
    block_positions(0, 1, pos_mobility_);
    block_positions(1, 0, pos_convex_);

    // constant blocks
    std::vector<int> pos;
    double* jv = J_.valuePtr();
    const double* mv = space_->mass().valuePtr();
    const double* kv = space_->stiffness().valuePtr();
    block_positions(0, 0, pos);
    for (std::size_t k = 0; k < pos.size(); ++k) jv[pos[k]] = mv[k] / cfg_.tau;
    block_positions(1, 1, pos);
    for (std::size_t k = 0; k < pos.size(); ++k) jv[pos[k]] = -mv[k];
    block_positions(1, 2, pos);
    for (std::size_t k = 0; k < pos.size(); ++k)
      jv[pos[k]] = spec_->kappa * mv[k];
    block_positions(2, 0, pos);
    for (std::size_t k = 0; k < pos.size(); ++k) jv[pos[k]] = -mv[k];
    block_positions(2, 2, pos);
    for (std::size_t k = 0; k < pos.size(); ++k) jv[pos[k]] = kv[k];
    for (int r = 0; r < N_; ++r) {
      jv[col_index(2 * N_ + r, 3 * N_)] = c_[r];
      jv[col_index(3 * N_, 2 * N_ + r)] = c_[r];
    }
  }

  int col_index(int row, int col) const {
    for (int p = J_.outerIndexPtr()[col]; p < J_.outerIndexPtr()[col + 1]; ++p)
      if (J_.innerIndexPtr()[p] == row) return p;
    throw Error("stepper: jacobian entry not found");
  }

  void prepare_step(const Vec& phi_n) {
    const ScalarMap& m = spec_->mobility;
    space_->weighted_stiffness_values(
        phi_n,
        [&m](double v) {
          const double mv = m(v);
          if (!(mv > 0.0))
            throw ModelError("mobility not positive at state value " +
                             std::to_string(v));
          return mv;
        },
        km_values_.data());
    Km_ = space_->make_patterned();
    std::copy(km_values_.begin(), km_values_.end(), Km_.valuePtr());
    double* jv = J_.valuePtr();
    for (std::size_t k = 0; k < pos_mobility_.size(); ++k)
      jv[pos_mobility_[k]] = km_values_[k];
    lu_current_ = false;
    const FieldVector phi_f{phi_n, space_->mesh().level};
    bf_ = assemble_nonlinear_load(space_->mesh(), phi_f, spec_->forcing).values;
    bpsi2_ =
        assemble_nonlinear_load(space_->mesh(), phi_f, spec_->psi2_d1).values;
  }

  double residual(const Vec& phi_n, const Vec& phi, const Vec& mu,
                  const Vec& nu, double lambda, Vec& F) const {
    const SparseMatrix& M = space_->mass();
    const SparseMatrix& K = space_->stiffness();
    const FieldVector phi_f{phi, space_->mesh().level};
    const Vec load_psi1 =
        assemble_nonlinear_load(space_->mesh(), phi_f, spec_->psi1_d1).values;
    F.segment(0, N_) = (M * (phi - phi_n)) / cfg_.tau + Km_ * mu - bf_;
    F.segment(N_, N_) = spec_->epsilon_sq * (K * phi) + load_psi1 + bpsi2_ +
                        spec_->kappa * (M * nu) - M * mu;
    F.segment(2 * N_, N_) = K * nu + lambda * c_ - M * phi;
    F[3 * N_] = c_.dot(nu);
    return F.norm();
  }

  void factorize() {
    if (!lu_) {
      lu_ = std::make_unique<Eigen::UmfPackLU<SparseMatrixCol>>();
      lu_->analyzePattern(J_);
    }
    lu_->factorize(J_);
    if (lu_->info() != Eigen::Success)
      throw SolverError("stepper: LU factorization of the Newton system failed",
                        0.0, 0);
    lu_current_ = true;
  }

  // Solves the current Newton system to the requested residual. The last
  // factorization is reused through defect-correction sweeps; when the
  // Jacobian has drifted too far for that to converge quickly, it is
  // refactorized and the solve is exact.
  Vec solve_linear(const Vec& rhs, double target) {
    if (!lu_) factorize();
    Vec dx = lu_->solve(rhs);
    int sweeps = 0;
    while (true) {
      const Vec r = rhs - J_ * dx;
      const double rn = r.norm();
      if (rn <= target) return dx;
      if (!lu_current_ && sweeps >= 3) {
        factorize();
        dx = lu_->solve(rhs);
        sweeps = 0;
        continue;
      }
      if (lu_current_ && sweeps >= 10)
        throw SolverError("stepper: Newton linear solve stagnated", rn,
                          sweeps);
      dx += lu_->solve(r);
      ++sweeps;
    }
  }

  const FemSpace* space_;
  const ModelSpec* spec_;
  SchemeConfig cfg_;
  int N_;
  Vec c_;
  SpdDirectSolver mass_solver_;
  PinnedSpdSolver stiffness_solver_;
  SparseMatrixCol J_;
  std::unique_ptr<Eigen::UmfPackLU<SparseMatrixCol>> lu_;
  bool lu_current_ = false;
  std::vector<int> pos_mobility_, pos_convex_;
  std::vector<double> km_values_, w_values_;
  SparseMatrix Km_;
  Vec bf_, bpsi2_;
};

inline StepResult step(const FemSpace& space, const ModelSpec& spec,
                       const SchemeConfig& cfg, const FieldVector& phi_n,
                       NewtonGuess guess = NewtonGuess::previous_state) {
  Stepper stepper(space, spec, cfg);
  return stepper.step(phi_n, guess);
}

enum class InitialKind { cosine2d, uniform3d, constant };

// Nodal interpolation of the experiment initial conditions. The random field
// maps raw 64-bit draws to (-1e-3, 1e-3) directly so results are identical
// across standard libraries for a fixed seed.
inline FieldVector initial_field(const SimplicialMesh& mesh, InitialKind kind,
                                 std::uint64_t seed = 0,
                                 double constant_value = 0.0) {
  Vec v(mesh.n_vertices());
  switch (kind) {
    case InitialKind::cosine2d: {
      if (mesh.dim != 2)
        throw std::invalid_argument("cosine2d initial data needs dim = 2");
      constexpr double two_pi = 6.283185307179586476925286766559;
      for (int i = 0; i < mesh.n_vertices(); ++i) {
        const auto& x = mesh.vertices[i];
        v[i] = std::cos(two_pi * x[0]) * std::cos(two_pi * x[1]) / 100.0;
      }
      break;
    }
    case InitialKind::uniform3d: {
      if (mesh.dim != 3)
        throw std::invalid_argument("uniform3d initial data needs dim = 3");
      std::mt19937_64 rng(seed);
      for (int i = 0; i < mesh.n_vertices(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v[i] = -0.1 + (2.0 * u - 1.0) * 1e-3;
      }
      break;
    }
    case InitialKind::constant:
      v.setConstant(constant_value);
      break;
  }
  return {std::move(v), mesh.level};
}

inline FieldVector initial_field(
    const SimplicialMesh& mesh,
    const std::function<double(double, double, double)>& f) {
  Vec v(mesh.n_vertices());
  for (int i = 0; i < mesh.n_vertices(); ++i) {
    const auto& x = mesh.vertices[i];
    v[i] = f(x[0], x[1], x[2]);
  }
  return {std::move(v), mesh.level};
}

struct RunResult {
  std::vector<StepReport> reports;
  FieldVector phi_final;
  bool completed = false;
  std::string error_message;
};

// Observer invoked after the initial report and after every accepted step.
using StepObserver =
    std::function<void(int step_index, const StepReport&, const FieldVector& phi,
                       const FieldVector& mu, const FieldVector& nu)>;

struct RunOptions {
  SolveOptions linear;             // inverse-Laplacian solves for the energy
  std::optional<double> entropy_delta;  // enables the entropy column
};

inline RunResult run(const FemSpace& space, const ModelSpec& spec,
                     const SchemeConfig& cfg, const FieldVector& phi0,
                     const std::vector<StepObserver>& observers = {},
                     const RunOptions& options = {}) {
  if (phi0.size() != space.mass().rows())
    throw std::invalid_argument("run: initial field does not match the mesh");
  const int n_steps =
      cfg.t_end > 0.0 ? static_cast<int>(std::llround(cfg.t_end / cfg.tau)) : 0;

  Stepper stepper(space, spec, cfg);
  InverseLaplacianContext ctx(space, options.linear);
  ScalarMap entropy_map;
  if (options.entropy_delta)
    entropy_map = entropy_function(spec, options.entropy_delta);
  const Vec& c = space.weighted_mean_functional();
  const int level = space.mesh().level;

  RunResult result;
  result.reports.reserve(n_steps + 1);

  StepReport report;
  report.time = 0.0;
  report.mass = c.dot(phi0.values);
  report.energy = discrete_energy(space, ctx, spec, phi0);
  if (entropy_map)
    report.entropy = integrate_composed(space.mesh(), phi0, entropy_map);
  result.reports.push_back(report);

  FieldVector phi = phi0;
  {
    Vec mu0, nu0;
    double lambda0;
    stepper.consistent_potentials(phi0.values, mu0, nu0, lambda0);
    const FieldVector mu0_f{std::move(mu0), level}, nu0_f{std::move(nu0), level};
    for (const auto& obs : observers) obs(0, report, phi, mu0_f, nu0_f);
  }

  for (int n = 0; n < n_steps; ++n) {
    StepResult sr;
    try {
      sr = stepper.step(phi);
    } catch (const Error& err) {
      result.phi_final = phi;
      result.completed = false;
      result.error_message = err.what();
      return result;
    }
    ctx.clear_cache();
    const StepReport& prev = result.reports.back();
    StepReport rep;
    rep.time = (n + 1) * cfg.tau;
    rep.mass = c.dot(sr.phi_next.values);
    rep.energy = discrete_energy(space, ctx, spec, sr.phi_next);
    rep.dissipation =
        cfg.tau * dissipation(stepper.mobility_stiffness(), sr.mu_next);
    rep.forcing_work = cfg.tau * stepper.forcing_load().dot(sr.mu_next.values);
    rep.mass_balance_residual =
        rep.mass - prev.mass - cfg.tau * stepper.forcing_load().sum();
    rep.energy_balance_slack =
        prev.energy + rep.forcing_work - rep.dissipation - rep.energy;
    rep.newton_iterations = sr.newton_iterations;
    if (entropy_map)
      rep.entropy = integrate_composed(space.mesh(), sr.phi_next, entropy_map);
    result.reports.push_back(rep);
    phi = sr.phi_next;
    for (const auto& obs : observers)
      obs(n + 1, rep, sr.phi_next, sr.mu_next, sr.nu_next);
  }
  result.phi_final = std::move(phi);
  result.completed = true;
  return result;
}

}  // namespace okflow
