// diagnostics.hpp
// Discrete energy, dissipation, entropy, and the mass / energy-dissipation
// balance residuals tracked per step.
#pragma once

#include <optional>
#include <vector>

#include "okflow/fem.hpp"
#include "okflow/model.hpp"
#include "okflow/operators.hpp"

namespace okflow {

struct StepReport {
  double time = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;    // tau * mu^T K_m mu
  double forcing_work = 0.0;   // tau * (f(phi^n), mu^{n+1})
  double mass_balance_residual = 0.0;
  double energy_balance_slack = 0.0;
  int newton_iterations = 0;
  std::optional<double> entropy;
};

// E(phi) = eps^2/2 |grad phi|^2 + int Psi(phi) + kappa/2 |phi - mean|^2 in the
// discrete H^-1 norm. The potential integral uses the same degree-4 rule as
// the load assembly so the per-step energy identity closes to solver
// tolerance.
inline double discrete_energy(const FemSpace& space,
                              const InverseLaplacianContext& ctx,
                              const ModelSpec& spec, const FieldVector& phi) {
  const double grad = 0.5 * spec.epsilon_sq *
                      phi.values.dot(space.stiffness() * phi.values);
  const double pot = integrate_composed(
      space.mesh(), phi, [&spec](double x) { return spec.psi(x); });
  double nonlocal = 0.0;
  if (spec.kappa != 0.0) {
    const Vec w = ctx.apply(phi.values, /*weighted=*/false);
    nonlocal = 0.5 * spec.kappa * w.dot(space.stiffness() * w);
  }
  return grad + pot + nonlocal;
}

// mu^T K_m mu with the weighted stiffness assembled at the previous state.
inline double dissipation(const SparseMatrix& Km, const FieldVector& mu) {
  return mu.values.dot(Km * mu.values);
}

struct BalanceResiduals {
  double mass_residual;
  double energy_slack;
};

// Windowed Theorem-style balances over a contiguous slice of reports
// [first, last]. Per-step mass residuals telescope; the energy slack is
// evaluated from the endpoint energies and the accumulated work/dissipation.
inline BalanceResiduals balance_residuals(const std::vector<StepReport>& reports,
                                          std::size_t first, std::size_t last) {
  if (first > last || last >= reports.size())
    throw std::invalid_argument("balance_residuals: bad window");
  double mass_residual = 0.0;
  double work = 0.0, diss = 0.0;
  for (std::size_t k = first + 1; k <= last; ++k) {
    mass_residual += reports[k].mass_balance_residual;
    work += reports[k].forcing_work;
    diss += reports[k].dissipation;
  }
  const double slack =
      reports[first].energy + work - diss - reports[last].energy;
  return {mass_residual, slack};
}

inline BalanceResiduals balance_residuals(
    const std::vector<StepReport>& reports) {
  if (reports.empty())
    throw std::invalid_argument("balance_residuals: empty window");
  return balance_residuals(reports, 0, reports.size() - 1);
}

// int Phi_delta(phi_h) dx, degree-4 rule composed with the entropy function.
inline double entropy_integral(const SimplicialMesh& mesh,
                               const ModelSpec& spec, double delta,
                               const FieldVector& phi) {
  const ScalarMap phi_delta = entropy_function(spec, delta);
  return integrate_composed(mesh, phi, phi_delta);
}

}  // namespace okflow
