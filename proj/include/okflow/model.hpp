// model.hpp
// Scalar constitutive ingredients: the convex-concave split potential, the
// mobility and forcing, clamp-type regularizations of mobility and convex
// potential part, and the entropy function Phi with Phi'' = 1/m.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "okflow/types.hpp"

namespace okflow {

using ScalarMap = std::function<double(double)>;

struct ModelSpec {
  double epsilon_sq = 1e-3;  // interfacial width parameter, > 0
  double kappa = 0.0;        // repulsion strength, >= 0
  ScalarMap psi1, psi1_d1, psi1_d2;  // convex part and derivatives
  ScalarMap psi2, psi2_d1, psi2_d2;  // concave part and derivatives
  ScalarMap mobility;
  ScalarMap forcing;
  double mobility_floor = 0.0;       // checked lower bound for m
  std::optional<double> delta;       // regularization width, in (0,1)

  double psi(double x) const { return psi1(x) + psi2(x); }
  double psi_d1(double x) const { return psi1_d1(x) + psi2_d1(x); }
};

inline ScalarMap zero_forcing() {
  return [](double) { return 0.0; };
}

// f(x) = 1/10 max{0, 1-x^2}
inline ScalarMap logistic_forcing() {
  return [](double x) { return 0.1 * std::max(0.0, 1.0 - x * x); };
}

// Quartic double well split as Psi1 = (x^4+1)/4 (convex, implicit) and
// Psi2 = -x^2/2 (concave, explicit), with the nearly degenerate mobility
// m(x) = 1e-14 + (1-x^2)^2/16.
inline ModelSpec builtin_quartic_model() {
  ModelSpec spec;
  spec.epsilon_sq = 1e-3;
  spec.kappa = 0.0;
  spec.psi1 = [](double x) { return 0.25 * (x * x * x * x + 1.0); };
  spec.psi1_d1 = [](double x) { return x * x * x; };
  spec.psi1_d2 = [](double x) { return 3.0 * x * x; };
  spec.psi2 = [](double x) { return -0.5 * x * x; };
  spec.psi2_d1 = [](double x) { return -x; };
  spec.psi2_d2 = [](double) { return -1.0; };
  spec.mobility = [](double x) {
    const double s = 1.0 - x * x;
    return 1e-14 + s * s / 16.0;
  };
  spec.forcing = zero_forcing();
  spec.mobility_floor = 1e-14;
  return spec;
}

// Psi1'(a) + Psi2'(b): implicit argument first, explicit argument second.
inline double split_potential_derivative(const ModelSpec& spec, double a,
                                         double b) {
  const double value = spec.psi1_d1(a) + spec.psi2_d1(b);
  if (!std::isfinite(value))
    throw EvaluationError("split potential derivative is not finite at (" +
                          std::to_string(a) + ", " + std::to_string(b) + ")");
  return value;
}

namespace detail {

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("regularization width delta must be in (0,1)");
}

}  // namespace detail

// Three-branch clamp of the mobility at +-(1-delta).
inline ScalarMap regularized_mobility(const ModelSpec& spec, double delta) {
  detail::check_delta(delta);
  ScalarMap m = spec.mobility;
  const double s = 1.0 - delta;
  return [m, s](double x) {
    if (x <= -s) return m(-s);
    if (x >= s) return m(s);
    return m(x);
  };
}

struct RegularizedPotential {
  ScalarMap psi1, psi1_d1, psi1_d2;        // clamped convex part
  ScalarMap psi2_bar, psi2_bar_d1, psi2_bar_d2;  // quadratic extension of Psi2
};

// Psi_{1,delta} clamps the second derivative at +-(1-delta); inside the safe
// interval it coincides with Psi1, outside it continues as the quadratic
// matching value and slope at the seam (the exact antiderivative of the
// clamped second derivative). Psi2 is extended beyond [-1,1] by its
// second-order Taylor polynomials at +-1.
inline RegularizedPotential regularized_potential(const ModelSpec& spec,
                                                  double delta) {
  detail::check_delta(delta);
  const double s = 1.0 - delta;
  RegularizedPotential reg;

  auto p1 = spec.psi1, p1d = spec.psi1_d1, p1dd = spec.psi1_d2;
  reg.psi1 = [p1, p1d, p1dd, s](double x) {
    if (x > s) {
      const double t = x - s;
      return p1(s) + p1d(s) * t + 0.5 * p1dd(s) * t * t;
    }
    if (x < -s) {
      const double t = x + s;
      return p1(-s) + p1d(-s) * t + 0.5 * p1dd(-s) * t * t;
    }
    return p1(x);
  };
  reg.psi1_d1 = [p1d, p1dd, s](double x) {
    if (x > s) return p1d(s) + p1dd(s) * (x - s);
    if (x < -s) return p1d(-s) + p1dd(-s) * (x + s);
    return p1d(x);
  };
  reg.psi1_d2 = [p1dd, s](double x) {
    if (x > s) return p1dd(s);
    if (x < -s) return p1dd(-s);
    return p1dd(x);
  };

  auto p2 = spec.psi2, p2d = spec.psi2_d1, p2dd = spec.psi2_d2;
  reg.psi2_bar = [p2, p2d, p2dd](double x) {
    if (x > 1.0) {
      const double t = x - 1.0;
      return p2(1.0) + p2d(1.0) * t + 0.5 * p2dd(1.0) * t * t;
    }
    if (x < -1.0) {
      const double t = x + 1.0;
      return p2(-1.0) + p2d(-1.0) * t + 0.5 * p2dd(-1.0) * t * t;
    }
    return p2(x);
  };
  reg.psi2_bar_d1 = [p2d, p2dd](double x) {
    if (x > 1.0) return p2d(1.0) + p2dd(1.0) * (x - 1.0);
    if (x < -1.0) return p2d(-1.0) + p2dd(-1.0) * (x + 1.0);
    return p2d(x);
  };
  reg.psi2_bar_d2 = [p2dd](double x) {
    if (x > 1.0) return p2dd(1.0);
    if (x < -1.0) return p2dd(-1.0);
    return p2dd(x);
  };
  return reg;
}

namespace detail {

// Adaptive Simpson on [a,b] (a <= b), relative tolerance on the running total.
inline double adaptive_simpson(const ScalarMap& f, double a, double m, double b,
                               double fa, double fm, double fb, double whole,
                               double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || (b - a) < 1e-14)
    return left + right + delta / 15.0;
  if (depth <= 0)
    throw EvaluationError("entropy quadrature did not converge");
  return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate_adaptive(const ScalarMap& f, double a, double b,
                                 double tol_abs,
                                 const std::vector<double>& breaks) {
  if (a == b) return 0.0;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> nodes{a};
  for (double s : breaks)
    if (s > a && s < b) nodes.push_back(s);
  std::sort(nodes.begin(), nodes.end());
  nodes.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double lo = nodes[i], hi = nodes[i + 1], mid = 0.5 * (lo + hi);
    const double flo = f(lo), fmid = f(mid), fhi = f(hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += adaptive_simpson(f, lo, mid, hi, flo, fmid, fhi, whole,
                              tol_abs / static_cast<double>(nodes.size()), 40);
  }
  return sign * total;
}

}  // namespace detail

// Phi with Phi'' = 1/m, Phi(0) = Phi'(0) = 0, evaluated through the
// one-dimensional representation Phi(x) = int_0^x (x-z)/m(z) dz. When delta
// is given, m is replaced by its clamp m_delta and the integration is split
// at the clamp seams.
inline ScalarMap entropy_function(const ModelSpec& spec,
                                  std::optional<double> delta = {}) {
  ScalarMap m = delta ? regularized_mobility(spec, *delta) : spec.mobility;
  std::vector<double> breaks;
  if (delta) breaks = {-(1.0 - *delta), 1.0 - *delta};
  return [m, breaks](double x) {
    if (x == 0.0) return 0.0;
    ScalarMap integrand = [&m, x](double z) {
      const double mz = m(z);
      if (!(mz > 0.0))
        throw ModelError("entropy function: mobility not positive at " +
                         std::to_string(z));
      return (x - z) / mz;
    };
    const double scale = std::abs(x) * (std::abs(x) + 1.0);
    return detail::integrate_adaptive(integrand, 0.0, x, 1e-10 * scale, breaks);
  };
}

// Startup validation of the structural assumptions on sampled grids.
inline void validate_model(const ModelSpec& spec, double lo = -2.0,
                           double hi = 2.0, int samples = 401) {
  if (!(spec.epsilon_sq > 0.0)) throw ModelError("epsilon_sq must be positive");
  if (spec.kappa < 0.0) throw ModelError("kappa must be nonnegative");
  for (int i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * i / (samples - 1);
    if (spec.psi1_d2(x) < -1e-12)
      throw ModelError("convex split violated: psi1'' < 0 at " +
                       std::to_string(x));
    if (spec.psi2_d2(x) > 1e-12)
      throw ModelError("concave split violated: psi2'' > 0 at " +
                       std::to_string(x));
    if (spec.mobility(x) < spec.mobility_floor)
      throw ModelError("mobility below configured floor at " +
                       std::to_string(x));
    const double f = spec.forcing(x);
    if (!(f >= 0.0) || !std::isfinite(f))
      throw ModelError("forcing must be nonnegative and bounded");
  }
}

}  // namespace okflow
