// quadrature.hpp
// Fixed symmetric quadrature rules on simplices, exact for polynomial
// degree 4. All weights are strictly positive; the energy-dissipation
// inequality of the time stepper relies on that.
#pragma once

#include <array>
#include <vector>

#include "okflow/types.hpp"

namespace okflow {

struct QuadraturePoint {
  // Barycentric coordinates (d+1 of them; unused entries zero in 2D).
  std::array<double, 4> lambda;
  double weight;  // weights sum to 1; integral = volume * sum w_q f(x_q)
};

struct SimplexRule {
  int dim;
  std::vector<QuadraturePoint> points;
};

namespace detail {

inline SimplexRule make_triangle_rule_deg4() {
  // 6-point degree-4 rule, two symmetric orbits.
  const double a1 = 0.445948490915965, w1 = 0.223381589678011;
  const double a2 = 0.091576213509771, w2 = 0.109951743655322;
  SimplexRule rule{2, {}};
  for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
    const double b = 1.0 - 2.0 * a;
    rule.points.push_back({{a, a, b, 0.0}, w});
    rule.points.push_back({{a, b, a, 0.0}, w});
    rule.points.push_back({{b, a, a, 0.0}, w});
  }
  return rule;
}

inline SimplexRule make_tetrahedron_rule_deg4() {
  // 14-point degree-4 rule with positive weights: two vertex-type orbits
  // (a,a,a,1-3a) and one edge-type orbit (b,b,1/2-b,1/2-b).
  const double a1 = 0.0927352503108912, w1 = 0.0734930431163619;
  const double a2 = 0.3108859192633005, w2 = 0.1126879257180162;
  const double b = 0.0455037041256497, w3 = 0.0425460207770812;
  SimplexRule rule{3, {}};
  for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
    const double c = 1.0 - 3.0 * a;
    rule.points.push_back({{c, a, a, a}, w});
    rule.points.push_back({{a, c, a, a}, w});
    rule.points.push_back({{a, a, c, a}, w});
    rule.points.push_back({{a, a, a, c}, w});
  }
  const double c = 0.5 - b;
  rule.points.push_back({{b, b, c, c}, w3});
  rule.points.push_back({{b, c, b, c}, w3});
  rule.points.push_back({{b, c, c, b}, w3});
  rule.points.push_back({{c, b, b, c}, w3});
  rule.points.push_back({{c, b, c, b}, w3});
  rule.points.push_back({{c, c, b, b}, w3});
  return rule;
}

}  // namespace detail

inline const SimplexRule& simplex_rule_deg4(int dim) {
  static const SimplexRule tri = detail::make_triangle_rule_deg4();
  static const SimplexRule tet = detail::make_tetrahedron_rule_deg4();
  if (dim == 2) return tri;
  if (dim == 3) return tet;
  throw std::invalid_argument("quadrature: dim must be 2 or 3");
}

}  // namespace okflow
