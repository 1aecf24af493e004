// fem.hpp
// P1 finite elements: mass/stiffness/weighted assembly, nonlinear loads,
// composed integrals, inter-mesh transfer, and integral means.
//
// All matrices share one sparsity layout (the vertex adjacency graph), so a
// single per-cell entry map supports value-only reassembly of the matrices
// that change during time stepping.
#pragma once

#include <functional>
#include <vector>

#include "okflow/mesh.hpp"
#include "okflow/quadrature.hpp"
#include "okflow/types.hpp"

namespace okflow {

using ScalarMap = std::function<double(double)>;

namespace detail {

// Exact P1 mass entries: int lambda_i lambda_j = vol * (1+delta_ij) * d! / (d+2)!
inline double mass_factor(int d, bool diag) {
  const double dfac = d == 2 ? 2.0 : 6.0;
  const double d2fac = d == 2 ? 24.0 : 120.0;
  return (diag ? 2.0 : 1.0) * dfac / d2fac;
}

}  // namespace detail

class FemSpace {
 public:
  explicit FemSpace(const SimplicialMesh& mesh) : mesh_(&mesh) {
    const int nv = mesh.n_vertices(), vpc = mesh.verts_per_cell();
    geom_.reserve(mesh.n_cells());
    for (int c = 0; c < mesh.n_cells(); ++c)
      geom_.push_back(barycentric_gradients(mesh, c));

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_cells()) * vpc * vpc);
    for (const auto& cell : mesh.cells)
      for (int i = 0; i < vpc; ++i)
        for (int j = 0; j < vpc; ++j)
          trips.emplace_back(cell[i], cell[j], 0.0);
    pattern_.resize(nv, nv);
    pattern_.setFromTriplets(trips.begin(), trips.end());
    pattern_.makeCompressed();

    entry_map_.resize(static_cast<std::size_t>(mesh.n_cells()) * vpc * vpc);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const auto& cell = mesh.cells[c];
      for (int i = 0; i < vpc; ++i)
        for (int j = 0; j < vpc; ++j)
          entry_map_[(static_cast<std::size_t>(c) * vpc + i) * vpc + j] =
              value_index(cell[i], cell[j]);
    }

    M_ = pattern_;
    K_ = pattern_;
    double* mv = M_.valuePtr();
    double* kv = K_.valuePtr();
    const int d = mesh.dim;
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const auto& g = geom_[c];
      for (int i = 0; i < vpc; ++i)
        for (int j = 0; j < vpc; ++j) {
          const int pos = entry(c, i, j);
          mv[pos] += g.volume * detail::mass_factor(d, i == j);
          kv[pos] += g.volume * g.gradients[i].dot(g.gradients[j]);
        }
    }
    c_ = M_ * Vec::Ones(nv);
  }

  const SimplicialMesh& mesh() const { return *mesh_; }
  const SparseMatrix& mass() const { return M_; }
  const SparseMatrix& stiffness() const { return K_; }
  const Vec& weighted_mean_functional() const { return c_; }  // M * 1
  const CellGeometry& geometry(int cell) const { return geom_[cell]; }

  // Fresh matrix with the shared pattern and zeroed values.
  SparseMatrix make_patterned() const {
    SparseMatrix A = pattern_;
    std::fill(A.valuePtr(), A.valuePtr() + A.nonZeros(), 0.0);
    return A;
  }

  // entries int w(q_h) grad phi_i . grad phi_j, degree-4 rule
  void weighted_stiffness_values(const Vec& q, const ScalarMap& weight,
                                 double* values) const {
    fill_weighted(q, weight, values, /*stiffness=*/true,
                  "weighted stiffness: negative weight encountered");
  }

  // entries int w(q_h) phi_i phi_j, degree-4 rule
  void weighted_mass_values(const Vec& q, const ScalarMap& weight,
                            double* values) const {
    fill_weighted(q, weight, values, /*stiffness=*/false,
                  "weighted mass: non-finite weight encountered");
  }

  int entry(int cell, int i, int j) const {
    const int vpc = mesh_->verts_per_cell();
    return entry_map_[(static_cast<std::size_t>(cell) * vpc + i) * vpc + j];
  }

 private:
  int value_index(int row, int col) const {
    for (int p = pattern_.outerIndexPtr()[row];
         p < pattern_.outerIndexPtr()[row + 1]; ++p)
      if (pattern_.innerIndexPtr()[p] == col) return p;
    throw Error("FemSpace: entry not present in pattern");
  }

  void fill_weighted(const Vec& q, const ScalarMap& weight, double* values,
                     bool stiffness, const char* bad_weight_msg) const {
    const auto& rule = simplex_rule_deg4(mesh_->dim);
    const int vpc = mesh_->verts_per_cell();
    std::fill(values, values + pattern_.nonZeros(), 0.0);
    for (int c = 0; c < mesh_->n_cells(); ++c) {
      const auto& cell = mesh_->cells[c];
      const auto& g = geom_[c];
      for (const auto& qp : rule.points) {
        double qval = 0.0;
        for (int i = 0; i < vpc; ++i) qval += q[cell[i]] * qp.lambda[i];
        const double w = weight(qval);
        if (stiffness) {
          if (w < 0.0)
            throw ModelError(std::string(bad_weight_msg) + " at state value " +
                             std::to_string(qval));
        } else if (!std::isfinite(w)) {
          throw EvaluationError(std::string(bad_weight_msg) +
                                " at state value " + std::to_string(qval));
        }
        const double scale = w * qp.weight * g.volume;
        for (int i = 0; i < vpc; ++i)
          for (int j = 0; j < vpc; ++j) {
            const double factor =
                stiffness ? g.gradients[i].dot(g.gradients[j])
                          : qp.lambda[i] * qp.lambda[j];
            values[entry(c, i, j)] += scale * factor;
          }
      }
    }
  }

  const SimplicialMesh* mesh_;
  SparseMatrix pattern_, M_, K_;
  Vec c_;
  std::vector<CellGeometry> geom_;
  std::vector<int> entry_map_;
};

inline SparseMatrix assemble_mass(const SimplicialMesh& mesh) {
  return FemSpace(mesh).mass();
}

inline SparseMatrix assemble_stiffness(const SimplicialMesh& mesh) {
  return FemSpace(mesh).stiffness();
}

inline SparseMatrix assemble_weighted_stiffness(const FemSpace& space,
                                                const FieldVector& q,
                                                const ScalarMap& weight) {
  SparseMatrix A = space.make_patterned();
  space.weighted_stiffness_values(q.values, weight, A.valuePtr());
  return A;
}

inline SparseMatrix assemble_weighted_mass(const FemSpace& space,
                                           const FieldVector& q,
                                           const ScalarMap& weight) {
  SparseMatrix A = space.make_patterned();
  space.weighted_mass_values(q.values, weight, A.valuePtr());
  return A;
}

// Dual vector b_i = int g(q_h) phi_i, degree-4 rule.
inline FieldVector assemble_nonlinear_load(const SimplicialMesh& mesh,
                                           const FieldVector& q,
                                           const ScalarMap& g) {
  if (q.size() != mesh.n_vertices())
    throw std::invalid_argument("assemble_nonlinear_load: field/mesh mismatch");
  const auto& rule = simplex_rule_deg4(mesh.dim);
  const int vpc = mesh.verts_per_cell();
  Vec b = Vec::Zero(mesh.n_vertices());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cells[c];
    const auto geom = barycentric_gradients(mesh, c);
    for (const auto& qp : rule.points) {
      double qval = 0.0;
      for (int i = 0; i < vpc; ++i) qval += q[cell[i]] * qp.lambda[i];
      const double gval = g(qval);
      if (!std::isfinite(gval))
        throw EvaluationError("nonlinear load: non-finite integrand at state value " +
                              std::to_string(qval));
      const double scale = gval * qp.weight * geom.volume;
      for (int i = 0; i < vpc; ++i) b[cell[i]] += scale * qp.lambda[i];
    }
  }
  return {std::move(b), mesh.level};
}

// int g(q_h) dx with the same rule as the load assembly.
inline double integrate_composed(const SimplicialMesh& mesh,
                                 const FieldVector& q, const ScalarMap& g) {
  if (q.size() != mesh.n_vertices())
    throw std::invalid_argument("integrate_composed: field/mesh mismatch");
  const auto& rule = simplex_rule_deg4(mesh.dim);
  const int vpc = mesh.verts_per_cell();
  double total = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cells[c];
    const auto geom = barycentric_gradients(mesh, c);
    double cell_sum = 0.0;
    for (const auto& qp : rule.points) {
      double qval = 0.0;
      for (int i = 0; i < vpc; ++i) qval += q[cell[i]] * qp.lambda[i];
      cell_sum += qp.weight * g(qval);
    }
    total += cell_sum * geom.volume;
  }
  return total;
}

// Exact embedding of a coarse P1 function into a nested finer space.
inline FieldVector transfer_to_fine(const FieldVector& coarse_field,
                                    const SimplicialMesh& coarse_mesh,
                                    const SimplicialMesh& fine_mesh) {
  if (coarse_field.size() != coarse_mesh.n_vertices())
    throw std::invalid_argument("transfer_to_fine: field/mesh mismatch");
  if (fine_mesh.dim != coarse_mesh.dim)
    throw std::invalid_argument("transfer_to_fine: dimension mismatch");
  int ratio = fine_mesh.n / coarse_mesh.n;
  if (ratio * coarse_mesh.n != fine_mesh.n || ratio < 1 ||
      (ratio & (ratio - 1)) != 0)
    throw std::invalid_argument(
        "transfer_to_fine: fine mesh is not a nested refinement");
  Vec fine(fine_mesh.n_vertices());
  for (int v = 0; v < fine_mesh.n_vertices(); ++v)
    fine[v] = evaluate_p1(coarse_mesh, coarse_field.values,
                          fine_mesh.vertices[v]);
  return {std::move(fine), fine_mesh.level};
}

inline double mean_value(const FieldVector& field, const SparseMatrix& M) {
  if (field.size() != M.rows())
    throw std::invalid_argument("mean_value: size mismatch");
  const Vec Mf = M * field.values;
  const double volume = (M * Vec::Ones(M.rows())).sum();
  return Mf.sum() / volume;
}

inline FieldVector mean_free_part(const FieldVector& field,
                                  const SparseMatrix& M) {
  const double mean = mean_value(field, M);
  return {field.values.array() - mean, field.mesh_level};
}

}  // namespace okflow
