// types.hpp
// Shared aliases and error types for the solver library.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

namespace okflow {

using Vec = Eigen::VectorXd;
// Compressed-row storage; structurally symmetric for all operators built here.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
// Column-major twin used by the direct factorization backends.
using SparseMatrixCol = Eigen::SparseMatrix<double>;

// Nodal coefficients of a P1 function, tagged with the refinement level of
// the mesh they live on.
struct FieldVector {
  Vec values;
  int mesh_level = 0;

  FieldVector() = default;
  FieldVector(Vec v, int level) : values(std::move(v)), mesh_level(level) {}

  Eigen::Index size() const { return values.size(); }
  double& operator[](Eigen::Index i) { return values[i]; }
  double operator[](Eigen::Index i) const { return values[i]; }
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : Error {
  using Error::Error;
};

struct ModelError : Error {
  using Error::Error;
};

struct EvaluationError : Error {
  using Error::Error;
};

struct SolverError : Error {
  double final_residual;
  int iterations;
  SolverError(const std::string& what, double residual, int iters)
      : Error(what), final_residual(residual), iterations(iters) {}
};

struct StepError : Error {
  std::vector<double> residual_trace;
  StepError(const std::string& what, std::vector<double> trace)
      : Error(what), residual_trace(std::move(trace)) {}
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace okflow
