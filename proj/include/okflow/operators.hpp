// operators.hpp
// Discrete (weighted) inverse Laplacian on the mean-free P1 subspace and the
// H^-1-type norms built from it. The mean constraint uses the L2 mean
// functional c = M*1, not the nodal average.
#pragma once

#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "okflow/fem.hpp"
#include "okflow/solve.hpp"

namespace okflow {

class InverseLaplacianContext {
 public:
  InverseLaplacianContext(const FemSpace& space, SolveOptions opts = {})
      : space_(&space), opts_(opts) {
    const Vec k1 = space.stiffness() * Vec::Ones(space.stiffness().rows());
    if (k1.lpNorm<Eigen::Infinity>() > 1e-12)
      throw Error("inverse laplacian: stiffness kernel check failed");
  }

  const FemSpace& space() const { return *space_; }
  const SolveOptions& options() const { return opts_; }

  // Rebuilds the weighted stiffness at state q; invalidates cached results
  // that were computed against the previous weight.
  void set_weight(const FieldVector& q, const ScalarMap& weight) {
    Km_ = assemble_weighted_stiffness(*space_, q, weight);
    km_factor_.reset();
    ++weight_epoch_;
    clear_cache();
  }

  void set_weight_matrix(SparseMatrix Km) {
    Km_ = std::move(Km);
    km_factor_.reset();
    ++weight_epoch_;
    clear_cache();
  }

  bool has_weight() const { return Km_.has_value(); }
  const SparseMatrix& weighted_stiffness() const {
    if (!Km_) throw Error("inverse laplacian: no weight set");
    return *Km_;
  }

  void clear_cache() const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache_.clear();
  }

  Vec apply(const Vec& v, bool weighted) const {
    const SparseMatrix& A = weighted ? weighted_stiffness() : space_->stiffness();
    const std::uint64_t key = cache_key(v, weighted);
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      for (const auto& e : cache_)
        if (e.key == key && e.weighted == weighted && e.rhs.size() == v.size() &&
            std::memcmp(e.rhs.data(), v.data(),
                        sizeof(double) * v.size()) == 0)
          return e.solution;
    }
    const Vec& c = space_->weighted_mean_functional();
    const Vec b = space_->mass() * v;
    const double lambda = b.sum() / c.sum();
    const Vec b_tilde = b - lambda * c;
    Vec x;
    if (opts_.method == SolveOptions::Method::direct) {
      x = factor(weighted).solve(b_tilde);
    } else {
      x = detail::pcg(A, b_tilde, opts_, /*project_kernel=*/true);
    }
    x.array() -= c.dot(x) / c.sum();
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      if (cache_.size() >= 4) cache_.erase(cache_.begin());
      cache_.push_back({key, weighted, v, x});
    }
    return x;
  }

 private:
  const PinnedSpdSolver& factor(bool weighted) const {
    std::lock_guard<std::mutex> lock(factor_mutex_);
    auto& slot = weighted ? km_factor_ : k_factor_;
    if (!slot)
      slot = std::make_unique<PinnedSpdSolver>(
          weighted ? weighted_stiffness() : space_->stiffness());
    return *slot;
  }

  std::uint64_t cache_key(const Vec& v, bool weighted) const {
    // FNV-1a over the raw bytes; an exact rhs comparison guards the hit.
    std::uint64_t h = 1469598103934665603ull ^ (weighted ? weight_epoch_ : 0);
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (Eigen::Index i = 0; i < v.size() * 8; ++i)
      h = (h ^ bytes[i]) * 1099511628211ull;
    return h;
  }

  struct CacheEntry {
    std::uint64_t key;
    bool weighted;
    Vec rhs;
    Vec solution;
  };

  const FemSpace* space_;
  SolveOptions opts_;
  std::optional<SparseMatrix> Km_;
  mutable std::unique_ptr<PinnedSpdSolver> k_factor_, km_factor_;
  mutable std::mutex factor_mutex_;
  mutable std::mutex cache_mutex_;
  mutable std::vector<CacheEntry> cache_;
  std::uint64_t weight_epoch_ = 0;
};

// Mean-free w with (grad w, grad xi) = (v, xi) for all mean-free xi.
inline FieldVector inv_laplacian(const InverseLaplacianContext& ctx,
                                 const FieldVector& v) {
  return {ctx.apply(v.values, /*weighted=*/false), v.mesh_level};
}

inline FieldVector inv_laplacian_weighted(const InverseLaplacianContext& ctx,
                                          const FieldVector& v) {
  return {ctx.apply(v.values, /*weighted=*/true), v.mesh_level};
}

inline double h_minus1_norm(const InverseLaplacianContext& ctx,
                            const FieldVector& v, bool weighted) {
  const Vec w = ctx.apply(v.values, weighted);
  const SparseMatrix& A =
      weighted ? ctx.weighted_stiffness() : ctx.space().stiffness();
  const double sq = w.dot(A * w);
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace okflow
