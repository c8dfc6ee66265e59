#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "fira/linalg.hpp"

namespace fira {

enum class Orientation {
  LeftProject,   // m <= n, R = P^T G
  RightProject,  // m > n,  R = G Q
};

// Low-rank gradient subspace for one m x n weight matrix.
//
// The basis is min(m, n) x r with orthonormal columns: the top-r left
// singular vectors of the gradient when m <= n, the top-r right singular
// vectors otherwise. Immutable; refreshing produces a new value.
class GradProjector {
 public:
  GradProjector(Matrix basis, std::size_t weight_rows, std::size_t weight_cols,
                std::size_t switch_period, std::int64_t last_refresh_step);

  const Matrix& basis() const { return basis_; }
  std::size_t rank() const { return basis_.cols(); }
  std::size_t switch_period() const { return switch_period_; }
  std::int64_t last_refresh_step() const { return last_refresh_step_; }
  Orientation orientation() const { return orientation_; }
  std::size_t weight_rows() const { return weight_rows_; }
  std::size_t weight_cols() const { return weight_cols_; }

  bool operator==(const GradProjector&) const = default;

 private:
  Matrix basis_;
  std::size_t weight_rows_;
  std::size_t weight_cols_;
  std::size_t switch_period_;
  std::int64_t last_refresh_step_;
  Orientation orientation_;
};

Orientation orientation_for(std::size_t rows, std::size_t cols);

GradProjector refresh(const Matrix& g, std::size_t rank, std::int64_t step,
                      std::size_t period);

// Refreshes when step % period == 0, otherwise returns `proj` unchanged.
GradProjector maybe_refresh(const GradProjector& proj, const Matrix& g, std::int64_t step);

// As above; an empty projector is always built.
GradProjector maybe_refresh(const std::optional<GradProjector>& proj, const Matrix& g,
                            std::int64_t step, std::size_t rank, std::size_t period);

// R = P^T G (r x n) or R = G Q (m x r).
Matrix project(const GradProjector& proj, const Matrix& g);

// S = G - P R or S = G - R Q^T.
Matrix residual(const GradProjector& proj, const Matrix& g, const Matrix& r_mat);

// P R or R Q^T, shape m x n.
Matrix project_back(const GradProjector& proj, const Matrix& r_mat);

}  // namespace fira
