#include "fira/projector.hpp"

#include <algorithm>
#include <string>

#include "fira/error.hpp"

namespace fira {

namespace {

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_weight_shape(const GradProjector& proj, const Matrix& g, const char* op) {
  if (g.rows() != proj.weight_rows() || g.cols() != proj.weight_cols()) {
    throw ParameterError(std::string(op) + ": gradient is " + shape(g.rows(), g.cols()) +
                         ", projector expects " +
                         shape(proj.weight_rows(), proj.weight_cols()));
  }
}

void require_low_rank_shape(const GradProjector& proj, const Matrix& r_mat, const char* op) {
  const bool left = proj.orientation() == Orientation::LeftProject;
  const std::size_t rows = left ? proj.rank() : proj.weight_rows();
  const std::size_t cols = left ? proj.weight_cols() : proj.rank();
  if (r_mat.rows() != rows || r_mat.cols() != cols) {
    throw ParameterError(std::string(op) + ": low-rank gradient is " +
                         shape(r_mat.rows(), r_mat.cols()) + ", expected " + shape(rows, cols));
  }
}

}  // namespace

Orientation orientation_for(std::size_t rows, std::size_t cols) {
  return rows <= cols ? Orientation::LeftProject : Orientation::RightProject;
}

GradProjector::GradProjector(Matrix basis, std::size_t weight_rows, std::size_t weight_cols,
                             std::size_t switch_period, std::int64_t last_refresh_step)
    : basis_(std::move(basis)),
      weight_rows_(weight_rows),
      weight_cols_(weight_cols),
      switch_period_(switch_period),
      last_refresh_step_(last_refresh_step),
      orientation_(orientation_for(weight_rows, weight_cols)) {
  const std::size_t k = std::min(weight_rows, weight_cols);
  if (basis_.rows() != k) {
    throw ParameterError("GradProjector: basis has " + std::to_string(basis_.rows()) +
                         " rows, expected " + std::to_string(k));
  }
  if (basis_.cols() < 1 || basis_.cols() > k) {
    throw ParameterError("GradProjector: rank " + std::to_string(basis_.cols()) +
                         " outside [1, " + std::to_string(k) + "]");
  }
  if (switch_period_ == 0) throw ParameterError("GradProjector: switch period must be >= 1");
}

GradProjector refresh(const Matrix& g, std::size_t rank, std::int64_t step,
                      std::size_t period) {
  // m > n runs the left pipeline on G^T; its left vectors are G's right vectors.
  const bool left = orientation_for(g.rows(), g.cols()) == Orientation::LeftProject;
  SvdResult svd = left ? truncated_svd(g, rank) : truncated_svd(g.transpose(), rank);
  return GradProjector(std::move(svd.left_vectors), g.rows(), g.cols(), period, step);
}

GradProjector maybe_refresh(const GradProjector& proj, const Matrix& g, std::int64_t step) {
  if (step < 0) throw ParameterError("maybe_refresh: negative step");
  if (step % static_cast<std::int64_t>(proj.switch_period()) == 0) {
    return refresh(g, proj.rank(), step, proj.switch_period());
  }
  return proj;
}

GradProjector maybe_refresh(const std::optional<GradProjector>& proj, const Matrix& g,
                            std::int64_t step, std::size_t rank, std::size_t period) {
  if (!proj) {
    if (step < 0) throw ParameterError("maybe_refresh: negative step");
    if (period == 0) throw ParameterError("maybe_refresh: switch period must be >= 1");
    return refresh(g, rank, step, period);
  }
  return maybe_refresh(*proj, g, step);
}

Matrix project(const GradProjector& proj, const Matrix& g) {
  require_weight_shape(proj, g, "project");
  if (proj.orientation() == Orientation::LeftProject) return matmul_tn(proj.basis(), g);
  return matmul(g, proj.basis());
}

Matrix project_back(const GradProjector& proj, const Matrix& r_mat) {
  require_low_rank_shape(proj, r_mat, "project_back");
  if (proj.orientation() == Orientation::LeftProject) return matmul(proj.basis(), r_mat);
  return matmul_nt(r_mat, proj.basis());
}

Matrix residual(const GradProjector& proj, const Matrix& g, const Matrix& r_mat) {
  require_weight_shape(proj, g, "residual");
  return g - project_back(proj, r_mat);
}

}  // namespace fira
