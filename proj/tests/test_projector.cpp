#include <doctest.h>

#include <cmath>

#include "fira/error.hpp"
#include "fira/projector.hpp"
#include "fira/random.hpp"
#include "oracles.hpp"

using fira::GradProjector;
using fira::Matrix;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(values.size(), 1);
  std::size_t i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

}  // namespace

TEST_CASE("refresh picks the dominant direction") {
  const GradProjector p = fira::refresh(Matrix::from_rows({{3, 0}, {0, 1}}), 1, 0, 200);
  CHECK(p.orientation() == fira::Orientation::LeftProject);
  CHECK(std::abs(p.basis()(0, 0)) == doctest::Approx(1.0));
  CHECK(p.basis()(1, 0) == doctest::Approx(0.0));
  CHECK(p.last_refresh_step() == 0);
  CHECK(p.switch_period() == 200);
}

TEST_CASE("tall gradients project from the right") {
  fira::Rng rng(2);
  const Matrix g = rng.gaussian_matrix(4, 2);
  const GradProjector p = fira::refresh(g, 1, 0, 10);
  CHECK(p.orientation() == fira::Orientation::RightProject);
  CHECK(p.basis().rows() == 2);
  const Eigen::MatrixXd expected = oracle::top_left_vectors(oracle::naive_transpose(g), 1);
  CHECK(oracle::max_principal_angle(oracle::to_eigen(p.basis()), expected) < 1e-8);
  CHECK(fira::project(p, g).rows() == 4);
  CHECK(fira::project(p, g).cols() == 1);
}

TEST_CASE("basis spans the oracle's top subspace") {
  fira::Rng rng(5);
  const Matrix g = rng.gaussian_matrix(6, 10);
  const GradProjector p = fira::refresh(g, 2, 0, 200);
  CHECK(oracle::max_principal_angle(oracle::to_eigen(p.basis()),
                                    oracle::top_left_vectors(g, 2)) < 1e-8);
  CHECK(fira::orthonormality_defect(p.basis()) <= 1e-10);
}

TEST_CASE("refresh schedule") {
  fira::Rng rng(6);
  const Matrix g0 = rng.gaussian_matrix(4, 6);
  const Matrix g1 = rng.gaussian_matrix(4, 6);
  const GradProjector p0 = fira::maybe_refresh(std::nullopt, g0, 0, 2, 200);
  CHECK(p0.last_refresh_step() == 0);
  CHECK(fira::maybe_refresh(p0, g1, 1) == p0);
  const GradProjector p200 = fira::maybe_refresh(p0, g1, 200);
  CHECK(p200.last_refresh_step() == 200);
  CHECK(!(p200 == p0));

  int refreshes = 0;
  std::optional<GradProjector> p;
  for (std::int64_t step = 0; step < 400; ++step) {
    const GradProjector next = fira::maybe_refresh(p, rng.gaussian_matrix(4, 6), step, 2, 200);
    if (!p || next.last_refresh_step() != p->last_refresh_step()) ++refreshes;
    p = next;
  }
  CHECK(refreshes == 2);
}

TEST_CASE("project selects rows") {
  const GradProjector p(column({1, 0}), 2, 2, 200, 0);
  const Matrix r = fira::project(p, Matrix::from_rows({{1, 2}, {3, 4}}));
  CHECK(r == Matrix::from_rows({{1, 2}}));

  const GradProjector id(Matrix::identity(3), 3, 5, 10, 0);
  fira::Rng rng(1);
  const Matrix g = rng.gaussian_matrix(3, 5);
  CHECK(oracle::max_diff(fira::project(id, g), g) == 0.0);
  CHECK(oracle::max_diff(fira::project_back(id, g), g) == 0.0);
}

TEST_CASE("project and project_back match naive products") {
  fira::Rng rng(9);
  const GradProjector left = fira::refresh(rng.gaussian_matrix(5, 8), 3, 0, 10);
  const Matrix g = rng.gaussian_matrix(5, 8);
  const Matrix r = fira::project(left, g);
  CHECK(oracle::max_diff(r, oracle::naive_matmul(oracle::naive_transpose(left.basis()), g)) <
        1e-12);
  CHECK(oracle::max_diff(fira::project_back(left, r), oracle::naive_matmul(left.basis(), r)) <
        1e-12);

  fira::Rng rng13(13);
  const GradProjector right = fira::refresh(rng13.gaussian_matrix(8, 5), 2, 0, 10);
  const Matrix gt = rng13.gaussian_matrix(8, 5);
  const Matrix rt = fira::project(right, gt);
  CHECK(oracle::max_diff(rt, oracle::naive_matmul(gt, right.basis())) < 1e-12);
  CHECK(oracle::max_diff(fira::project_back(right, rt),
                         oracle::naive_matmul(rt, oracle::naive_transpose(right.basis()))) <
        1e-12);
}

TEST_CASE("residual properties") {
  // Rank-1 input fully captured.
  const Matrix g1 = Matrix::from_rows({{1, 0}, {0, 0}});
  const GradProjector p1 = fira::refresh(g1, 1, 0, 10);
  const Matrix s1 = fira::residual(p1, g1, fira::project(p1, g1));
  CHECK(fira::frobenius_norm(s1) == 0.0);

  // Full rank leaves nothing behind.
  fira::Rng rng(5);
  const Matrix g = rng.gaussian_matrix(6, 10);
  const GradProjector full = fira::refresh(g, 6, 0, 10);
  CHECK(fira::frobenius_norm(fira::residual(full, g, fira::project(full, g))) <=
        1e-10 * fira::frobenius_norm(g));

  // Residual is orthogonal to the subspace.
  const GradProjector p = fira::refresh(g, 2, 0, 10);
  const Matrix s = fira::residual(p, g, fira::project(p, g));
  CHECK(fira::frobenius_norm(oracle::naive_matmul(oracle::naive_transpose(p.basis()), s)) <=
        1e-10);

  // A gradient spanned by the basis.
  const Matrix inside = fira::project_back(p, rng.gaussian_matrix(2, 10));
  CHECK(fira::frobenius_norm(fira::residual(p, inside, fira::project(p, inside))) <= 1e-12);
}

TEST_CASE("decomposition identity") {
  fira::Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.below(8), n = 2 + rng.below(8);
    const Matrix g = rng.gaussian_matrix(m, n);
    const GradProjector p = fira::refresh(g, 1 + rng.below(std::min(m, n)), 0, 10);
    const Matrix r = fira::project(p, g);
    CHECK(oracle::max_diff(fira::project_back(p, r) + fira::residual(p, g, r), g) < 1e-12);
  }
}

TEST_CASE("projector validation") {
  CHECK_THROWS_AS(GradProjector(Matrix(3, 0), 3, 4, 10, 0), fira::ParameterError);
  CHECK_THROWS_AS(GradProjector(Matrix::identity(2), 3, 4, 10, 0), fira::ParameterError);
  CHECK_THROWS_AS(GradProjector(Matrix::identity(3), 3, 4, 0, 0), fira::ParameterError);
  const GradProjector p(Matrix::identity(3), 3, 4, 10, 0);
  CHECK_THROWS_AS(fira::project(p, Matrix(4, 3)), fira::ParameterError);
  CHECK_THROWS_AS(fira::refresh(Matrix(3, 4), 4, 0, 10), fira::ParameterError);
}
