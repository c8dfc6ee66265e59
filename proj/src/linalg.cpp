#include "fira/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fira/error.hpp"

namespace fira {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ParameterError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Makes `v` a unit vector orthogonal to the first `count` columns in `basis`
// by Gram-Schmidt over the canonical basis vectors.
std::vector<double> complete_basis(const std::vector<std::vector<double>>& basis,
                                   std::size_t count, std::size_t dim) {
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < dim; ++e) {
    std::vector<double> v(dim, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < count; ++k) {
        const double c = dot(v, basis[k]);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= c * basis[k][i];
      }
    }
    const double nv = norm(v);
    if (nv > best_norm + 1e-12) {
      best_norm = nv;
      best = std::move(v);
    }
    if (best_norm > 0.5) break;
  }
  for (double& x : best) x /= best_norm;
  return best;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ParameterError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw ParameterError("Matrix: non-finite entry");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ParameterError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw ParameterError("Matrix::set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ParameterError("matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ParameterError("matmul_tn: inner dimension mismatch");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ParameterError("matmul_nt: inner dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

double frobenius_norm(const Matrix& m) { return norm(m.data()); }

std::vector<double> column_norms(const Matrix& m) {
  std::vector<double> sq(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) sq[c] += m(r, c) * m(r, c);
  }
  for (double& x : sq) x = std::sqrt(x);
  return sq;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double d = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) d = std::max(d, std::abs(ad[i] - bd[i]));
  return d;
}

SvdResult truncated_svd(const Matrix& g, std::size_t r, SvdOptions options) {
  const std::size_t m = g.rows();
  const std::size_t n = g.cols();
  const std::size_t k = std::min(m, n);
  if (r < 1 || r > k) {
    throw ParameterError("truncated_svd: rank " + std::to_string(r) + " outside [1, " +
                         std::to_string(k) + "]");
  }
  for (double x : g.data()) {
    if (!std::isfinite(x)) throw ParameterError("truncated_svd: non-finite input");
  }

  // Orthogonalize the k columns of A (p x k), where A = G if m >= n, else G^T.
  const bool tall = m >= n;
  const std::size_t p = tall ? m : n;
  std::vector<std::vector<double>> cols(k, std::vector<double>(p));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (tall) {
        cols[j][i] = g(i, j);
      } else {
        cols[i][j] = g(i, j);
      }
    }
  }
  std::vector<std::vector<double>> rot(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) rot[i][i] = 1.0;

  const double total = frobenius_norm(g);
  const double negligible = total * 1e-15;

  bool converged = false;
  double max_corr = 0.0;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    max_corr = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double alpha = dot(cols[i], cols[i]);
        const double beta = dot(cols[j], cols[j]);
        if (std::sqrt(alpha) <= negligible || std::sqrt(beta) <= negligible) continue;
        const double gamma = dot(cols[i], cols[j]);
        const double corr = std::abs(gamma) / std::sqrt(alpha * beta);
        max_corr = std::max(max_corr, corr);
        if (corr <= options.tolerance) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t x = 0; x < p; ++x) {
          const double ai = cols[i][x];
          const double aj = cols[j][x];
          cols[i][x] = c * ai - s * aj;
          cols[j][x] = s * ai + c * aj;
        }
        for (std::size_t x = 0; x < k; ++x) {
          const double vi = rot[i][x];
          const double vj = rot[j][x];
          rot[i][x] = c * vi - s * vj;
          rot[j][x] = s * vi + c * vj;
        }
      }
    }
    if (max_corr <= options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericalError("truncated_svd: Jacobi did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps",
                         max_corr);
  }

  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) sigma[i] = norm(cols[i]);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double zero_level = sigma[order[0]] * 1e-13;
  // `normalized` holds the unit columns of A (length p), `rotated` the
  // matching columns of the rotation (length k).
  std::vector<std::vector<double>> normalized(r);
  std::vector<std::vector<double>> rotated(r);
  SvdResult out;
  out.singular_values.resize(r);
  for (std::size_t idx = 0; idx < r; ++idx) {
    const std::size_t src = order[idx];
    out.singular_values[idx] = sigma[src];
    rotated[idx] = rot[src];
    if (sigma[src] > zero_level && sigma[src] > 0.0) {
      normalized[idx] = cols[src];
      for (double& x : normalized[idx]) x /= sigma[src];
    } else {
      normalized[idx] = complete_basis(normalized, idx, p);
    }
  }

  auto& left = tall ? normalized : rotated;
  auto& right = tall ? rotated : normalized;
  for (std::size_t idx = 0; idx < r; ++idx) {
    auto first = std::find_if(left[idx].begin(), left[idx].end(),
                              [](double x) { return std::abs(x) > 1e-12; });
    if (first != left[idx].end() && *first < 0.0) {
      for (double& x : left[idx]) x = -x;
      for (double& x : right[idx]) x = -x;
    }
  }

  out.left_vectors = Matrix(m, r);
  out.right_vectors = Matrix(n, r);
  for (std::size_t idx = 0; idx < r; ++idx) {
    out.left_vectors.set_column(idx, left[idx]);
    out.right_vectors.set_column(idx, right[idx]);
  }
  return out;
}

double orthonormality_defect(const Matrix& p) {
  Matrix gram = matmul_tn(p, p);
  gram -= Matrix::identity(p.cols());
  return frobenius_norm(gram);
}

}  // namespace fira
