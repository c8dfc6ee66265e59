#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fira {

// Dense row-major double matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  // Throws ParameterError if data.size() != rows * cols or any entry is
  // non-finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Element-wise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);
std::vector<double> column_norms(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

struct SvdResult {
  Matrix left_vectors;                 // m x r
  std::vector<double> singular_values; // r, non-increasing
  Matrix right_vectors;                // n x r
};

struct SvdOptions {
  double tolerance = 1e-12;
  int max_sweeps = 60;
};

// Top-r singular triplets by one-sided Jacobi on the smaller Gram side.
// Left vectors are sign-normalized so their first nonzero component is
// positive; right vectors follow so that U * diag(s) * V^T is unchanged.
// Throws ParameterError for r outside [1, min(rows, cols)] and
// NumericalError if the sweep limit is reached.
SvdResult truncated_svd(const Matrix& g, std::size_t r, SvdOptions options = {});

// ||P^T P - I||_F
double orthonormality_defect(const Matrix& p);

}  // namespace fira
