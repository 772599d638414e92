#pragma once

// Dense small-matrix primitives. Dimensions are expected to stay tiny (n <= 16),
// so everything is plain O(n^3) code with no external solver.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace clab {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double distance2(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

/// Row-major n x n matrix of doubles.
class SquareMatrix {
 public:
  static constexpr std::size_t kMaxDim = 16;

  explicit SquareMatrix(std::size_t n);
  SquareMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SquareMatrix identity(std::size_t n);
  static SquareMatrix diagonal(std::span<const double> d);

  std::size_t dim() const { return n_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  std::span<const double> data() const { return data_; }

  SquareMatrix transpose() const;
  /// (A + A^T) / 2
  SquareMatrix symmetric_part() const;
  bool is_symmetric(double tol = 1e-12) const;
  bool is_finite() const;
  double max_abs() const;

  Vector apply(std::span<const double> v) const;
  /// v^T A v
  double quadratic_form(std::span<const double> v) const;

  SquareMatrix& operator+=(const SquareMatrix& rhs);
  SquareMatrix& operator-=(const SquareMatrix& rhs);
  SquareMatrix& operator*=(double s);

  friend SquareMatrix operator+(SquareMatrix a, const SquareMatrix& b) { return a += b; }
  friend SquareMatrix operator-(SquareMatrix a, const SquareMatrix& b) { return a -= b; }
  friend SquareMatrix operator*(SquareMatrix a, double s) { return a *= s; }
  friend SquareMatrix operator*(double s, SquareMatrix a) { return a *= s; }
  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<double> data_;
};

/// All eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Throws NonSymmetric when |A_ij - A_ji| > 1e-12 and NonFinite on NaN/Inf.
Vector symmetric_eigenvalues(const SquareMatrix& a);

double max_eigenvalue(const SquareMatrix& a);

/// sqrt(lambda_max(A^T A))
double spectral_norm(const SquareMatrix& a);

/// Logarithmic norm induced by the Euclidean norm: lambda_max((A + A^T)/2).
double log_norm_2(const SquareMatrix& a);

/// lambda_max(A) <= -margin. With margin == 0 the test is strict (lambda_max < 0).
bool is_negative_definite(const SquareMatrix& a, double margin);

}  // namespace clab
