#include "clab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "clab/errors.hpp"

namespace clab {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kJacobiOffTol = 1e-14;
constexpr int kJacobiMaxSweeps = 100;

void check_finite(const SquareMatrix& a) {
  if (!a.is_finite()) throw NonFinite("matrix has non-finite entries");
}

void check_symmetric(const SquareMatrix& a) {
  if (!a.is_symmetric(kSymmetryTol)) {
    throw NonSymmetric("matrix asymmetry exceeds " + std::to_string(kSymmetryTol));
  }
}

double off_diagonal_mass(const SquareMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

double frobenius(const SquareMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("distance2: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

SquareMatrix::SquareMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {
  if (n == 0 || n > kMaxDim) throw std::invalid_argument("SquareMatrix: dimension out of range");
}

SquareMatrix::SquareMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SquareMatrix(rows.size()) {
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != n_) throw std::invalid_argument("SquareMatrix: ragged initializer");
    std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * n_));
    ++i;
  }
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::diagonal(std::span<const double> d) {
  SquareMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

SquareMatrix SquareMatrix::transpose() const {
  SquareMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

SquareMatrix SquareMatrix::symmetric_part() const {
  SquareMatrix s(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
  return s;
}

bool SquareMatrix::is_symmetric(double tol) const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (!(std::abs((*this)(i, j) - (*this)(j, i)) <= tol)) return false;
  return true;
}

bool SquareMatrix::is_finite() const { return all_finite(data_); }

double SquareMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Vector SquareMatrix::apply(std::span<const double> v) const {
  if (v.size() != n_) throw DimensionMismatch("SquareMatrix::apply: size mismatch");
  Vector out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) out[i] += (*this)(i, j) * v[j];
  return out;
}

double SquareMatrix::quadratic_form(std::span<const double> v) const { return dot(v, apply(v)); }

SquareMatrix& SquareMatrix::operator+=(const SquareMatrix& rhs) {
  if (rhs.n_ != n_) throw DimensionMismatch("SquareMatrix +=: dimension mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
  return *this;
}

SquareMatrix& SquareMatrix::operator-=(const SquareMatrix& rhs) {
  if (rhs.n_ != n_) throw DimensionMismatch("SquareMatrix -=: dimension mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
  return *this;
}

SquareMatrix& SquareMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.n_ != b.n_) throw DimensionMismatch("SquareMatrix *: dimension mismatch");
  SquareMatrix c(a.n_);
  for (std::size_t i = 0; i < a.n_; ++i)
    for (std::size_t k = 0; k < a.n_; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < a.n_; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector symmetric_eigenvalues(const SquareMatrix& input) {
  check_finite(input);
  check_symmetric(input);

  // Work on the exactly symmetric part so rotations stay consistent.
  SquareMatrix a = input.symmetric_part();
  const std::size_t n = a.dim();
  const double stop = kJacobiOffTol * std::max(1.0, frobenius(a));

  for (int sweep = 0; sweep < kJacobiMaxSweeps && off_diagonal_mass(a) > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vector eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double max_eigenvalue(const SquareMatrix& a) {
  if (a.dim() == 1) {
    check_finite(a);
    return a(0, 0);
  }
  return symmetric_eigenvalues(a).back();
}

double spectral_norm(const SquareMatrix& a) {
  check_finite(a);
  // A^T A is exactly symmetric in floating point: both triangles sum the same products.
  const double lam = max_eigenvalue(a.transpose() * a);
  return std::sqrt(std::max(0.0, lam));
}

double log_norm_2(const SquareMatrix& a) {
  check_finite(a);
  return max_eigenvalue(a.symmetric_part());
}

bool is_negative_definite(const SquareMatrix& a, double margin) {
  if (!(margin >= 0.0)) throw std::invalid_argument("is_negative_definite: margin must be >= 0");
  const double lam = max_eigenvalue(a);
  return margin == 0.0 ? lam < 0.0 : lam <= -margin;
}

}  // namespace clab
