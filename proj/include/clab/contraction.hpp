#pragma once

// Riemannian contraction analysis: the matrix J^T M + M J + dM/dt, grid
// certificates of contraction, and the input-driven loss of contraction for
// non-constant metrics.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "clab/certificate.hpp"
#include "clab/dynamics.hpp"

namespace clab::contraction {

/// State-dependent metric M(x). grad(x)[k] holds dM/dx_k.
class RiemannianMetric {
 public:
  using Eval = std::function<SquareMatrix(std::span<const double> x)>;
  using Gradient = std::function<std::vector<SquareMatrix>(std::span<const double> x)>;

  static constexpr double kFiniteDifferenceStep = 1e-6;

  RiemannianMetric(std::size_t dim, Eval eval, Gradient grad, double uniform_lower_bound);

  /// Constant symmetric positive definite M; the lower bound is its smallest eigenvalue.
  static RiemannianMetric constant(const SquareMatrix& m);

  std::size_t dim() const { return dim_; }
  double uniform_lower_bound() const { return lower_bound_; }
  bool has_analytic_gradient() const { return static_cast<bool>(grad_); }

  /// M(x); throws NonSymmetric if M(x) is not symmetric within 1e-12.
  SquareMatrix operator()(std::span<const double> x) const;
  std::vector<SquareMatrix> gradient(std::span<const double> x) const;
  std::vector<SquareMatrix> gradient_fd(std::span<const double> x) const;

 private:
  std::size_t dim_;
  Eval eval_;
  Gradient grad_;
  double lower_bound_;
};

enum class Derivatives { kProvided, kFiniteDifference };

/// Symmetrised J^T M + M J + Mdot at (x, c), Mdot_ij = (dM_ij/dx)^T f(x, c).
/// kFiniteDifference ignores analytic Jacobians and gradients.
SquareMatrix contraction_matrix(const VectorField& field, const RiemannianMetric& metric,
                                std::span<const double> x, std::span<const double> c,
                                Derivatives mode = Derivatives::kProvided);

/// m(x) = 1 / (sin(x^2)/2 - 1)^2, with values in [4/9, 4].
double scalar_metric(double x);
double scalar_metric_prime(double x);

/// x' = x sin(x^2)/2 - x + c, analytic Jacobian.
VectorField scalar_example_field();
/// scalar_metric as a 1x1 RiemannianMetric with analytic gradient, lower bound 4/9.
RiemannianMetric scalar_example_metric();
/// M(x) = 1 + exp(-|x|^2 / m) in dimension dim, times the identity. Lower bound 1.
RiemannianMetric bounded_metric(double m, std::size_t dim = 1);

/// lambda_max(contraction_matrix + beta M) on every point of region. holds iff
/// all values are <= 0; margin is the largest value and the witness its
/// lowest-index argmax. Violating points are grouped into runs along the
/// flattened grid.
Certificate check_contraction_region(const VectorField& field, const RiemannianMetric& metric,
                                     const GridSpec& region, double beta, std::span<const double> c);

/// check_contraction_region for every grid input c in input_box.
Certificate check_uniform_contraction(const VectorField& field, const RiemannianMetric& metric,
                                      const GridSpec& input_box, const GridSpec& region, double beta);

struct ViolatingInput {
  Vector c;
  Vector x;
  Vector z;
  /// z^T contraction_matrix(x, c) z, recomputed at the returned point.
  double value;
  /// z^T (J^T M + M J + Mdot(f(x, 0))) z
  double beta;
  /// z^T Mdot(c0) z for the unit direction c0 = c / scale
  double alpha;
  double scale;
};

Json to_json(const ViolatingInput& v);

/// Searches x on the x_search grid, z over z_samples and c0 over the
/// coordinate axes plus 16 seeded random unit directions for the largest
/// |alpha|, orients c0 so alpha > 0, then doubles the scale N until
/// N alpha > |beta| and the recomputed quadratic form is positive.
/// Throws MetricAppearsConstant if every sampled gradient is below 1e-10.
ViolatingInput find_violating_input(const VectorField& field, const RiemannianMetric& metric,
                                    const GridSpec& x_search, std::span<const Vector> z_samples,
                                    std::uint64_t seed = 0);

struct BoundedMetricParameter {
  double m;
  Certificate certificate;
};

/// Smallest m = 2^k, k >= 0, with (c - x) e'(x) <= (2 - beta)(1 + e(x)) for
/// e(x) = exp(-x^2/m), all |c| <= bound and all x. Checked on x in
/// [-10 sqrt(m), 10 sqrt(m)] for c in {-bound, 0, bound}; beyond that range
/// |(c - x) e'| <= 2u(u + bound/sqrt(m)) exp(-u^2) at u = 10.
BoundedMetricParameter bounded_metric_m_parameter(double bound, double beta = 1.0);

}  // namespace clab::contraction
