#include "clab/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "clab/errors.hpp"
#include "clab/parallel.hpp"

namespace clab::contraction {

namespace {

constexpr double kGradientFloor = 1e-10;
constexpr int kRandomDirections = 16;
constexpr int kMaxDoublings = 200;
constexpr std::size_t kBoundedGridPoints = 20001;
constexpr double kTailU = 10.0;
constexpr int kMaxPowerOfTwo = 62;

double lambda_min(const SquareMatrix& m) { return symmetric_eigenvalues(m).front(); }

SquareMatrix metric_derivative(const std::vector<SquareMatrix>& grad, std::span<const double> v) {
  SquareMatrix out(grad.front().dim());
  for (std::size_t k = 0; k < grad.size(); ++k) out += grad[k] * v[k];
  return out;
}

double max_gradient(const std::vector<SquareMatrix>& grad) {
  double g = 0.0;
  for (const auto& m : grad) g = std::max(g, m.max_abs());
  return g;
}

std::vector<Vector> candidate_directions(std::size_t m, std::uint64_t seed) {
  std::vector<Vector> dirs;
  for (std::size_t k = 0; k < m; ++k) {
    Vector e(m, 0.0);
    e[k] = 1.0;
    dirs.push_back(std::move(e));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int d = 0; d < kRandomDirections; ++d) {
    Vector v(m);
    double n = 0.0;
    while (n == 0.0) {
      for (double& vi : v) vi = normal(rng);
      n = norm2(v);
    }
    for (double& vi : v) vi /= n;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace

RiemannianMetric::RiemannianMetric(std::size_t dim, Eval eval, Gradient grad, double uniform_lower_bound)
    : dim_(dim), eval_(std::move(eval)), grad_(std::move(grad)), lower_bound_(uniform_lower_bound) {
  if (dim_ == 0) throw std::invalid_argument("RiemannianMetric: dimension must be positive");
  if (!eval_) throw std::invalid_argument("RiemannianMetric: eval is empty");
  if (!(lower_bound_ > 0.0)) throw std::invalid_argument("RiemannianMetric: lower bound must be positive");
}

RiemannianMetric RiemannianMetric::constant(const SquareMatrix& m) {
  if (!m.is_symmetric()) throw NonSymmetric("RiemannianMetric::constant: matrix is not symmetric");
  const double a = lambda_min(m);
  if (!(a > 0.0)) throw std::invalid_argument("RiemannianMetric::constant: matrix is not positive definite");
  const std::size_t n = m.dim();
  return RiemannianMetric(
      n, [m](std::span<const double>) { return m; },
      [n](std::span<const double>) { return std::vector<SquareMatrix>(n, SquareMatrix(n)); }, a);
}

SquareMatrix RiemannianMetric::operator()(std::span<const double> x) const {
  if (x.size() != dim_) throw DimensionMismatch("RiemannianMetric: point has wrong dimension");
  SquareMatrix m = eval_(x);
  if (m.dim() != dim_) throw DimensionMismatch("RiemannianMetric: eval returned wrong size");
  if (!m.is_symmetric()) throw NonSymmetric("RiemannianMetric: M(x) is not symmetric");
  return m;
}

std::vector<SquareMatrix> RiemannianMetric::gradient(std::span<const double> x) const {
  if (!grad_) return gradient_fd(x);
  if (x.size() != dim_) throw DimensionMismatch("RiemannianMetric: point has wrong dimension");
  auto g = grad_(x);
  if (g.size() != dim_) throw DimensionMismatch("RiemannianMetric: gradient has wrong length");
  return g;
}

std::vector<SquareMatrix> RiemannianMetric::gradient_fd(std::span<const double> x) const {
  if (x.size() != dim_) throw DimensionMismatch("RiemannianMetric: point has wrong dimension");
  std::vector<SquareMatrix> g;
  g.reserve(dim_);
  Vector xp(x.begin(), x.end());
  Vector xm(x.begin(), x.end());
  for (std::size_t k = 0; k < dim_; ++k) {
    xp[k] = x[k] + kFiniteDifferenceStep;
    xm[k] = x[k] - kFiniteDifferenceStep;
    g.push_back(((*this)(xp) - (*this)(xm)) * (1.0 / (xp[k] - xm[k])));
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return g;
}

SquareMatrix contraction_matrix(const VectorField& field, const RiemannianMetric& metric,
                                std::span<const double> x, std::span<const double> c, Derivatives mode) {
  if (field.state_dim() != metric.dim()) throw DimensionMismatch("contraction_matrix: field and metric dimensions differ");
  const bool fd = mode == Derivatives::kFiniteDifference;
  const SquareMatrix j = fd ? field.jacobian_x_fd(x, c) : field.jacobian_x(x, c);
  const SquareMatrix m = metric(x);
  const auto grad = fd ? metric.gradient_fd(x) : metric.gradient(x);
  const Vector fx = field(x, c);
  const SquareMatrix s = j.transpose() * m + m * j + metric_derivative(grad, fx);
  return s.symmetric_part();
}

double scalar_metric(double x) {
  const double d = 0.5 * std::sin(x * x) - 1.0;
  return 1.0 / (d * d);
}

double scalar_metric_prime(double x) {
  const double s = x * x;
  const double d = 2.0 - std::sin(s);
  return 16.0 * x * std::cos(s) / (d * d * d);
}

VectorField scalar_example_field() {
  auto eval = [](std::span<const double> x, std::span<const double> u) {
    return Vector{0.5 * x[0] * std::sin(x[0] * x[0]) - x[0] + u[0]};
  };
  auto jac = [](std::span<const double> x, std::span<const double>) {
    const double s = x[0] * x[0];
    return SquareMatrix{{0.5 * std::sin(s) + s * std::cos(s) - 1.0}};
  };
  return VectorField(1, 1, eval, jac);
}

RiemannianMetric scalar_example_metric() {
  return RiemannianMetric(
      1, [](std::span<const double> x) { return SquareMatrix{{scalar_metric(x[0])}}; },
      [](std::span<const double> x) { return std::vector<SquareMatrix>{SquareMatrix{{scalar_metric_prime(x[0])}}}; },
      4.0 / 9.0);
}

RiemannianMetric bounded_metric(double m, std::size_t dim) {
  if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("bounded_metric: m must be positive and finite");
  auto eps = [m](std::span<const double> x) { return std::exp(-dot(x, x) / m); };
  return RiemannianMetric(
      dim, [=](std::span<const double> x) { return SquareMatrix::identity(dim) * (1.0 + eps(x)); },
      [=](std::span<const double> x) {
        const double e = eps(x);
        std::vector<SquareMatrix> g;
        for (std::size_t k = 0; k < dim; ++k) g.push_back(SquareMatrix::identity(dim) * (-2.0 * x[k] / m * e));
        return g;
      },
      1.0);
}

Certificate check_contraction_region(const VectorField& field, const RiemannianMetric& metric,
                                     const GridSpec& region, double beta, std::span<const double> c) {
  region.validate();
  if (!(beta >= 0.0)) throw std::invalid_argument("check_contraction_region: beta must be >= 0");
  if (region.dim() != metric.dim()) throw DimensionMismatch("check_contraction_region: region dimension");
  if (c.size() != field.input_dim()) throw DimensionMismatch("check_contraction_region: input dimension");

  const std::vector<double> values = parallel_map(region.total(), [&](std::size_t i) {
    const Vector x = region.point(i);
    return max_eigenvalue(contraction_matrix(field, metric, x, c) + metric(x) * beta);
  });

  Certificate cert;
  cert.grid = region;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[arg]) arg = i;
  cert.margin = values[arg];
  cert.holds = cert.margin <= 0.0;
  cert.witness = Witness{region.point(arg), Vector(c.begin(), c.end()), std::nullopt, std::nullopt};
  cert.violation_runs = violation_runs(region, values);
  return cert;
}

Certificate check_uniform_contraction(const VectorField& field, const RiemannianMetric& metric,
                                      const GridSpec& input_box, const GridSpec& region, double beta) {
  input_box.validate();
  if (!(beta > 0.0)) throw std::invalid_argument("check_uniform_contraction: beta must be positive");
  if (input_box.dim() != field.input_dim()) throw DimensionMismatch("check_uniform_contraction: input box dimension");

  Certificate worst;
  for (std::size_t i = 0; i < input_box.total(); ++i) {
    Certificate cert = check_contraction_region(field, metric, region, beta, input_box.point(i));
    if (i == 0 || cert.margin > worst.margin) worst = std::move(cert);
  }
  worst.holds = worst.margin <= 0.0;
  worst.note = std::to_string(input_box.total()) + " constant inputs checked; " +
               (worst.holds ? "bound is uniform in x and c, so it extends to any input signal valued in the input box"
                            : "worst input is the witness c");
  return worst;
}

Json to_json(const ViolatingInput& v) {
  Json j;
  j["c"] = json_array(v.c);
  j["x"] = json_array(v.x);
  j["z"] = json_array(v.z);
  j["value"] = v.value;
  j["beta"] = v.beta;
  j["alpha"] = v.alpha;
  j["scale"] = v.scale;
  return j;
}

ViolatingInput find_violating_input(const VectorField& field, const RiemannianMetric& metric,
                                    const GridSpec& x_search, std::span<const Vector> z_samples,
                                    std::uint64_t seed) {
  x_search.validate();
  if (z_samples.empty()) throw std::invalid_argument("find_violating_input: no z samples");
  if (x_search.dim() != metric.dim()) throw DimensionMismatch("find_violating_input: search box dimension");
  for (const auto& z : z_samples)
    if (z.size() != metric.dim()) throw DimensionMismatch("find_violating_input: z sample dimension");

  const std::size_t m = field.input_dim();
  const std::vector<Vector> dirs = candidate_directions(m, seed);
  const Vector zero_input(m, 0.0);

  struct Best {
    double alpha = 0.0;
    double grad = 0.0;
    std::size_t z = 0;
    std::size_t dir = 0;
  };
  // Mdot contributed by the input direction: grad M . (f(x, c0) - f(x, 0)).
  const auto per_x = parallel_map(x_search.total(), [&](std::size_t i) {
    const Vector x = x_search.point(i);
    const auto grad = metric.gradient(x);
    Best b;
    b.grad = max_gradient(grad);
    const Vector f0 = field(x, zero_input);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      Vector df = field(x, dirs[d]);
      for (std::size_t k = 0; k < df.size(); ++k) df[k] -= f0[k];
      const SquareMatrix mdot2 = metric_derivative(grad, df);
      for (std::size_t zi = 0; zi < z_samples.size(); ++zi) {
        const double a = mdot2.quadratic_form(z_samples[zi]);
        if (std::abs(a) > std::abs(b.alpha)) b = {a, b.grad, zi, d};
      }
    }
    return b;
  });

  double max_grad = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < per_x.size(); ++i) {
    max_grad = std::max(max_grad, per_x[i].grad);
    if (std::abs(per_x[i].alpha) > std::abs(per_x[arg].alpha)) arg = i;
  }
  if (max_grad < kGradientFloor)
    throw MetricAppearsConstant("find_violating_input: all sampled metric gradients are below 1e-10");
  if (per_x[arg].alpha == 0.0)
    throw MetricAppearsConstant("find_violating_input: no sampled input direction changes Mdot");

  ViolatingInput out;
  out.x = x_search.point(arg);
  out.z = z_samples[per_x[arg].z];
  Vector c0 = dirs[per_x[arg].dir];
  out.alpha = per_x[arg].alpha;
  if (out.alpha < 0.0) {
    for (double& v : c0) v = -v;
    out.alpha = -out.alpha;
  }
  out.beta = contraction_matrix(field, metric, out.x, zero_input).quadratic_form(out.z);

  double n = 1.0;
  while (!(n * out.alpha > std::abs(out.beta))) n *= 2.0;
  auto value_at = [&](double scale) {
    Vector c = c0;
    for (double& v : c) v *= scale;
    return std::pair{c, contraction_matrix(field, metric, out.x, c).quadratic_form(out.z)};
  };
  auto [c, value] = value_at(n);
  for (int k = 0; !(value > 0.0); ++k) {
    if (k == kMaxDoublings) throw Error("find_violating_input: quadratic form stayed non-positive");
    n *= 2.0;
    std::tie(c, value) = value_at(n);
  }
  out.c = std::move(c);
  out.value = value;
  out.scale = n;
  return out;
}

BoundedMetricParameter bounded_metric_m_parameter(double bound, double beta) {
  if (!(bound >= 0.0) || !std::isfinite(bound)) throw std::invalid_argument("bounded_metric_m_parameter: bound must be finite and >= 0");
  if (!(beta >= 0.0) || !(beta < 2.0)) throw std::invalid_argument("bounded_metric_m_parameter: beta must lie in [0, 2)");

  const double slack = 2.0 - beta;
  const std::vector<double> cs = bound == 0.0 ? std::vector<double>{0.0} : std::vector<double>{-bound, 0.0, bound};

  for (int k = 0; k <= kMaxPowerOfTwo; ++k) {
    const double m = std::ldexp(1.0, k);
    const double reach = kTailU * std::sqrt(m);
    const double tail = 2.0 * kTailU * (kTailU + bound / std::sqrt(m)) * std::exp(-kTailU * kTailU);

    Certificate cert;
    cert.grid = GridSpec::uniform_1d(-reach, reach, kBoundedGridPoints);
    double sup_lhs = 0.0;
    for (std::size_t i = 0; i < cert.grid.total(); ++i) {
      const double x = cert.grid.point(i)[0];
      const double e = std::exp(-x * x / m);
      const double de = -2.0 * x / m * e;
      for (double c : cs) {
        const double lhs = (c - x) * de;
        const double v = lhs - slack * (1.0 + e);
        sup_lhs = std::max(sup_lhs, std::abs(lhs));
        if (!cert.witness || v > cert.margin) {
          cert.margin = v;
          cert.witness = Witness{{x}, {c}, std::nullopt, std::nullopt};
        }
      }
    }
    cert.holds = cert.margin <= 0.0 && tail <= slack;
    cert.note = "m = " + format_double(m) + ", sup |(c - x) e'| on grid = " + format_double(sup_lhs) +
                ", tail bound beyond |x| = 10 sqrt(m): " + format_double(tail);
    if (cert.holds) return {m, std::move(cert)};
  }
  throw Error("bounded_metric_m_parameter: no power of two up to 2^62 works");
}

}  // namespace clab::contraction
