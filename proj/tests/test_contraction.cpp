#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "clab/contraction.hpp"
#include "clab/errors.hpp"
#include "test_support.hpp"

using namespace clab;
using namespace clab::contraction;
using doctest::Approx;
using std::numbers::pi;

namespace {

VectorField linear_decay(std::size_t n = 1) {
  return VectorField(
      n, n,
      [](std::span<const double> x, std::span<const double> u) {
        Vector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i] + u[i];
        return out;
      },
      [n](std::span<const double>, std::span<const double>) { return SquareMatrix::identity(n) * -1.0; });
}

VectorField pure_decay() {
  return VectorField(1, 0, [](std::span<const double> x, std::span<const double>) { return Vector{-x[0]}; });
}

// Oracle for the scalar example: m' f + 2 f' m written out directly.
double scalar_closed_form(double x, double c) {
  const double s = std::sin(x * x);
  const double m = 4.0 / ((s - 2) * (s - 2));
  const double dm = 16.0 * x * std::cos(x * x) / std::pow(2 - s, 3);
  const double f = x * s / 2 - x + c;
  const double df = s / 2 + x * x * std::cos(x * x) - 1;
  return dm * f + 2 * df * m;
}

const double kViolationX = 4 * std::sqrt(2 * pi);

}  // namespace

TEST_CASE("contraction_matrix of x' = -x with M = 1 is -2") {
  const auto metric = RiemannianMetric::constant(SquareMatrix{{1.0}});
  for (double x : {-3.0, 0.0, 7.5}) {
    const SquareMatrix s = contraction_matrix(pure_decay(), metric, Vector{x}, Vector{});
    CHECK(s(0, 0) == -2.0);
  }
}

TEST_CASE("scalar example: closed-form identity on 10^4 points") {
  const auto field = scalar_example_field();
  const auto metric = scalar_example_metric();
  for (int i = 0; i < 10000; ++i) {
    const double x = -20.0 + 40.0 * i / 9999.0;
    const double s = std::sin(x * x);
    const double cm = contraction_matrix(field, metric, Vector{x}, Vector{0.0})(0, 0);
    CHECK(cm == Approx(4.0 / (s - 2)).epsilon(1e-9));
    CHECK(cm == Approx(scalar_closed_form(x, 0.0)).epsilon(1e-9));
  }
}

TEST_CASE("scalar example: chained bound") {
  for (int i = 0; i < 40001; ++i) {
    const double x = -20.0 + 40.0 * i / 40000.0;
    const double s = std::sin(x * x);
    CHECK(4 * (s / 2 - 1) * (s / 2 - 1) / (s - 2) <= -1.0 / 3);
  }
}

TEST_CASE("scalar example: violation at c = 27/16") {
  const double cm = contraction_matrix(scalar_example_field(), scalar_example_metric(), Vector{kViolationX},
                                       Vector{27.0 / 16})(0, 0);
  CHECK(cm == Approx(-2 + 13.5 * std::sqrt(2 * pi)).epsilon(1e-9));
  CHECK(cm == Approx(31.84).epsilon(1e-3));
  CHECK(cm == Approx(scalar_closed_form(kViolationX, 27.0 / 16)).epsilon(1e-9));
}

TEST_CASE("scalar_metric") {
  CHECK(scalar_metric(0.0) == 1.0);
  CHECK(scalar_metric(std::sqrt(pi / 2)) == Approx(4.0).epsilon(1e-14));
  double lo = 1e300;
  double hi = 0.0;
  for (int i = 0; i <= 400000; ++i) {
    const double v = scalar_metric(-20.0 + 40.0 * i / 400000.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo > 4.0 / 9);
  CHECK(hi <= 4.0);
  for (double x = -5; x < 5; x += 0.37)
    CHECK(scalar_metric_prime(x) ==
          Approx((scalar_metric(x + 1e-6) - scalar_metric(x - 1e-6)) / 2e-6).epsilon(1e-6).scale(1.0));
}

TEST_CASE("metric invariants at sampled points") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  const std::vector<RiemannianMetric> metrics{scalar_example_metric(), bounded_metric(3.0, 1), bounded_metric(2.0, 3),
                                              RiemannianMetric::constant(SquareMatrix{{2.0, 0.5}, {0.5, 1.0}})};
  for (const auto& m : metrics) {
    for (int k = 0; k < 200; ++k) {
      Vector x(m.dim());
      for (double& xi : x) xi = box(rng);
      const SquareMatrix mx = m(x);
      CHECK(mx.is_symmetric(1e-12));
      const Vector v = testing::random_unit(rng, m.dim());
      CHECK(mx.quadratic_form(v) >= m.uniform_lower_bound() * (1 - 1e-12));
    }
  }
}

TEST_CASE("metric validation") {
  CHECK_THROWS_AS(RiemannianMetric::constant(SquareMatrix{{1.0, 2.0}, {0.0, 1.0}}), NonSymmetric);
  CHECK_THROWS_AS(RiemannianMetric::constant(SquareMatrix{{1.0, 2.0}, {2.0, 1.0}}), std::invalid_argument);
  const RiemannianMetric skew(
      2, [](std::span<const double>) { return SquareMatrix{{1.0, 1.0}, {0.0, 1.0}}; }, {}, 0.5);
  CHECK_THROWS_AS(skew(Vector{0.0, 0.0}), NonSymmetric);
  CHECK_THROWS_AS(bounded_metric(0.0), std::invalid_argument);
}

TEST_CASE("contraction_matrix checks dimensions") {
  const auto metric = RiemannianMetric::constant(SquareMatrix::identity(2));
  CHECK_THROWS_AS(contraction_matrix(linear_decay(1), metric, Vector{0.0}, Vector{0.0}), DimensionMismatch);
  CHECK_THROWS_AS(contraction_matrix(linear_decay(2), metric, Vector{0.0, 0.0}, Vector{0.0}), DimensionMismatch);
  CHECK_THROWS_AS(contraction_matrix(linear_decay(2), metric, Vector{0.0}, Vector{0.0, 0.0}), DimensionMismatch);
}

TEST_CASE("analytic and finite-difference contraction matrices agree") {
  // Planar field with a coupled state-dependent metric.
  const VectorField field(
      2, 2,
      [](std::span<const double> x, std::span<const double> u) {
        return Vector{-x[0] + std::sin(x[1]) + u[0], -2 * x[1] + 0.3 * x[0] * x[0] + u[1]};
      },
      [](std::span<const double> x, std::span<const double>) {
        return SquareMatrix{{-1.0, std::cos(x[1])}, {0.6 * x[0], -2.0}};
      });
  const RiemannianMetric metric(
      2,
      [](std::span<const double> x) {
        const double e = std::exp(-x[0] * x[0] / 4);
        return SquareMatrix{{2 + e, 0.3 * std::sin(x[1])}, {0.3 * std::sin(x[1]), 1 + x[0] * x[0] / (1 + x[0] * x[0])}};
      },
      [](std::span<const double> x) {
        const double e = std::exp(-x[0] * x[0] / 4);
        const double q = 1 + x[0] * x[0];
        return std::vector<SquareMatrix>{SquareMatrix{{-x[0] / 2 * e, 0.0}, {0.0, 2 * x[0] / (q * q)}},
                                         SquareMatrix{{0.0, 0.3 * std::cos(x[1])}, {0.3 * std::cos(x[1]), 0.0}}};
      },
      0.5);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> box(-3.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    const Vector x{box(rng), box(rng)};
    const Vector c{box(rng), box(rng)};
    const SquareMatrix a = contraction_matrix(field, metric, x, c);
    const SquareMatrix f = contraction_matrix(field, metric, x, c, Derivatives::kFiniteDifference);
    CHECK((a - f).max_abs() <= 1e-4 * std::max(1.0, a.max_abs()));
  }
  // Same for the scalar example.
  for (int k = 0; k < 100; ++k) {
    const Vector x{box(rng)};
    const Vector c{box(rng)};
    const double a = contraction_matrix(scalar_example_field(), scalar_example_metric(), x, c)(0, 0);
    const double f =
        contraction_matrix(scalar_example_field(), scalar_example_metric(), x, c, Derivatives::kFiniteDifference)(0, 0);
    CHECK(std::abs(a - f) <= 1e-4 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("check_contraction_region: scalar example holds at beta = 1/3") {
  const Certificate c =
      check_contraction_region(scalar_example_field(), scalar_example_metric(), GridSpec::uniform_1d(-20, 20, 40001),
                               1.0 / 3, Vector{0.0});
  CHECK(c.holds);
  CHECK(c.margin <= -1.0);
  REQUIRE(c.witness);
  CHECK(c.violation_runs.empty());
}

TEST_CASE("check_contraction_region: scalar example fails at c = 27/16") {
  const GridSpec grid = GridSpec::uniform_1d(-20, 20, 40001);
  const Certificate c =
      check_contraction_region(scalar_example_field(), scalar_example_metric(), grid, 1.0 / 3, Vector{27.0 / 16});
  CHECK_FALSE(c.holds);
  CHECK(c.margin > 0.0);
  REQUIRE(c.witness);
  CHECK(c.witness->c == Vector{27.0 / 16});

  bool caught = false;
  for (const auto& run : c.violation_runs)
    caught |= run.from[0] - grid.spacing(0) <= kViolationX && kViolationX <= run.to[0] + grid.spacing(0);
  CHECK(caught);

  // Oracle: the argmax agrees with a direct scan of the closed form plus beta m.
  double best = -1e300;
  double arg = 0;
  for (std::size_t i = 0; i < grid.total(); ++i) {
    const double x = grid.point(i)[0];
    const double v = scalar_closed_form(x, 27.0 / 16) + scalar_metric(x) / 3;
    if (v > best) {
      best = v;
      arg = x;
    }
  }
  CHECK(c.witness->x[0] == arg);
  CHECK(c.margin == Approx(best).epsilon(1e-9));
}

TEST_CASE("check_contraction_region: x' = -x, M = 1, beta = 2 gives margin 0") {
  const auto metric = RiemannianMetric::constant(SquareMatrix{{1.0}});
  const Certificate c = check_contraction_region(pure_decay(), metric, GridSpec::uniform_1d(-3, 3, 61), 2.0, Vector{});
  CHECK(c.holds);
  CHECK(c.margin == 0.0);
}

TEST_CASE("check_contraction_region validates arguments") {
  const auto metric = RiemannianMetric::constant(SquareMatrix{{1.0}});
  CHECK_THROWS_AS(check_contraction_region(pure_decay(), metric, GridSpec::uniform_1d(-1, 1, 3), -1.0, Vector{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(check_contraction_region(pure_decay(), metric, GridSpec::uniform_1d(1, -1, 3), 0.0, Vector{}),
                  std::invalid_argument);
}

TEST_CASE("check_contraction_region is independent of the worker count") {
  const GridSpec grid = GridSpec::uniform_1d(-20, 20, 40001);
  ::setenv("CONTRACTION_LAB_THREADS", "1", 1);
  const Json serial = to_json(
      check_contraction_region(scalar_example_field(), scalar_example_metric(), grid, 1.0 / 3, Vector{27.0 / 16}));
  ::setenv("CONTRACTION_LAB_THREADS", "7", 1);
  const Json parallel = to_json(
      check_contraction_region(scalar_example_field(), scalar_example_metric(), grid, 1.0 / 3, Vector{27.0 / 16}));
  ::unsetenv("CONTRACTION_LAB_THREADS");
  CHECK(to_json_text(serial) == to_json_text(parallel));
}

TEST_CASE("certificate JSON layout") {
  const auto metric = RiemannianMetric::constant(SquareMatrix{{1.0}});
  const Json j = to_json(check_contraction_region(pure_decay(), metric, GridSpec::uniform_1d(-1, 1, 3), 1.0, Vector{}));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"holds", "margin", "witness", "grid"});
  CHECK(j["grid"]["counts"][0] == 3);
  CHECK(j["witness"].contains("x"));
  CHECK(j["witness"].contains("c"));
}

TEST_CASE("check_uniform_contraction: constant metric ignores the input") {
  const auto metric = RiemannianMetric::constant(SquareMatrix{{1.0}});
  const Certificate c = check_uniform_contraction(linear_decay(), metric, GridSpec::uniform_1d(-5, 5, 11),
                                                  GridSpec::uniform_1d(-10, 10, 201), 2.0);
  CHECK(c.holds);
  CHECK(c.margin == 0.0);
  CHECK_FALSE(c.note.empty());
}

TEST_CASE("check_uniform_contraction: scalar example fails near the input box edge") {
  const GridSpec inputs = GridSpec::uniform_1d(-2, 2, 9);
  const Certificate c = check_uniform_contraction(scalar_example_field(), scalar_example_metric(), inputs,
                                                  GridSpec::uniform_1d(-20, 20, 40001), 1.0 / 3);
  CHECK_FALSE(c.holds);
  REQUIRE(c.witness);
  CHECK(std::abs(c.witness->c[0]) == 2.0);
  CHECK_THROWS_AS(check_uniform_contraction(scalar_example_field(), scalar_example_metric(), inputs,
                                            GridSpec::uniform_1d(-1, 1, 3), 0.0),
                  std::invalid_argument);
}

TEST_CASE("check_uniform_contraction: bounded metric certifies x' = -x + u") {
  const auto [m, cert] = bounded_metric_m_parameter(1.0);
  const double reach = 10 * std::sqrt(m);
  const Certificate c = check_uniform_contraction(linear_decay(), bounded_metric(m), GridSpec::uniform_1d(-1, 1, 21),
                                                  GridSpec::uniform_1d(-reach, reach, 20001), 1.0);
  CHECK(c.holds);
}

TEST_CASE("bounded_metric_m_parameter") {
  // Independent oracle: the inequality written from the envelope 2x(x - c)e/m
  // on a finer grid.
  auto satisfied = [](double m, double b) {
    const double reach = 10 * std::sqrt(m);
    for (int i = 0; i <= 200000; ++i) {
      const double x = -reach + 2 * reach * i / 200000.0;
      const double e = std::exp(-x * x / m);
      for (double c : {-b, 0.0, b})
        if (2 * x * (x - c) * e / m > 1 + e + 1e-12) return false;
    }
    return true;
  };

  const auto one = bounded_metric_m_parameter(1.0);
  CHECK(std::isfinite(one.m));
  CHECK(one.certificate.holds);
  CHECK(one.certificate.margin <= 0.0);
  CHECK(satisfied(one.m, 1.0));
  if (one.m > 1) CHECK_FALSE(satisfied(one.m / 2, 1.0));

  const auto zero = bounded_metric_m_parameter(0.0);
  CHECK(zero.m == 1.0);
  CHECK(zero.m < one.m);
  CHECK(satisfied(zero.m, 0.0));

  const auto big = bounded_metric_m_parameter(10.0);
  CHECK(big.m >= one.m);
  CHECK(satisfied(big.m, 10.0));

  const double m = one.m;
  const auto g = bounded_metric(m).gradient(Vector{std::sqrt(m)});
  CHECK(g[0](0, 0) == Approx(-(2 / std::sqrt(m)) * std::exp(-1.0)).epsilon(1e-14));
  CHECK(g[0](0, 0) != 0.0);

  CHECK_THROWS_AS(bounded_metric_m_parameter(INFINITY), std::invalid_argument);
  CHECK_THROWS_AS(bounded_metric_m_parameter(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("find_violating_input: scalar example") {
  const std::vector<Vector> zs{{1.0}};
  const auto field = scalar_example_field();
  const auto metric = scalar_example_metric();
  const ViolatingInput v = find_violating_input(field, metric, GridSpec::uniform_1d(-5, 5, 1001), zs);
  CHECK(v.value > 0.0);
  CHECK(v.alpha > 0.0);
  CHECK(v.scale * v.alpha > std::abs(v.beta));
  CHECK(v.value == Approx(v.beta + v.scale * v.alpha).epsilon(1e-9));
  CHECK(v.value == contraction_matrix(field, metric, v.x, v.c).quadratic_form(v.z));
  CHECK(v.value == Approx(scalar_closed_form(v.x[0], v.c[0])).epsilon(1e-9));
}

TEST_CASE("find_violating_input: constant metric") {
  const std::vector<Vector> zs{{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(find_violating_input(linear_decay(2), RiemannianMetric::constant(SquareMatrix::identity(2)),
                                       GridSpec{{-1, -1}, {1, 1}, {5, 5}}, zs),
                  MetricAppearsConstant);
}

TEST_CASE("find_violating_input: bounded metric with m = 4") {
  const std::vector<Vector> zs{{1.0}};
  const auto field = linear_decay();
  const auto metric = bounded_metric(4.0);
  const ViolatingInput v = find_violating_input(field, metric, GridSpec::uniform_1d(-6, 6, 121), zs);
  CHECK(v.value > 0.0);
  CHECK(v.scale > 1.0);
  CHECK(std::abs(v.c[0]) == Approx(v.scale).epsilon(1e-15));
  // Oracle: -2(1 + e) + (c - x) e' with e = exp(-x^2/4).
  const double x = v.x[0];
  const double e = std::exp(-x * x / 4);
  CHECK(v.value == Approx(-2 * (1 + e) + (v.c[0] - x) * (-x / 2 * e)).epsilon(1e-9));
}

TEST_CASE("find_violating_input: planar metric in two dimensions") {
  std::vector<Vector> zs;
  for (int k = 0; k < 16; ++k) zs.push_back({std::cos(pi * k / 16), std::sin(pi * k / 16)});
  const auto field = linear_decay(2);
  const auto metric = bounded_metric(2.0, 2);
  const ViolatingInput v = find_violating_input(field, metric, GridSpec{{-3, -3}, {3, 3}, {13, 13}}, zs, 3);
  CHECK(v.value > 0.0);
  CHECK(max_eigenvalue(contraction_matrix(field, metric, v.x, v.c)) >= v.value - 1e-9);
}

TEST_CASE("uniform certificate predicts trajectory decay") {
  // Two trajectories under a random piecewise-constant input valued in the box.
  // Euclidean distance converts to the metric distance through sqrt(A/a).
  struct Case {
    VectorField field;
    RiemannianMetric metric;
    double lower;
    double upper;
    double beta;
  };
  const double m = bounded_metric_m_parameter(1.0).m;
  const VectorField wobble(
      1, 1, [](std::span<const double> x, std::span<const double> u) { return Vector{-x[0] + 0.3 * std::sin(x[0]) + u[0]}; },
      [](std::span<const double> x, std::span<const double>) { return SquareMatrix{{-1 + 0.3 * std::cos(x[0])}}; });
  std::vector<Case> cases;
  cases.push_back({linear_decay(), bounded_metric(m), 1.0, 2.0, 1.0});
  cases.push_back({wobble, RiemannianMetric::constant(SquareMatrix{{1.0}}), 1.0, 1.0, 1.2});

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> in_box(-1.0, 1.0);
  std::uniform_real_distribution<double> start(-3.0, 3.0);
  for (const auto& cs : cases) {
    const double reach = 10 * std::sqrt(m);
    const Certificate cert = check_uniform_contraction(cs.field, cs.metric, GridSpec::uniform_1d(-1, 1, 21),
                                                       GridSpec::uniform_1d(-reach, reach, 4001), cs.beta);
    REQUIRE(cert.holds);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> breaks;
      std::vector<Vector> values{{in_box(rng)}};
      for (int k = 1; k <= 20; ++k) {
        breaks.push_back(0.5 * k);
        values.push_back({in_box(rng)});
      }
      const InputSignal u = InputSignal::piecewise_constant(breaks, values);
      const Vector a{start(rng)};
      const Vector b{a[0] + 0.5 + std::abs(start(rng))};
      const double horizon = 8.0;
      const Vector xa = integrate(cs.field, u, a, {0.0, horizon}).final_state();
      const Vector xb = integrate(cs.field, u, b, {0.0, horizon}).final_state();
      const double ratio = distance2(xa, xb) / (std::sqrt(cs.upper / cs.lower) * distance2(a, b));
      const double rate = -std::log(ratio) / horizon;
      CHECK(rate >= cs.beta / 2 - 0.05);
    }
  }
}
