#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clab/constant_metric.hpp"
#include "clab/contraction.hpp"
#include "clab/errors.hpp"
#include "test_support.hpp"

using namespace clab;
using namespace clab::constant_metric;
using doctest::Approx;

namespace {

Vector cross(const Vector& a, const Vector& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vector sub(const Vector& a, const Vector& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Oracle: distance from 0 to the nearest facet plane of a 3D hull, found by
// enumerating point triples whose plane leaves every point on one side.
double inradius_3d(const std::vector<Vector>& p) {
  double best = 1e300;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = a + 1; b < p.size(); ++b)
      for (std::size_t c = b + 1; c < p.size(); ++c) {
        Vector nrm = cross(sub(p[b], p[a]), sub(p[c], p[a]));
        const double len = norm2(nrm);
        if (len < 1e-12) continue;
        for (double& v : nrm) v /= len;
        const double off = dot(nrm, p[a]);
        bool pos = true;
        bool neg = true;
        for (const auto& q : p) {
          pos = pos && dot(nrm, q) <= off + 1e-12;
          neg = neg && dot(nrm, q) >= off - 1e-12;
        }
        if (pos || neg) best = std::min(best, std::abs(off));
      }
  return best;
}

// Normalised input columns of the 3D example.
std::vector<Vector> example1_heads() {
  const double s = 1 / std::sqrt(3.0);
  return {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-s, -s, -s}};
}

VectorField decay_plus_input() {
  return VectorField(
      1, 1, [](std::span<const double> x, std::span<const double> u) { return Vector{-x[0] + u[0]}; },
      [](std::span<const double>, std::span<const double>) { return SquareMatrix{{-1.0}}; });
}

}  // namespace

TEST_CASE("hull_contains_ball: square") {
  const std::vector<Vector> pts{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  CHECK(hull_contains_ball(pts, 0.5, 360));
  CHECK(hull_contains_ball(pts, 0.7, 360));
  CHECK_FALSE(hull_contains_ball(pts, 0.72, 360));
  CHECK(support_margin(pts, 360) == Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("hull_contains_ball: degenerate hull") {
  const std::vector<Vector> seg{{1, 0}, {0, 1}};
  for (double rho : {1e-6, 0.1, 0.5}) CHECK_FALSE(hull_contains_ball(seg, rho, 1000));
  const std::vector<Vector> single{{1, 0, 0}};
  CHECK_FALSE(hull_contains_ball(single, 1e-3, 1000));
}

TEST_CASE("hull_contains_ball: simplex directions") {
  for (std::size_t n : {1, 2, 3}) {
    const auto v = simplex_directions(n);
    CHECK(v.size() == n + 1);
    Vector sum(n, 0.0);
    for (const auto& p : v) {
      CHECK(norm2(p) == Approx(1.0).epsilon(1e-15));
      for (std::size_t k = 0; k < n; ++k) sum[k] += p[k];
    }
    CHECK(norm2(sum) <= 1e-15);
  }
  const auto v = simplex_directions(3);
  const double r = inradius_3d(v);
  CHECK(r == Approx(1.0 / 3).epsilon(1e-12));
  CHECK(hull_contains_ball(v, r / 2, 1000));
  // Scaled copies c_ij = i v_j keep the hull property at radius i r / 2.
  std::vector<Vector> scaled = v;
  for (auto& p : scaled)
    for (double& x : p) x *= 7;
  CHECK(hull_contains_ball(scaled, 7 * r / 2, 1000));
}

TEST_CASE("hull_contains_ball: example 1 inradius") {
  const auto heads = example1_heads();
  const double r = inradius_3d(heads);
  CHECK(r == Approx(0.2506).epsilon(1e-3));
  CHECK(r == Approx(example1_inradius()).epsilon(1e-12));
  CHECK(hull_contains_ball(heads, r / 2, 1000));
  CHECK_FALSE(hull_contains_ball(heads, 1.05 * r, 20000));
  CHECK(support_margin(heads, 20000) >= r);
}

TEST_CASE("hull_contains_ball: monotone in rho and scale covariant") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 2;
    std::vector<Vector> pts;
    const std::size_t count = n + 1 + trial % 5;
    for (std::size_t k = 0; k < count; ++k) pts.push_back(testing::random_unit(rng, n));
    const double rho = 0.05 + 0.6 * unit(rng);
    const double smaller = rho * unit(rng) + 1e-9;
    if (hull_contains_ball(pts, rho, 400)) CHECK(hull_contains_ball(pts, smaller, 400));

    const double s = std::ldexp(1.0, static_cast<int>(trial % 7) - 3);  // powers of two keep the products exact
    std::vector<Vector> scaled = pts;
    for (auto& p : scaled)
      for (double& x : p) x *= s;
    CHECK(hull_contains_ball(scaled, rho, 400) == hull_contains_ball(pts, rho / s, 400));
  }
}

TEST_CASE("hull_contains_ball validation") {
  const std::vector<Vector> pts{{1, 0}, {-1, 0}};
  CHECK_THROWS_AS(hull_contains_ball(pts, 0.0, 360), std::invalid_argument);
  CHECK_THROWS_AS(hull_contains_ball(pts, 0.1, 50), std::invalid_argument);
  const std::vector<Vector> four{{1, 0, 0, 0}};
  CHECK_THROWS_AS(hull_contains_ball(four, 0.1, 360), std::invalid_argument);
}

TEST_CASE("jacobian_field_ratio") {
  CHECK(jacobian_field_ratio(decay_plus_input(), Vector{10.0}, Vector{0.0}) == Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_AS(jacobian_field_ratio(decay_plus_input(), Vector{0.0}, Vector{0.0}), ZeroField);
  const auto ex = example_3d_system();
  for (std::size_t k : {1, 3, 10, 1000}) {
    Vector u(4, 0.0);
    u[0] = static_cast<double>(k);
    CHECK(jacobian_field_ratio(ex.field, u, Vector{0, 0, 0}) == Approx(1.0 / k).epsilon(1e-14));
  }
}

TEST_CASE("example_3d_system") {
  const auto ex = example_3d_system();
  CHECK(ex.field(Vector{0, 0, 0}, Vector{1, 0, 0, 0}) == Vector{1, 0, 0});
  CHECK(ex.field(Vector{0, 0, 0}, Vector{0, 0, 0, 1}) == Vector{-1, -1, -1});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    const Vector x{g(rng), g(rng), g(rng)};
    const Vector u{g(rng), g(rng), g(rng), g(rng)};
    CHECK(ex.field.jacobian_x(x, u) == SquareMatrix::identity(3) * -1.0);
    CHECK((ex.field.jacobian_x_fd(x, u) - SquareMatrix::identity(3) * -1.0).max_abs() <= 1e-8);
  }
  CHECK(ex.family.k == 4);
  CHECK(ex.family(5, 2) == Vector{0, 5, 0, 0});
  CHECK_THROWS_AS(ex.family(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ex.family(1, 5), std::invalid_argument);
}

TEST_CASE("check_thm3_conditions: example 1") {
  const auto ex = example_3d_system();
  const double rho = inradius_3d(example1_heads()) / 2;
  const std::vector<Vector> xs{{0, 0, 0}, {0.1, -0.2, 0.05}, {-0.25, 0, 0}, {0.1, 0.1, 0.1}};
  const Thm3Report r = check_thm3_conditions(ex.field, ex.family, xs, rho);
  CHECK(r.hull_condition);
  CHECK(r.ratio_condition);
  CHECK(r.holds());
  CHECK(r.largest_index == 1024);
  // At x = 0 the ratio is |J| / min_j |B e_j| k = 1/k.
  for (std::size_t q = 0; q < r.points[0].i.size(); ++q)
    CHECK(r.points[0].ratio[q] == Approx(1.0 / r.points[0].i[q]).epsilon(1e-13));
  const Json j = to_json(r);
  CHECK(j["points"].size() == 4);
  CHECK(j["points"][0]["ratio"].size() == 11);
}

TEST_CASE("check_thm3_conditions: additive example with f(x) = -x") {
  for (std::size_t n : {1, 2, 3}) {
    const auto ex = additive_example(n);
    std::vector<Vector> xs{Vector(n, 0.0), Vector(n, 0.12), Vector(n, -0.1)};
    const Thm3Report r = check_thm3_conditions(ex.field, ex.family, xs, 0.5 / static_cast<double>(n));
    CHECK(r.holds());
  }
}

TEST_CASE("check_thm3_conditions: single sequence fails the hull test") {
  const InputSequenceFamily one{1, [](std::size_t i, std::size_t) { return Vector{static_cast<double>(i), 0.0}; }};
  const auto ex = additive_example(2);
  const std::vector<Vector> xs{{0.0, 0.0}};
  const Thm3Report r = check_thm3_conditions(ex.field, one, xs, 0.1);
  CHECK_FALSE(r.hull_condition);
  CHECK_FALSE(r.holds());
  CHECK_FALSE(r.points[0].i0.has_value());
}

TEST_CASE("check_thm3_conditions: non-vanishing ratio is rejected") {
  // Inputs stay bounded, so the ratio does not decay.
  const auto ex = additive_example(2);
  const auto dirs = simplex_directions(2);
  const InputSequenceFamily bounded{3, [dirs](std::size_t, std::size_t j) { return dirs[j - 1]; }};
  const std::vector<Vector> xs{{0.0, 0.0}};
  const Thm3Report r = check_thm3_conditions(ex.field, bounded, xs, 0.25);
  CHECK(r.hull_condition);
  CHECK_FALSE(r.ratio_condition);
}

TEST_CASE("check_thm3_conditions propagates ZeroField with location") {
  const auto ex = additive_example(1);
  // f(x) + c_{1,1} = -1 + 1 = 0 at x = 1.
  const std::vector<Vector> xs{{0.5}, {1.0}};
  try {
    check_thm3_conditions(ex.field, ex.family, xs, 0.5);
    FAIL("expected ZeroField");
  } catch (const ZeroField& e) {
    const std::string what = e.what();
    CHECK(what.find("i = 1") != std::string::npos);
    CHECK(what.find("j = 1") != std::string::npos);
  }
}

TEST_CASE("example 1 is contractive in the identity metric") {
  const auto ex = example_3d_system();
  const auto metric = contraction::RiemannianMetric::constant(SquareMatrix::identity(3));
  const GridSpec region{{-2, -2, -2}, {2, 2, 2}, {5, 5, 5}};
  for (const Vector& c : {Vector{0, 0, 0, 0}, Vector{100, -3, 7, 1e3}}) {
    const Certificate cert = contraction::check_contraction_region(ex.field, metric, region, 2.0, c);
    CHECK(cert.holds);
    CHECK(cert.margin == 0.0);
  }
}

TEST_CASE("additive example forces a constant metric: non-constant metrics lose contraction") {
  const auto ex = additive_example(1);
  const std::vector<Vector> xs{{0.0}, {0.2}};
  REQUIRE(check_thm3_conditions(ex.field, ex.family, xs, 0.5).holds());
  const std::vector<Vector> zs{{1.0}};
  const auto v = contraction::find_violating_input(ex.field, contraction::bounded_metric(4.0),
                                                   GridSpec::uniform_1d(-4, 4, 81), zs);
  CHECK(v.value > 0.0);
  CHECK_THROWS_AS(contraction::find_violating_input(ex.field, contraction::RiemannianMetric::constant(SquareMatrix{{2.0}}),
                                                    GridSpec::uniform_1d(-4, 4, 81), zs),
                  MetricAppearsConstant);
}
