#include "clab/constant_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "clab/errors.hpp"
#include "clab/parallel.hpp"

namespace clab::constant_metric {

namespace {

constexpr double kZeroFieldFloor = 1e-14;
constexpr double kRatioFinal = 1e-2;
constexpr double kHalvingLo = 0.4;
constexpr double kHalvingHi = 0.6;
constexpr std::size_t kMinDirections = 100;

Vector normalised(Vector v) {
  const double n = norm2(v);
  for (double& x : v) x /= n;
  return v;
}

std::string describe(std::span<const double> x) { return to_json_text(json_array(x)).substr(0, 200); }

}  // namespace

Vector InputSequenceFamily::operator()(std::size_t i, std::size_t j) const {
  if (i < 1 || j < 1 || j > k) throw std::invalid_argument("InputSequenceFamily: index out of range");
  return generator(i, j);
}

std::vector<Vector> sphere_directions(std::size_t n, std::size_t count) {
  std::vector<Vector> dirs;
  if (n == 1) return {{1.0}, {-1.0}};
  if (n == 2) {
    for (std::size_t k = 0; k < count; ++k) {
      const double th = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      dirs.push_back({std::cos(th), std::sin(th)});
    }
    return dirs;
  }
  if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < count; ++k) {
      const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(k);
      dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    return dirs;
  }
  throw std::invalid_argument("sphere_directions: dimension must be 1, 2 or 3");
}

double support_margin(std::span<const Vector> points, std::size_t direction_count) {
  if (points.empty()) throw std::invalid_argument("support_margin: no points");
  const std::size_t n = points.front().size();
  for (const auto& p : points)
    if (p.size() != n) throw DimensionMismatch("support_margin: points differ in dimension");
  if (direction_count < kMinDirections) throw std::invalid_argument("support_margin: need at least 100 directions");
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& d : sphere_directions(n, direction_count)) {
    double h = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) h = std::max(h, dot(d, p));
    margin = std::min(margin, h);
  }
  return margin;
}

bool hull_contains_ball(std::span<const Vector> points, double rho, std::size_t direction_count) {
  if (!(rho > 0.0)) throw std::invalid_argument("hull_contains_ball: rho must be positive");
  return support_margin(points, direction_count) >= rho;
}

double jacobian_field_ratio(const VectorField& field, std::span<const double> u, std::span<const double> x) {
  const double fn = norm2(field(x, u));
  if (fn < kZeroFieldFloor) throw ZeroField("jacobian_field_ratio: |f(x, u)| below 1e-14 at x = " + describe(x));
  return spectral_norm(field.jacobian_x(x, u)) / fn;
}

std::vector<std::size_t> default_i_list() {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i <= 1024; i *= 2) out.push_back(i);
  return out;
}

Thm3Report check_thm3_conditions(const VectorField& field, const InputSequenceFamily& family,
                                 std::span<const Vector> x_samples, double rho,
                                 const std::vector<std::size_t>& i_list, std::size_t direction_count) {
  if (!(rho > 0.0)) throw std::invalid_argument("check_thm3_conditions: rho must be positive");
  if (family.k == 0) throw std::invalid_argument("check_thm3_conditions: family is empty");
  if (i_list.empty() || i_list.front() < 1) throw std::invalid_argument("check_thm3_conditions: i_list must be non-empty and >= 1");
  if (!std::is_sorted(i_list.begin(), i_list.end()) ||
      std::adjacent_find(i_list.begin(), i_list.end()) != i_list.end())
    throw std::invalid_argument("check_thm3_conditions: i_list must be strictly ascending");
  if (field.state_dim() > 3) throw std::invalid_argument("check_thm3_conditions: state dimension must be <= 3");
  if (direction_count < kMinDirections) throw std::invalid_argument("check_thm3_conditions: need at least 100 directions");

  struct Cell {
    double margin;
    double ratio;
  };
  const std::size_t ni = i_list.size();
  const auto cells = parallel_map(x_samples.size() * ni, [&](std::size_t flat) {
    const Vector& x = x_samples[flat / ni];
    const std::size_t i = i_list[flat % ni];
    std::vector<Vector> heads;
    double ratio = 0.0;
    for (std::size_t j = 1; j <= family.k; ++j) {
      const Vector u = family(i, j);
      const Vector f = field(x, u);
      const double fn = norm2(f);
      if (fn < kZeroFieldFloor)
        throw ZeroField("check_thm3_conditions: |f| below 1e-14 at x = " + describe(x) + ", i = " + std::to_string(i) +
                        ", j = " + std::to_string(j));
      ratio = std::max(ratio, spectral_norm(field.jacobian_x(x, u)) / fn);
      heads.push_back(normalised(f));
    }
    return Cell{support_margin(heads, direction_count), ratio};
  });

  Thm3Report report;
  report.rho = rho;
  report.direction_count = direction_count;
  report.largest_index = i_list.back();
  report.hull_condition = true;
  report.ratio_condition = true;
  for (std::size_t p = 0; p < x_samples.size(); ++p) {
    PointReport pr;
    pr.x = x_samples[p];
    pr.i = i_list;
    for (std::size_t q = 0; q < ni; ++q) {
      const Cell& c = cells[p * ni + q];
      pr.hull.push_back(c.margin >= rho);
      pr.support_margin.push_back(c.margin);
      pr.ratio.push_back(c.ratio);
    }
    for (std::size_t q = ni; q-- > 0 && pr.hull[q];) pr.i0 = i_list[q];

    bool ok = pr.ratio.back() < kRatioFinal;
    for (std::size_t q = 0; q + 1 < ni; ++q) {
      ok = ok && pr.ratio[q + 1] < pr.ratio[q];
      if (i_list[q + 1] == 2 * i_list[q]) {
        const double f = pr.ratio[q + 1] / pr.ratio[q];
        ok = ok && f >= kHalvingLo && f <= kHalvingHi;
      }
    }
    pr.ratio_vanishing = ok;
    report.hull_condition = report.hull_condition && pr.i0.has_value();
    report.ratio_condition = report.ratio_condition && ok;
    report.points.push_back(std::move(pr));
  }
  report.note = "hull containment is certified up to " + std::to_string(direction_count) +
                " sampled directions; limits are checked up to i = " + std::to_string(report.largest_index) +
                " at the listed x samples only";
  return report;
}

Json to_json(const Thm3Report& r) {
  Json j;
  j["rho"] = r.rho;
  j["direction_count"] = r.direction_count;
  j["largest_index"] = r.largest_index;
  j["hull_condition"] = r.hull_condition;
  j["ratio_condition"] = r.ratio_condition;
  j["holds"] = r.holds();
  Json pts = Json::array();
  for (const auto& p : r.points) {
    Json jp;
    jp["x"] = json_array(p.x);
    jp["i"] = p.i;
    jp["hull"] = p.hull;
    jp["support_margin"] = json_array(p.support_margin);
    jp["ratio"] = json_array(p.ratio);
    jp["i0"] = p.i0 ? Json(*p.i0) : Json(nullptr);
    jp["ratio_vanishing"] = p.ratio_vanishing;
    pts.push_back(std::move(jp));
  }
  j["points"] = std::move(pts);
  j["note"] = r.note;
  return j;
}

ExampleSystem example_3d_system() {
  VectorField field(
      3, 4,
      [](std::span<const double> x, std::span<const double> u) {
        return Vector{-x[0] + u[0] - u[3], -x[1] + u[1] - u[3], -x[2] + u[2] - u[3]};
      },
      [](std::span<const double>, std::span<const double>) { return SquareMatrix::identity(3) * -1.0; });
  InputSequenceFamily family{4, [](std::size_t i, std::size_t j) {
                               Vector u(4, 0.0);
                               u[j - 1] = static_cast<double>(i);
                               return u;
                             }};
  return {std::move(field), std::move(family)};
}

double example1_inradius() { return 1.0 / std::sqrt(9.0 + 4.0 * std::sqrt(3.0)); }

std::vector<Vector> simplex_directions(std::size_t n) {
  switch (n) {
    case 1:
      return {{1.0}, {-1.0}};
    case 2: {
      std::vector<Vector> v;
      for (int k = 0; k < 3; ++k) {
        const double th = std::numbers::pi / 2 + 2 * std::numbers::pi * k / 3;
        v.push_back({std::cos(th), std::sin(th)});
      }
      return v;
    }
    case 3: {
      const double s = 1.0 / std::sqrt(3.0);
      return {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    }
    default:
      throw std::invalid_argument("simplex_directions: dimension must be 1, 2 or 3");
  }
}

ExampleSystem additive_example(const VectorField& base) {
  if (base.input_dim() != 0) throw std::invalid_argument("additive_example: base field must have no input");
  const std::size_t n = base.state_dim();
  const std::vector<Vector> dirs = simplex_directions(n);
  const Vector none;
  VectorField field(
      n, n,
      [base, none](std::span<const double> x, std::span<const double> c) {
        Vector f = base(x, none);
        for (std::size_t k = 0; k < f.size(); ++k) f[k] += c[k];
        return f;
      },
      [base, none](std::span<const double> x, std::span<const double>) { return base.jacobian_x(x, none); });
  InputSequenceFamily family{n + 1, [dirs](std::size_t i, std::size_t j) {
                               Vector c = dirs[j - 1];
                               for (double& v : c) v *= static_cast<double>(i);
                               return c;
                             }};
  return {std::move(field), std::move(family)};
}

ExampleSystem additive_example(std::size_t n) {
  const VectorField decay(
      n, 0,
      [](std::span<const double> x, std::span<const double>) {
        Vector f(x.begin(), x.end());
        for (double& v : f) v = -v;
        return f;
      },
      [n](std::span<const double>, std::span<const double>) { return SquareMatrix::identity(n) * -1.0; });
  return additive_example(decay);
}

}  // namespace clab::constant_metric
