#pragma once

// Numerical predicates for the conditions under which uniform contraction over
// all constant inputs forces a constant metric: normalised field values whose
// convex hull contains a ball around 0, and a Jacobian-to-field ratio that
// vanishes along the input sequences.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clab/dynamics.hpp"
#include "clab/io.hpp"

namespace clab::constant_metric {

/// k sequences of constant inputs u_{i,j}, i >= 1, 1 <= j <= k.
struct InputSequenceFamily {
  std::size_t k = 0;
  std::function<Vector(std::size_t i, std::size_t j)> generator;

  Vector operator()(std::size_t i, std::size_t j) const;
};

/// Deterministic unit directions: {-1, +1} in 1D, equally spaced angles in 2D,
/// a Fibonacci sphere in 3D.
std::vector<Vector> sphere_directions(std::size_t n, std::size_t count);

/// min over directions d of max over points p of d.p. Equals the largest ball
/// radius around 0 inside conv(points) in the limit of dense directions.
double support_margin(std::span<const Vector> points, std::size_t direction_count);

/// support_margin(points) >= rho. Needs n <= 3 and direction_count >= 100.
bool hull_contains_ball(std::span<const Vector> points, double rho, std::size_t direction_count = 1000);

/// |df/dx(x, u)|_2 / |f(x, u)|_2; ZeroField if |f(x, u)|_2 < 1e-14.
double jacobian_field_ratio(const VectorField& field, std::span<const double> u, std::span<const double> x);

/// 1, 2, 4, ..., 1024
std::vector<std::size_t> default_i_list();

struct PointReport {
  Vector x;
  std::vector<std::size_t> i;
  std::vector<bool> hull;
  std::vector<double> support_margin;
  std::vector<double> ratio;
  /// Smallest listed index from which the hull check holds for every later listed index.
  std::optional<std::size_t> i0;
  bool ratio_vanishing = false;
};

struct Thm3Report {
  double rho = 0.0;
  std::size_t direction_count = 0;
  std::size_t largest_index = 0;
  std::vector<PointReport> points;
  bool hull_condition = false;
  bool ratio_condition = false;
  std::string note;

  bool holds() const { return hull_condition && ratio_condition; }
};

Json to_json(const Thm3Report& r);

/// For each x and each listed i: the hull check on {f(x, u_ij)/|f(x, u_ij)|}_j
/// at radius rho, and max_j jacobian_field_ratio. The ratio condition needs
/// the ratio at the largest i below 1e-2, a monotone decrease, and a factor in
/// [0.4, 0.6] whenever the index doubles. ZeroField names the offending (x, i, j).
Thm3Report check_thm3_conditions(const VectorField& field, const InputSequenceFamily& family,
                                 std::span<const Vector> x_samples, double rho,
                                 const std::vector<std::size_t>& i_list = default_i_list(),
                                 std::size_t direction_count = 1000);

struct ExampleSystem {
  VectorField field;
  InputSequenceFamily family;
};

/// x' = -x + B u with B = [e1 e2 e3 -1] (3x4) and u_{k,j} = k e_j.
ExampleSystem example_3d_system();

/// Inradius of conv{e1, e2, e3, -(1, 1, 1)/sqrt(3)}, the limiting normalised
/// field directions of example_3d_system: 1 / sqrt(9 + 4 sqrt(3)).
double example1_inradius();

/// n + 1 unit vectors forming a regular simplex centred at 0 (n <= 3). The
/// inradius of their hull is 1/n.
std::vector<Vector> simplex_directions(std::size_t n);

/// x' = f(x) + c with c_{i,j} = i v_j over simplex_directions. base must have input_dim 0.
ExampleSystem additive_example(const VectorField& base);
/// additive_example with f(x) = -x in dimension n.
ExampleSystem additive_example(std::size_t n);

}  // namespace clab::constant_metric
