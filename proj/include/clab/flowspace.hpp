#pragma once

// Flow maps phi(u, t1, t2) on R^n with a pluggable distance, piecewise-constant
// input schedules, and contraction checks that pass from constant inputs to
// schedules and then to limits of schedules.
//
// Rates here are distance-level: d shrinks like e^{lambda t}. A quadratic-form
// margin beta (as certified by the contraction module) gives lambda = -beta/2.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "clab/certificate.hpp"
#include "clab/dynamics.hpp"

namespace clab::flowspace {

using Distance = std::function<double(std::span<const double>, std::span<const double>)>;

Distance euclidean_distance();
/// sqrt((a - b)^T M (a - b)) for a constant symmetric positive definite M.
Distance weighted_distance(const SquareMatrix& m);

class FlowMap {
 public:
  FlowMap(VectorField field, IntegratorConfig config = {}, Distance distance = euclidean_distance());

  /// x(t2) for x(t1) = x under the given signal. t2 == t1 returns x.
  Vector apply(const InputSignal& signal, double t1, double t2, std::span<const double> x) const;
  double distance(std::span<const double> a, std::span<const double> b) const { return distance_(a, b); }

  const VectorField& field() const { return field_; }
  const IntegratorConfig& config() const { return config_; }

 private:
  VectorField field_;
  IntegratorConfig config_;
  Distance distance_;
};

FlowMap flow_from_field(VectorField field, IntegratorConfig config = {}, Distance distance = euclidean_distance());

struct Box {
  Vector lo;
  Vector hi;

  void validate() const;
  bool contains(std::span<const double> v) const;
};

/// Value values[i] on the i-th consecutive piece of length fractions[i] (t2 - t1).
struct PiecewiseSchedule {
  std::vector<Vector> values;
  std::vector<double> fractions;
  double t1 = 0.0;
  double t2 = 1.0;

  /// Positive fractions summing to 1 within 1e-12, t1 < t2, matching value sizes.
  void validate() const;
  /// validate() plus every value inside the box.
  void validate(const Box& box) const;
  InputSignal to_signal() const;
};

/// prod_i e^{lambda alpha_i (t2 - t1)}, checked against e^{lambda (t2 - t1)} to 1e-14 relative.
double schedule_contraction_factor(double lambda, const PiecewiseSchedule& schedule);

using PointPair = std::array<Vector, 2>;

/// Worst ratio d(phi x, phi y) / (e^{lambda (t2 - t1)} d(x, y)) over the pairs
/// under the schedule. holds iff it is <= 1 + 1e-6.
Certificate check_piecewise_contraction(const FlowMap& flow, const Box& box, double lambda,
                                        const PiecewiseSchedule& schedule, std::span<const PointPair> pairs);

struct LevelRecord {
  std::size_t level = 0;
  std::size_t pieces = 0;
  double worst_ratio = 0.0;
  /// max |out_l - out_{l-1}| over all pair points; NaN at level 0.
  double cauchy_gap = 0.0;
  double gap_tolerance = 0.0;
};

struct LimitContraction {
  Certificate certificate;
  std::vector<LevelRecord> levels;
  /// max |out_L - out_target| at the finest level.
  double approximation_error = 0.0;
};

Json to_json(const LimitContraction& r);

/// Approximates target on [t1, t2] by 2^l equal pieces valued at the piece
/// midpoints, l = 0..refinement_levels. Every approximant must contract at
/// rate lambda (slack 1e-6); the outputs must form a Cauchy sequence whose
/// gaps shrink at least by half per level down to an integrator noise floor;
/// the target flow itself must contract at rate lambda with slack 1e-4.
/// Target values are checked against the box before any integration.
/// Throws ApproximationNotConverging when the Cauchy test fails.
LimitContraction check_limit_contraction(const FlowMap& flow, const Box& box, double lambda,
                                         const InputSignal& target, double t1, double t2,
                                         std::size_t refinement_levels, std::span<const PointPair> pairs);

}  // namespace clab::flowspace
