#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "clab/linalg.hpp"

namespace clab {

/// Time-invariant controlled vector field x' = f(x, u).
class VectorField {
 public:
  using Eval = std::function<Vector(std::span<const double> x, std::span<const double> u)>;
  using Jacobian = std::function<SquareMatrix(std::span<const double> x, std::span<const double> u)>;

  static constexpr double kFiniteDifferenceStep = 1e-6;

  VectorField(std::size_t state_dim, std::size_t input_dim, Eval eval, Jacobian jacobian = {});

  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  Vector operator()(std::span<const double> x, std::span<const double> u) const;

  /// df/dx at (x, u); analytic when provided, central differences otherwise.
  SquareMatrix jacobian_x(std::span<const double> x, std::span<const double> u) const;
  SquareMatrix jacobian_x_fd(std::span<const double> x, std::span<const double> u) const;

 private:
  void check_dims(std::span<const double> x, std::span<const double> u) const;

  std::size_t state_dim_;
  std::size_t input_dim_;
  Eval eval_;
  Jacobian jacobian_;
};

/// Input signal u(t). Immutable; copies share structure.
class InputSignal {
 public:
  struct Constant {
    Vector value;
  };
  struct Periodic {
    double period;
    std::function<Vector(double)> fn;
  };
  /// values[0] applies for t < breakpoints[0], values[i] on [breakpoints[i-1], breakpoints[i]),
  /// values.back() from the last breakpoint on.
  struct PiecewiseConstant {
    std::vector<double> breakpoints;
    std::vector<Vector> values;
  };
  /// first for t < switch_time, second for t >= switch_time.
  struct Concatenation {
    std::shared_ptr<const InputSignal> first;
    std::shared_ptr<const InputSignal> second;
    double switch_time;
  };
  using Variant = std::variant<Constant, Periodic, PiecewiseConstant, Concatenation>;

  static InputSignal constant(Vector value);
  static InputSignal periodic(double period, std::function<Vector(double)> fn);
  static InputSignal piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values);
  static InputSignal concatenation(InputSignal first, InputSignal second, double switch_time);

  Vector operator()(double t) const;
  /// lim_{s -> t-} u(s)
  Vector left_limit(double t) const;

  std::size_t dim() const { return dim_; }
  bool is_periodic() const;
  /// Throws std::invalid_argument for non-periodic signals.
  double period() const;

  /// Sorted jump times strictly inside (t0, t1).
  std::vector<double> discontinuities(double t0, double t1) const;

  const Variant& variant() const { return *node_; }

 private:
  InputSignal(std::shared_ptr<const Variant> node, std::size_t dim) : node_(std::move(node)), dim_(dim) {}

  std::shared_ptr<const Variant> node_;
  std::size_t dim_;
};

/// Signal equal to u before t0 and v from t0 on (right-inclusive switch).
InputSignal concat(const InputSignal& u, const InputSignal& v, double t0);

/// Signal t -> u(t + shift).
InputSignal shift_signal(const InputSignal& u, double shift);

struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  /// 0 selects an automatic starting step.
  double initial_step = 0.0;

  void validate() const;
};

/// Accepted integrator steps with cubic Hermite dense output.
class Trajectory {
 public:
  Trajectory() = default;

  std::size_t size() const { return times_.size(); }
  std::size_t state_dim() const { return states_.empty() ? 0 : states_.front().size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  double start_time() const { return times_.front(); }
  double end_time() const { return times_.back(); }
  const Vector& final_state() const { return states_.back(); }

  /// Interpolated state for t in [start_time, end_time].
  Vector dense_eval(double t) const;

  /// CSV with header t,x1,...,xn and 17 significant digits.
  void write_csv(std::ostream& out) const;

 private:
  friend Trajectory integrate(const VectorField&, const InputSignal&, std::span<const double>,
                              std::array<double, 2>, const IntegratorConfig&);

  std::vector<double> times_;
  std::vector<Vector> states_;
  // Slopes at the left and right end of step i, evaluated with the input that
  // was active inside that step.
  std::vector<Vector> slope_begin_;
  std::vector<Vector> slope_end_;
};

/// Dormand-Prince 5(4) with PI step control. Integration is split at every
/// input discontinuity so no step straddles a jump.
Trajectory integrate(const VectorField& field, const InputSignal& input, std::span<const double> x0,
                     std::array<double, 2> t_span, const IntegratorConfig& config = {});

}  // namespace clab
