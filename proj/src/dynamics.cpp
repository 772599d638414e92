#include "clab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "clab/errors.hpp"
#include "clab/io.hpp"

namespace clab {

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(std::size_t state_dim, std::size_t input_dim, Eval eval, Jacobian jacobian)
    : state_dim_(state_dim), input_dim_(input_dim), eval_(std::move(eval)), jacobian_(std::move(jacobian)) {
  if (state_dim == 0 || state_dim > SquareMatrix::kMaxDim)
    throw std::invalid_argument("VectorField: state dimension out of range");
  if (!eval_) throw std::invalid_argument("VectorField: empty evaluation function");
}

void VectorField::check_dims(std::span<const double> x, std::span<const double> u) const {
  if (x.size() != state_dim_ || u.size() != input_dim_)
    throw DimensionMismatch("VectorField: expected state of size " + std::to_string(state_dim_) +
                            " and input of size " + std::to_string(input_dim_));
}

Vector VectorField::operator()(std::span<const double> x, std::span<const double> u) const {
  check_dims(x, u);
  Vector dx = eval_(x, u);
  if (dx.size() != state_dim_) throw DimensionMismatch("VectorField: evaluation returned wrong size");
  return dx;
}

SquareMatrix VectorField::jacobian_x(std::span<const double> x, std::span<const double> u) const {
  if (!jacobian_) return jacobian_x_fd(x, u);
  check_dims(x, u);
  SquareMatrix j = jacobian_(x, u);
  if (j.dim() != state_dim_) throw DimensionMismatch("VectorField: Jacobian has wrong dimension");
  return j;
}

SquareMatrix VectorField::jacobian_x_fd(std::span<const double> x, std::span<const double> u) const {
  check_dims(x, u);
  SquareMatrix j(state_dim_);
  Vector xp(x.begin(), x.end());
  Vector xm(x.begin(), x.end());
  for (std::size_t k = 0; k < state_dim_; ++k) {
    const double h = kFiniteDifferenceStep * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    const Vector fp = eval_(xp, u);
    const Vector fm = eval_(xm, u);
    const double width = xp[k] - xm[k];
    for (std::size_t i = 0; i < state_dim_; ++i) j(i, k) = (fp[i] - fm[i]) / width;
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return j;
}

// ---------------------------------------------------------------------------
// InputSignal

InputSignal InputSignal::constant(Vector value) {
  const std::size_t dim = value.size();
  return InputSignal(std::make_shared<const Variant>(Constant{std::move(value)}), dim);
}

InputSignal InputSignal::periodic(double period, std::function<Vector(double)> fn) {
  if (!(period > 0.0) || !std::isfinite(period)) throw std::invalid_argument("periodic: period must be > 0");
  if (!fn) throw std::invalid_argument("periodic: empty function");
  const std::size_t dim = fn(0.0).size();
  return InputSignal(std::make_shared<const Variant>(Periodic{period, std::move(fn)}), dim);
}

InputSignal InputSignal::piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values) {
  if (values.size() != breakpoints.size() + 1)
    throw std::invalid_argument("piecewise_constant: need one more value than breakpoints");
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    if (!(breakpoints[i] < breakpoints[i + 1]))
      throw std::invalid_argument("piecewise_constant: breakpoints must be strictly increasing");
  const std::size_t dim = values.front().size();
  for (const auto& v : values)
    if (v.size() != dim) throw DimensionMismatch("piecewise_constant: values differ in dimension");
  return InputSignal(
      std::make_shared<const Variant>(PiecewiseConstant{std::move(breakpoints), std::move(values)}), dim);
}

InputSignal InputSignal::concatenation(InputSignal first, InputSignal second, double switch_time) {
  if (first.dim() != second.dim()) throw DimensionMismatch("concat: signals differ in dimension");
  const std::size_t dim = first.dim();
  return InputSignal(std::make_shared<const Variant>(Concatenation{
                         std::make_shared<const InputSignal>(std::move(first)),
                         std::make_shared<const InputSignal>(std::move(second)), switch_time}),
                     dim);
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Vector InputSignal::operator()(double t) const {
  return std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [t](const Periodic& p) { return p.fn(t); },
          [t](const PiecewiseConstant& pc) {
            auto it = std::upper_bound(pc.breakpoints.begin(), pc.breakpoints.end(), t);
            return pc.values[static_cast<std::size_t>(it - pc.breakpoints.begin())];
          },
          [t](const Concatenation& c) { return t < c.switch_time ? (*c.first)(t) : (*c.second)(t); },
      },
      *node_);
}

Vector InputSignal::left_limit(double t) const {
  return std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [t](const Periodic& p) { return p.fn(t); },
          [t](const PiecewiseConstant& pc) {
            auto it = std::lower_bound(pc.breakpoints.begin(), pc.breakpoints.end(), t);
            return pc.values[static_cast<std::size_t>(it - pc.breakpoints.begin())];
          },
          [t](const Concatenation& c) {
            return t <= c.switch_time ? c.first->left_limit(t) : c.second->left_limit(t);
          },
      },
      *node_);
}

bool InputSignal::is_periodic() const { return std::holds_alternative<Periodic>(*node_); }

double InputSignal::period() const {
  if (const auto* p = std::get_if<Periodic>(node_.get())) return p->period;
  throw std::invalid_argument("InputSignal: signal is not periodic");
}

std::vector<double> InputSignal::discontinuities(double t0, double t1) const {
  std::vector<double> out;
  std::visit(Overloaded{
                 [](const Constant&) {},
                 [](const Periodic&) {},
                 [&](const PiecewiseConstant& pc) {
                   for (double b : pc.breakpoints)
                     if (b > t0 && b < t1) out.push_back(b);
                 },
                 [&](const Concatenation& c) {
                   const double s = c.switch_time;
                   auto left = c.first->discontinuities(t0, std::min(t1, s));
                   auto right = c.second->discontinuities(std::max(t0, s), t1);
                   out.insert(out.end(), left.begin(), left.end());
                   if (s > t0 && s < t1) out.push_back(s);
                   out.insert(out.end(), right.begin(), right.end());
                 },
             },
             *node_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

InputSignal concat(const InputSignal& u, const InputSignal& v, double t0) {
  return InputSignal::concatenation(u, v, t0);
}

InputSignal shift_signal(const InputSignal& u, double shift) {
  return std::visit(
      Overloaded{
          [&](const InputSignal::Constant&) { return u; },
          [&](const InputSignal::Periodic& p) {
            auto fn = p.fn;
            return InputSignal::periodic(p.period, [fn, shift](double t) { return fn(t + shift); });
          },
          [&](const InputSignal::PiecewiseConstant& pc) {
            std::vector<double> moved = pc.breakpoints;
            for (double& b : moved) b -= shift;
            return InputSignal::piecewise_constant(std::move(moved), pc.values);
          },
          [&](const InputSignal::Concatenation& c) {
            return concat(shift_signal(*c.first, shift), shift_signal(*c.second, shift), c.switch_time - shift);
          },
      },
      u.variant());
}

// ---------------------------------------------------------------------------
// Trajectory

Vector Trajectory::dense_eval(double t) const {
  if (times_.empty()) throw std::logic_error("Trajectory: empty");
  if (t < times_.front() || t > times_.back())
    throw std::out_of_range("Trajectory::dense_eval: time outside integrated span");
  if (times_.size() == 1) return states_.front();

  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (i + 1 >= times_.size()) return states_.back();

  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  Vector out(states_[i].size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = h00 * states_[i][k] + h10 * h * slope_begin_[i][k] + h01 * states_[i + 1][k] +
             h11 * h * slope_end_[i][k];
  }
  return out;
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t";
  for (std::size_t k = 0; k < state_dim(); ++k) out << ",x" << (k + 1);
  out << "\n";
  for (std::size_t i = 0; i < times_.size(); ++i) {
    out << format_double(times_[i]);
    for (double v : states_[i]) out << "," << format_double(v);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Integrator

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
  if (!(max_step > 0.0)) throw std::invalid_argument("IntegratorConfig: max_step must be positive");
  if (!(initial_step >= 0.0)) throw std::invalid_argument("IntegratorConfig: initial_step must be >= 0");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kMinShrink = 0.2;
constexpr double kMaxGrow = 10.0;
constexpr std::size_t kMaxSteps = 20'000'000;
constexpr double kMinStepFraction = 1e-14;
// Step underflow with the state this far above its initial size is reported as blow-up.
constexpr double kBlowupFactor = 1e8;

class Stepper {
 public:
  Stepper(const VectorField& field, const IntegratorConfig& cfg) : field_(field), cfg_(cfg), n_(field.state_dim()) {}

  // RHS on the segment [a, b]: right value at a, left limits on (a, b].
  Vector rhs(const InputSignal& u, double a, double t, std::span<const double> x) const {
    const Vector uv = t <= a ? u(t) : u.left_limit(t);
    return field_(x, uv);
  }

  double error_norm(std::span<const double> err, std::span<const double> y0, std::span<const double> y1) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sk = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      s += (err[i] / sk) * (err[i] / sk);
    }
    return std::sqrt(s / static_cast<double>(n_));
  }

  double initial_step(const InputSignal& u, double a, double b, std::span<const double> y0,
                      std::span<const double> f0) const {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y0[i]);
      d0 += (y0[i] / sk) * (y0[i] / sk);
      d1 += (f0[i] / sk) * (f0[i] / sk);
    }
    d0 = std::sqrt(d0 / static_cast<double>(n_));
    d1 = std::sqrt(d1 / static_cast<double>(n_));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, b - a, cfg_.max_step});
    Vector y1(n_);
    for (std::size_t i = 0; i < n_; ++i) y1[i] = y0[i] + h0 * f0[i];
    const Vector f1 = rhs(u, a, a + h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y0[i]);
      d2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
    }
    d2 = std::sqrt(d2 / static_cast<double>(n_)) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100 * h0, h1, cfg_.max_step});
  }

 private:
  const VectorField& field_;
  const IntegratorConfig& cfg_;
  std::size_t n_;
};

}  // namespace

Trajectory integrate(const VectorField& field, const InputSignal& input, std::span<const double> x0,
                     std::array<double, 2> t_span, const IntegratorConfig& config) {
  config.validate();
  const auto [t0, t1] = t_span;
  if (!(t1 > t0)) throw std::invalid_argument("integrate: need t1 > t0");
  if (x0.size() != field.state_dim()) throw DimensionMismatch("integrate: initial state has wrong size");
  if (input.dim() != field.input_dim()) throw DimensionMismatch("integrate: input has wrong dimension");
  if (!all_finite(x0)) throw NonFinite("integrate: initial state is not finite");

  const std::size_t n = field.state_dim();
  const double min_step = kMinStepFraction * (t1 - t0);
  Stepper stepper(field, config);

  std::vector<double> cuts{t0};
  for (double d : input.discontinuities(t0, t1))
    if (d - cuts.back() > min_step && t1 - d > min_step) cuts.push_back(d);
  cuts.push_back(t1);

  Trajectory traj;
  traj.times_.push_back(t0);
  traj.states_.emplace_back(x0.begin(), x0.end());

  Vector y(x0.begin(), x0.end());
  Vector y1(n), ytmp(n), err(n);
  double h = config.initial_step;
  std::size_t steps = 0;

  for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
    const double a = cuts[seg];
    const double b = cuts[seg + 1];
    double t = a;
    Vector k1 = stepper.rhs(input, a, t, y);
    if (h <= 0.0) h = stepper.initial_step(input, a, b, y, k1);
    double facold = 1e-4;
    bool last_rejected = false;
    bool last_nonfinite = false;

    while (t < b) {
      if (++steps > kMaxSteps) throw Error("integrate: step budget exhausted");
      h = std::min(h, config.max_step);
      bool final_step = false;
      if (t + 1.01 * h >= b) {
        h = b - t;
        final_step = true;
      }
      if (h < min_step && !final_step) {
        if (last_nonfinite || norm2(y) > kBlowupFactor * std::max(1.0, norm2(x0)))
          throw NonFinite("integrate: state blew up near t=" + format_double(t));
        throw StepSizeUnderflow("integrate: step size underflow at t=" + format_double(t));
      }

      auto stage = [&](std::initializer_list<std::pair<double, const Vector*>> terms) {
        for (std::size_t i = 0; i < n; ++i) {
          double s = y[i];
          for (const auto& [coef, k] : terms) s += h * coef * (*k)[i];
          ytmp[i] = s;
        }
        return ytmp;
      };
      const Vector k2 = stepper.rhs(input, a, t + c2 * h, stage({{a21, &k1}}));
      const Vector k3 = stepper.rhs(input, a, t + c3 * h, stage({{a31, &k1}, {a32, &k2}}));
      const Vector k4 = stepper.rhs(input, a, t + c4 * h, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
      const Vector k5 =
          stepper.rhs(input, a, t + c5 * h, stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
      const double t_new = final_step ? b : t + h;
      const Vector k6 =
          stepper.rhs(input, a, t_new, stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
      y1 = stage({{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
      const Vector k7 = stepper.rhs(input, a, t_new, y1);
      for (std::size_t i = 0; i < n; ++i)
        err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

      const double e = stepper.error_norm(err, y, y1);
      if (!std::isfinite(e) || !all_finite(y1)) {
        last_nonfinite = true;
        last_rejected = true;
        h *= 0.1;
        continue;
      }
      last_nonfinite = false;

      const double fac11 = std::pow(e, kExpo);
      if (e <= 1.0) {
        double fac = fac11 / std::pow(facold, kBeta);
        fac = std::clamp(fac / kSafety, 1.0 / kMaxGrow, 1.0 / kMinShrink);
        double h_next = h / fac;
        if (last_rejected) h_next = std::min(h_next, h);
        facold = std::max(e, 1e-4);
        last_rejected = false;

        traj.slope_begin_.push_back(k1);
        traj.slope_end_.push_back(k7);
        traj.times_.push_back(t_new);
        traj.states_.push_back(y1);
        y = y1;
        k1 = k7;
        t = t_new;
        if (norm2(y) > 1e150) throw NonFinite("integrate: state blew up near t=" + format_double(t));
        // Keep the controller's suggestion rather than the truncated final step.
        if (!final_step) h = h_next;
        else h = std::max(h, h_next);
      } else {
        h /= std::min(1.0 / kMinShrink, fac11 / kSafety);
        last_rejected = true;
      }
    }
  }
  return traj;
}

}  // namespace clab
