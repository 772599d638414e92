#include "clab/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "clab/errors.hpp"
#include "clab/parallel.hpp"

namespace clab::counterexample {

namespace {

constexpr double kScanStep = 1e-3;
constexpr double kResidualTarget = 1e-12;
constexpr double kGesSlack = 1e-9;
constexpr double kGesGridMax = 50.0;
constexpr double kGesGridStep = 1e-3;
constexpr double kPolarTol = 1e-12;

// Bisection on a bracket with residual(lo) and residual(hi) of opposite sign.
double refine(double lo, double hi, double tol) {
  double rlo = radial_f_prime(lo);
  auto best = [&] { return std::abs(radial_f_prime(lo)) <= std::abs(radial_f_prime(hi)) ? lo : hi; };
  for (;;) {
    const bool narrow = hi - lo <= tol;
    if (narrow && std::abs(radial_f_prime(best())) <= kResidualTarget) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double rmid = radial_f_prime(mid);
    if (rmid == 0.0) return mid;
    if ((rmid < 0) == (rlo < 0)) {
      lo = mid;
      rlo = rmid;
    } else {
      hi = mid;
    }
  }
  return best();
}

}  // namespace

double radial_f(double r) { return -r + 0.5 * r * std::sin(r * r); }

double radial_f_prime(double r) {
  const double s = r * r;
  return 0.5 * std::sin(s) + s * std::cos(s) - 1.0;
}

double radial_f_second(double r) {
  const double s = r * r;
  return 3.0 * r * std::cos(s) - 2.0 * r * s * std::sin(s);
}

bool RStarCertificate::valid() const {
  return std::abs(first_order_residual) <= kResidualTarget && second_order_value < 0.0 &&
         f_at_rstar <= -0.5 * r_star;
}

Json to_json(const RStarCertificate& c) {
  Json j;
  j["r_star"] = c.r_star;
  j["first_order_residual"] = c.first_order_residual;
  j["second_order_value"] = c.second_order_value;
  j["f_at_rstar"] = c.f_at_rstar;
  return j;
}

RStarCertificate find_r_star(double a, double b, double tol) {
  if (!(a > 0.0) || !(b > a)) throw std::invalid_argument("find_r_star: need 0 < a < b");
  if (!(tol > 0.0)) throw std::invalid_argument("find_r_star: tol must be positive");

  double prev_r = a;
  double prev_res = radial_f_prime(a);
  for (std::size_t k = 1;; ++k) {
    const double r = std::min(b, a + static_cast<double>(k) * kScanStep);
    const double res = radial_f_prime(r);

    double root = std::nan("");
    if (prev_res == 0.0) {
      root = prev_r;
    } else if ((prev_res < 0) != (res < 0)) {
      root = res == 0.0 ? r : refine(prev_r, r, tol);
    }
    if (!std::isnan(root) && radial_f_second(root) < 0.0) {
      return {root, radial_f_prime(root), radial_f_second(root), radial_f(root)};
    }
    if (r >= b) break;
    prev_r = r;
    prev_res = res;
  }
  throw NoRootFound("find_r_star: no strict local maximum of f in [" + format_double(a) + ", " +
                    format_double(b) + "]");
}

VectorField planar_field() {
  auto eval = [](std::span<const double> x, std::span<const double> u) {
    const double rho = x[0] * x[0] + x[1] * x[1];
    const double s = std::sin(rho);
    return Vector{-x[0] + 0.5 * x[0] * s - x[1] + u[0], -x[1] + 0.5 * x[1] * s + x[0] + u[1]};
  };
  auto jac = [](std::span<const double> x, std::span<const double>) {
    const double rho = x[0] * x[0] + x[1] * x[1];
    const double s = std::sin(rho);
    const double c = std::cos(rho);
    return SquareMatrix{{-1.0 + 0.5 * s + x[0] * x[0] * c, -1.0 + x[0] * x[1] * c},
                        {1.0 + x[0] * x[1] * c, -1.0 + 0.5 * s + x[1] * x[1] * c}};
  };
  return VectorField(2, 2, eval, jac);
}

ForcedSystem build_counterexample(double r_star) {
  const double amplitude = -radial_f(r_star);
  InputSignal input = InputSignal::periodic(2 * std::numbers::pi, [amplitude](double t) {
    return Vector{amplitude * std::cos(t), amplitude * std::sin(t)};
  });
  return {planar_field(), std::move(input)};
}

double circle_orbit_residual(double orbit_radius, double forcing_radius, int sample_count) {
  if (sample_count < 8) throw std::invalid_argument("circle_orbit_residual: need at least 8 samples");
  const ForcedSystem sys = build_counterexample(forcing_radius);
  double worst = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    const double t = 2 * std::numbers::pi * k / sample_count;
    const Vector gamma{orbit_radius * std::cos(t), orbit_radius * std::sin(t)};
    const Vector tangent{-orbit_radius * std::sin(t), orbit_radius * std::cos(t)};
    const Vector rhs = sys.field(gamma, sys.input(t));
    worst = std::max(worst, distance2(rhs, tangent));
  }
  return worst;
}

Certificate verify_ges(std::span<const Vector> initial_conditions, double horizon, double rate,
                       const IntegratorConfig& config) {
  // Rates above 1/2 are accepted: the check then refutes instead of certifying.
  if (!(rate > 0.0)) throw std::invalid_argument("verify_ges: rate must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("verify_ges: horizon must be positive");

  const VectorField field = planar_field();
  const InputSignal zero = InputSignal::constant({0.0, 0.0});

  struct Worst {
    double excess;
    double t;
  };
  const auto per_ic = parallel_map(initial_conditions.size(), [&](std::size_t i) {
    const Vector& x0 = initial_conditions[i];
    const double n0 = norm2(x0);
    Worst w{-std::numeric_limits<double>::infinity(), 0.0};
    if (n0 == 0.0) return Worst{0.0, 0.0};
    const Trajectory tr = integrate(field, zero, x0, {0.0, horizon}, config);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double t = tr.times()[k];
      const double bound = std::exp(-rate * t) * n0 * (1.0 + kGesSlack);
      const double excess = norm2(tr.states()[k]) - bound;
      if (excess > w.excess) w = {excess, t};
    }
    return w;
  });

  Certificate cert;
  cert.grid = GridSpec::uniform_1d(0.0, kGesGridMax, static_cast<std::size_t>(kGesGridMax / kGesGridStep) + 1);
  for (std::size_t i = 0; i < per_ic.size(); ++i) {
    if (!cert.witness || per_ic[i].excess > cert.margin) {
      cert.margin = per_ic[i].excess;
      cert.witness = Witness{initial_conditions[i], {0.0, 0.0}, std::nullopt, per_ic[i].t};
    }
  }

  // Generator-level bound f(r) <= -rate * r. Rounding in f is O(eps * r).
  double grid_worst = -std::numeric_limits<double>::infinity();
  double grid_arg = 0.0;
  for (std::size_t k = 0; k < cert.grid.total(); ++k) {
    const double r = cert.grid.point(k)[0];
    const double v = radial_f(r) + rate * r - 1e-14 * std::max(1.0, r);
    if (v > grid_worst) {
      grid_worst = v;
      grid_arg = r;
    }
  }
  if (!cert.witness || grid_worst > cert.margin) {
    cert.margin = grid_worst;
    cert.witness = Witness{{grid_arg}, {0.0, 0.0}, std::nullopt, std::nullopt};
  }
  cert.holds = cert.margin <= 0.0;
  cert.note = "trajectory bound over " + std::to_string(initial_conditions.size()) +
              " initial conditions on [0, " + format_double(horizon) + "], generator bound on r grid";
  return cert;
}

std::vector<Vector> sample_disk(std::size_t count, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = radius * std::sqrt(unit(rng));
    const double th = 2 * std::numbers::pi * unit(rng);
    out.push_back({r * std::cos(th), r * std::sin(th)});
  }
  return out;
}

double radial_rate(double r, double theta, double t, double r_star) {
  if (!(r > 0.0)) throw std::invalid_argument("radial_rate: r must be positive");
  return -r * r + 0.5 * r * r * std::sin(r * r) - r * std::cos(t - theta) * radial_f(r_star);
}

double worst_case_radial_rate(double r, double r_star) {
  if (!(r > 0.0)) throw std::invalid_argument("worst_case_radial_rate: r must be positive");
  return r * (radial_f(r) - radial_f(r_star));
}

Certificate polar_equivalence_check(std::span<const std::array<double, 2>> grid) {
  for (const auto& p : grid)
    if (!(p[0] > 0.0)) throw std::invalid_argument("polar_equivalence_check: r must be positive");

  const VectorField field = planar_field();
  const Vector zero{0.0, 0.0};
  Certificate cert;
  cert.margin = 0.0;
  for (const auto& [r, th] : grid) {
    const Vector x{r * std::cos(th), r * std::sin(th)};
    const Vector dx = field(x, zero);
    const double rdot = (x[0] * dx[0] + x[1] * dx[1]) / r;
    const double thdot = (x[0] * dx[1] - x[1] * dx[0]) / (r * r);
    const double mismatch = std::max(std::abs(rdot - radial_f(r)), std::abs(thdot - 1.0));
    if (!cert.witness || mismatch > cert.margin) {
      cert.margin = mismatch;
      cert.witness = Witness{{r, th}, zero, std::nullopt, std::nullopt};
    }
  }
  cert.holds = cert.margin <= kPolarTol;
  cert.note = "max |(r', theta') - (f(r), 1)| over " + std::to_string(grid.size()) + " polar points";
  return cert;
}

}  // namespace clab::counterexample
