#pragma once

// The planar system x' = -x + (x/2) sin(|x|^2) + J x + u, whose unforced
// radial dynamics r' = f(r) = -r + (r/2) sin(r^2) is globally exponentially
// stable, yet which has an unstable 2*pi-periodic orbit on the circle of
// radius r* under the rotating input u(t) = -f(r*) (cos t, sin t).

#include <array>
#include <cstdint>
#include <span>

#include "clab/certificate.hpp"
#include "clab/dynamics.hpp"

namespace clab::counterexample {

/// f(r) = -r + (r/2) sin(r^2)
double radial_f(double r);
/// f'(r) = sin(r^2)/2 + r^2 cos(r^2) - 1
double radial_f_prime(double r);
/// f''(r) = 3r cos(r^2) - 2r^3 sin(r^2)
double radial_f_second(double r);

struct RStarCertificate {
  double r_star;
  double first_order_residual;
  double second_order_value;
  double f_at_rstar;

  /// |residual| <= 1e-12, second-order value < 0, f(r*) <= -r*/2.
  bool valid() const;
};

Json to_json(const RStarCertificate& c);

/// Smallest strict local maximiser of f in [a, b]. Sign changes of f' are
/// bracketed on a 1e-3 scan from a and refined by bisection until the bracket
/// is narrower than tol and |f'| <= 1e-12 (or the bracket reaches one ulp).
/// Throws NoRootFound if no bracket yields f'' < 0.
RStarCertificate find_r_star(double a = 0.1, double b = 4.0, double tol = 1e-13);

struct ForcedSystem {
  VectorField field;
  InputSignal input;
};

/// Field with additive 2D input (analytic Jacobian) and the 2*pi-periodic
/// forcing that makes the circle of radius r_star an orbit.
ForcedSystem build_counterexample(double r_star);

/// The same field with input_dim 2; pair with a zero constant input for the unforced system.
VectorField planar_field();

/// max over t_k = 2*pi*k/samples of |RHS(gamma(t), u(t)) - gamma'(t)| with
/// gamma the circle of radius orbit_radius and u built from forcing_radius.
double circle_orbit_residual(double orbit_radius, double forcing_radius, int sample_count);
inline double circle_orbit_residual(double r_star, int sample_count) {
  return circle_orbit_residual(r_star, r_star, sample_count);
}

/// Checks |x(t)| <= e^{-rate t}|x(0)| (1 + 1e-9) at every accepted step of the
/// unforced flow from each initial condition, and f(r) + rate*r <= 0 on a
/// 1e-3 grid over [0, 50]. margin is the largest excess over either bound.
Certificate verify_ges(std::span<const Vector> initial_conditions, double horizon, double rate,
                       const IntegratorConfig& config = {});

/// Uniform samples from the disk of the given radius, seeded deterministically.
std::vector<Vector> sample_disk(std::size_t count, double radius, std::uint64_t seed);

/// (d/dt)(r^2)/2 in polar form: r f(r) - r cos(t - theta) f(r*).
double radial_rate(double r, double theta, double t, double r_star);
/// Maximum of radial_rate over the phase t - theta: r (f(r) - f(r*)).
double worst_case_radial_rate(double r, double r_star);

/// Compares the unforced Cartesian field, mapped to polar rates, with (f(r), 1)
/// at each (r, theta). Holds iff every mismatch is <= 1e-12.
Certificate polar_equivalence_check(std::span<const std::array<double, 2>> grid);

}  // namespace clab::counterexample
