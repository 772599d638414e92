#pragma once

// Period maps of periodically forced systems, entrainment verdicts from
// return-map iterates, and the divergence run for the forced planar example.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clab/dynamics.hpp"
#include "clab/io.hpp"

namespace clab::entrainment {

/// x(T) from x(0) = x0, T the input period. The input must be periodic.
Vector poincare_map(const VectorField& field, const InputSignal& input, std::span<const double> x0,
                    const IntegratorConfig& config = {});

enum class Status { kEntrains, kDiverges, kInconclusive };

std::string to_string(Status s);

struct EntrainmentVerdict {
  Status status = Status::kInconclusive;
  /// Phase-0 point of the limit cycle: mean of the final iterates.
  std::optional<Vector> orbit_sample;
  /// Initial conditions whose iterates separated.
  std::optional<std::array<Vector, 2>> witness_pair;
  /// iterates[i][k] is the k-th return-map value from initial condition i (k = 0 is x0).
  std::vector<std::vector<Vector>> iterates;
  double tol = 0.0;
};

Json to_json(const EntrainmentVerdict& v);

/// Iterates the period map from every initial condition in lockstep.
/// Entrains once every successive difference is below tol and all current
/// iterates agree pairwise within 10 tol. Diverges once some pair's distance
/// is at least twice its smallest earlier value and above 10 tol.
/// Otherwise Inconclusive after max_iterations.
EntrainmentVerdict detect_entrainment(const VectorField& field, const InputSignal& input,
                                      std::span<const Vector> initial_set, std::size_t max_iterations, double tol,
                                      const IntegratorConfig& config = {});

/// Largest rho < r_star with f(rho) = f(r_star); on (rho, r_star) the radius
/// strictly decreases under the rotating forcing.
double inner_radius(double r_star);

struct DivergenceReport {
  double r_star = 0.0;
  double delta = 0.0;
  std::size_t n_periods = 0;
  /// d_k = | |x(2 pi k)| - r_star |, k = 0..n_periods
  std::vector<double> distance;
  std::vector<double> radius;
  /// Number of leading samples with f(r_k) < f(r_star), r_k < r_star.
  std::size_t neighbourhood_stretch = 0;
  bool nondecreasing_in_stretch = false;
  bool final_exceeds_initial = false;
  /// Accepted integrator states for plotting.
  std::vector<double> t;
  std::vector<Vector> x;

  bool diverges() const { return nondecreasing_in_stretch && final_exceeds_initial; }
};

Json to_json(const DivergenceReport& r);
/// Columns t,x,y,r.
void write_csv(const DivergenceReport& r, std::ostream& out);

/// Integrates the forced planar example from (r_star - delta, 0) one period at a time.
DivergenceReport counterexample_divergence(double r_star, double delta, std::size_t n_periods,
                                           const IntegratorConfig& config = {});

}  // namespace clab::entrainment
