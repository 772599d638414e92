#include "clab/entrainment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "clab/counterexample.hpp"
#include "clab/errors.hpp"
#include "clab/parallel.hpp"

namespace clab::entrainment {

namespace {

constexpr double kAgreementFactor = 10.0;
constexpr double kDivergenceFactor = 2.0;
constexpr double kInnerScanStep = 1e-3;

Json vectors_json(std::span<const Vector> vs) {
  Json j = Json::array();
  for (const auto& v : vs) j.push_back(json_array(v));
  return j;
}

}  // namespace

Vector poincare_map(const VectorField& field, const InputSignal& input, std::span<const double> x0,
                    const IntegratorConfig& config) {
  if (!input.is_periodic()) throw std::invalid_argument("poincare_map: input must be periodic");
  return integrate(field, input, x0, {0.0, input.period()}, config).final_state();
}

std::string to_string(Status s) {
  switch (s) {
    case Status::kEntrains:
      return "entrains";
    case Status::kDiverges:
      return "diverges";
    case Status::kInconclusive:
      break;
  }
  return "inconclusive";
}

Json to_json(const EntrainmentVerdict& v) {
  Json j;
  j["status"] = to_string(v.status);
  j["tol"] = v.tol;
  j["iterations"] = v.iterates.empty() ? 0 : v.iterates.front().size() - 1;
  j["orbit_sample"] = v.orbit_sample ? json_array(*v.orbit_sample) : Json(nullptr);
  j["witness_pair"] = v.witness_pair ? vectors_json(*v.witness_pair) : Json(nullptr);
  Json its = Json::array();
  for (const auto& seq : v.iterates) its.push_back(vectors_json(seq));
  j["iterates"] = std::move(its);
  return j;
}

EntrainmentVerdict detect_entrainment(const VectorField& field, const InputSignal& input,
                                      std::span<const Vector> initial_set, std::size_t max_iterations, double tol,
                                      const IntegratorConfig& config) {
  if (initial_set.size() < 2) throw std::invalid_argument("detect_entrainment: need at least two initial conditions");
  if (!(tol > 0.0)) throw std::invalid_argument("detect_entrainment: tol must be positive");
  if (!input.is_periodic()) throw std::invalid_argument("detect_entrainment: input must be periodic");

  const std::size_t n = initial_set.size();
  EntrainmentVerdict v;
  v.tol = tol;
  for (const auto& x0 : initial_set) v.iterates.push_back({x0});

  std::vector<double> min_dist;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) min_dist.push_back(distance2(initial_set[a], initial_set[b]));

  for (std::size_t k = 1; k <= max_iterations; ++k) {
    const auto next = parallel_map(n, [&](std::size_t i) {
      return poincare_map(field, input, v.iterates[i].back(), config);
    });

    bool settled = true;
    for (std::size_t i = 0; i < n; ++i) {
      settled = settled && distance2(next[i], v.iterates[i].back()) < tol;
      v.iterates[i].push_back(next[i]);
    }

    std::size_t p = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b, ++p) {
        const double d = distance2(next[a], next[b]);
        settled = settled && d <= kAgreementFactor * tol;
        if (!v.witness_pair && min_dist[p] > 0.0 && d >= kDivergenceFactor * min_dist[p] &&
            d > kAgreementFactor * tol) {
          v.witness_pair = std::array<Vector, 2>{initial_set[a], initial_set[b]};
        }
        min_dist[p] = std::min(min_dist[p], d);
      }
    }

    if (v.witness_pair) {
      v.status = Status::kDiverges;
      return v;
    }
    if (settled) {
      Vector mean(next.front().size(), 0.0);
      for (const auto& x : next)
        for (std::size_t c = 0; c < x.size(); ++c) mean[c] += x[c] / static_cast<double>(n);
      v.status = Status::kEntrains;
      v.orbit_sample = std::move(mean);
      return v;
    }
  }
  v.status = Status::kInconclusive;
  return v;
}

double inner_radius(double r_star) {
  using counterexample::radial_f;
  if (!(r_star > 0.0)) throw std::invalid_argument("inner_radius: r_star must be positive");
  const double level = radial_f(r_star);
  double hi = r_star;
  double lo = r_star - kInnerScanStep;
  while (radial_f(lo) < level) {
    hi = lo;
    lo -= kInnerScanStep;
    if (lo <= 0.0) throw NoRootFound("inner_radius: f stays below f(r_star) down to 0");
  }
  // f(lo) >= level > f(hi)
  for (int it = 0; it < 200 && hi - lo > 1e-15 * r_star; ++it) {
    const double mid = 0.5 * (lo + hi);
    (radial_f(mid) >= level ? lo : hi) = mid;
  }
  return hi;
}

DivergenceReport counterexample_divergence(double r_star, double delta, std::size_t n_periods,
                                           const IntegratorConfig& config) {
  using counterexample::radial_f;
  if (!(r_star > 0.0)) throw std::invalid_argument("counterexample_divergence: r_star must be positive");
  if (!(delta >= 0.0) || !(delta < r_star)) throw std::invalid_argument("counterexample_divergence: need 0 <= delta < r_star");
  if (n_periods == 0) throw std::invalid_argument("counterexample_divergence: need at least one period");

  const counterexample::ForcedSystem sys = counterexample::build_counterexample(r_star);
  const double period = 2 * std::numbers::pi;

  DivergenceReport rep;
  rep.r_star = r_star;
  rep.delta = delta;
  rep.n_periods = n_periods;

  Vector x{r_star - delta, 0.0};
  rep.t.push_back(0.0);
  rep.x.push_back(x);
  rep.radius.push_back(norm2(x));
  for (std::size_t k = 1; k <= n_periods; ++k) {
    const double t0 = period * static_cast<double>(k - 1);
    const double t1 = period * static_cast<double>(k);
    const Trajectory tr = integrate(sys.field, sys.input, x, {t0, t1}, config);
    for (std::size_t s = 1; s < tr.size(); ++s) {
      rep.t.push_back(tr.times()[s]);
      rep.x.push_back(tr.states()[s]);
    }
    x = tr.final_state();
    rep.radius.push_back(norm2(x));
  }
  for (double r : rep.radius) rep.distance.push_back(std::abs(r - r_star));

  const double level = radial_f(r_star);
  while (rep.neighbourhood_stretch < rep.radius.size()) {
    const double r = rep.radius[rep.neighbourhood_stretch];
    if (!(r < r_star && radial_f(r) < level)) break;
    ++rep.neighbourhood_stretch;
  }
  rep.nondecreasing_in_stretch = rep.neighbourhood_stretch >= 2;
  for (std::size_t k = 0; k + 1 < rep.neighbourhood_stretch; ++k)
    rep.nondecreasing_in_stretch = rep.nondecreasing_in_stretch && rep.distance[k + 1] >= rep.distance[k];
  rep.final_exceeds_initial = rep.distance.back() > rep.distance.front();
  return rep;
}

Json to_json(const DivergenceReport& r) {
  Json j;
  j["r_star"] = r.r_star;
  j["delta"] = r.delta;
  j["n_periods"] = r.n_periods;
  j["distance"] = json_array(r.distance);
  j["radius"] = json_array(r.radius);
  j["neighbourhood_stretch"] = r.neighbourhood_stretch;
  j["nondecreasing_in_stretch"] = r.nondecreasing_in_stretch;
  j["final_exceeds_initial"] = r.final_exceeds_initial;
  j["diverges"] = r.diverges();
  return j;
}

void write_csv(const DivergenceReport& r, std::ostream& out) {
  out << "t,x,y,r\n";
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    out << format_double(r.t[k]) << ',' << format_double(r.x[k][0]) << ',' << format_double(r.x[k][1]) << ','
        << format_double(norm2(r.x[k])) << '\n';
  }
}

}  // namespace clab::entrainment
