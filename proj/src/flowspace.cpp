#include "clab/flowspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "clab/errors.hpp"
#include "clab/parallel.hpp"

namespace clab::flowspace {

namespace {

constexpr double kFractionTol = 1e-12;
constexpr double kFactorTol = 1e-14;
constexpr double kPiecewiseSlack = 1e-6;
constexpr double kLimitSlack = 1e-4;
constexpr double kNoiseFactor = 100.0;
constexpr std::size_t kOversample = 8;

double pair_ratio(const FlowMap& flow, const PointPair& p, const Vector& fx, const Vector& fy, double factor) {
  const double before = flow.distance(p[0], p[1]);
  const double after = flow.distance(fx, fy);
  if (before == 0.0) return after == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return after / (factor * before);
}

struct PairOutcome {
  Vector fx;
  Vector fy;
  double ratio;
};

std::vector<PairOutcome> run_pairs(const FlowMap& flow, const InputSignal& u, double t1, double t2, double factor,
                                   std::span<const PointPair> pairs) {
  return parallel_map(pairs.size(), [&](std::size_t i) {
    Vector fx = flow.apply(u, t1, t2, pairs[i][0]);
    Vector fy = flow.apply(u, t1, t2, pairs[i][1]);
    const double r = pair_ratio(flow, pairs[i], fx, fy, factor);
    return PairOutcome{std::move(fx), std::move(fy), r};
  });
}

std::size_t worst_index(const std::vector<PairOutcome>& out) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].ratio > out[arg].ratio) arg = i;
  return arg;
}

GridSpec box_grid(const Box& box, std::size_t pieces) { return {box.lo, box.hi, std::vector<std::size_t>(box.lo.size(), pieces)}; }

void check_pairs(std::span<const PointPair> pairs, std::size_t n) {
  if (pairs.empty()) throw std::invalid_argument("flowspace: no point pairs");
  for (const auto& p : pairs)
    if (p[0].size() != n || p[1].size() != n) throw DimensionMismatch("flowspace: point pair dimension");
}

}  // namespace

Distance euclidean_distance() {
  return [](std::span<const double> a, std::span<const double> b) { return distance2(a, b); };
}

Distance weighted_distance(const SquareMatrix& m) {
  if (!m.is_symmetric()) throw NonSymmetric("weighted_distance: matrix is not symmetric");
  if (!(symmetric_eigenvalues(m).front() > 0.0)) throw std::invalid_argument("weighted_distance: matrix is not positive definite");
  return [m](std::span<const double> a, std::span<const double> b) {
    if (a.size() != m.dim() || b.size() != m.dim()) throw DimensionMismatch("weighted_distance: dimension");
    Vector d(a.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = a[k] - b[k];
    return std::sqrt(std::max(0.0, m.quadratic_form(d)));
  };
}

FlowMap::FlowMap(VectorField field, IntegratorConfig config, Distance distance)
    : field_(std::move(field)), config_(config), distance_(std::move(distance)) {
  config_.validate();
  if (!distance_) throw std::invalid_argument("FlowMap: distance is empty");
}

Vector FlowMap::apply(const InputSignal& signal, double t1, double t2, std::span<const double> x) const {
  if (!(t2 >= t1)) throw std::invalid_argument("FlowMap::apply: need t1 <= t2");
  if (t2 == t1) return Vector(x.begin(), x.end());
  return integrate(field_, signal, x, {t1, t2}, config_).final_state();
}

FlowMap flow_from_field(VectorField field, IntegratorConfig config, Distance distance) {
  return FlowMap(std::move(field), config, std::move(distance));
}

void Box::validate() const {
  if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("Box: lo and hi must have the same non-zero size");
  for (std::size_t k = 0; k < lo.size(); ++k)
    if (!(lo[k] <= hi[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k]))
      throw std::invalid_argument("Box: need finite lo <= hi");
}

bool Box::contains(std::span<const double> v) const {
  if (v.size() != lo.size()) return false;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (!(v[k] >= lo[k] && v[k] <= hi[k])) return false;
  return true;
}

void PiecewiseSchedule::validate() const {
  if (values.empty() || values.size() != fractions.size())
    throw std::invalid_argument("PiecewiseSchedule: need one fraction per value");
  if (!(t1 < t2)) throw std::invalid_argument("PiecewiseSchedule: need t1 < t2");
  for (const auto& v : values)
    if (v.size() != values.front().size()) throw DimensionMismatch("PiecewiseSchedule: values differ in dimension");
  double sum = 0.0;
  for (double a : fractions) {
    if (!(a > 0.0)) throw std::invalid_argument("PiecewiseSchedule: fractions must be positive");
    sum += a;
  }
  if (std::abs(sum - 1.0) > kFractionTol) throw std::invalid_argument("PiecewiseSchedule: fractions must sum to 1");
}

void PiecewiseSchedule::validate(const Box& box) const {
  validate();
  box.validate();
  for (const auto& v : values)
    if (!box.contains(v)) throw std::invalid_argument("PiecewiseSchedule: value outside the input box");
}

InputSignal PiecewiseSchedule::to_signal() const {
  validate();
  std::vector<double> breaks;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < fractions.size(); ++i) {
    acc += fractions[i];
    breaks.push_back(t1 + acc * (t2 - t1));
  }
  return InputSignal::piecewise_constant(std::move(breaks), values);
}

double schedule_contraction_factor(double lambda, const PiecewiseSchedule& schedule) {
  if (!(lambda < 0.0)) throw std::invalid_argument("schedule_contraction_factor: lambda must be negative");
  schedule.validate();
  const double span = schedule.t2 - schedule.t1;
  double product = 1.0;
  for (double a : schedule.fractions) product *= std::exp(lambda * a * span);
  const double whole = std::exp(lambda * span);
  if (std::abs(product - whole) > kFactorTol * whole)
    throw Error("schedule_contraction_factor: product deviates from e^{lambda (t2 - t1)}");
  return product;
}

Certificate check_piecewise_contraction(const FlowMap& flow, const Box& box, double lambda,
                                        const PiecewiseSchedule& schedule, std::span<const PointPair> pairs) {
  schedule.validate(box);
  check_pairs(pairs, flow.field().state_dim());
  const double factor = std::exp(lambda * (schedule.t2 - schedule.t1));
  const auto out = run_pairs(flow, schedule.to_signal(), schedule.t1, schedule.t2, factor, pairs);
  const std::size_t arg = worst_index(out);

  Certificate cert;
  cert.grid = box_grid(box, schedule.values.size());
  cert.margin = out[arg].ratio;
  cert.holds = cert.margin <= 1.0 + kPiecewiseSlack;
  cert.witness = Witness{pairs[arg][0], {}, pairs[arg][1], schedule.t2};
  cert.note = "worst ratio d(phi x, phi y) / (e^{lambda T} d(x, y)) over " + std::to_string(pairs.size()) +
              " pairs, " + std::to_string(schedule.values.size()) + " pieces";
  return cert;
}

LimitContraction check_limit_contraction(const FlowMap& flow, const Box& box, double lambda,
                                         const InputSignal& target, double t1, double t2,
                                         std::size_t refinement_levels, std::span<const PointPair> pairs) {
  box.validate();
  if (!(t1 < t2)) throw std::invalid_argument("check_limit_contraction: need t1 < t2");
  if (target.dim() != box.lo.size()) throw DimensionMismatch("check_limit_contraction: signal and box dimensions differ");
  check_pairs(pairs, flow.field().state_dim());
  if (refinement_levels > 20) throw std::invalid_argument("check_limit_contraction: at most 20 refinement levels");

  // Values must lie in the box before anything is integrated.
  const std::size_t samples = (std::size_t{1} << refinement_levels) * kOversample;
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = t1 + (t2 - t1) * static_cast<double>(k) / static_cast<double>(samples);
    if (!box.contains(target(t)) || (k > 0 && !box.contains(target.left_limit(t))))
      throw std::invalid_argument("check_limit_contraction: target signal leaves the input box at t = " + format_double(t));
  }
  for (double t : target.discontinuities(t1, t2))
    if (!box.contains(target(t)) || !box.contains(target.left_limit(t)))
      throw std::invalid_argument("check_limit_contraction: target signal leaves the input box at t = " + format_double(t));

  const double factor = std::exp(lambda * (t2 - t1));
  LimitContraction res;
  std::vector<PairOutcome> prev;
  double first_gap = 0.0;
  double noise = 0.0;
  bool levels_hold = true;

  for (std::size_t l = 0; l <= refinement_levels; ++l) {
    const std::size_t pieces = std::size_t{1} << l;
    PiecewiseSchedule sched;
    sched.t1 = t1;
    sched.t2 = t2;
    for (std::size_t i = 0; i < pieces; ++i) {
      const double mid = t1 + (t2 - t1) * (static_cast<double>(i) + 0.5) / static_cast<double>(pieces);
      sched.values.push_back(target(mid));
      sched.fractions.push_back(1.0 / static_cast<double>(pieces));
    }
    auto out = run_pairs(flow, sched.to_signal(), t1, t2, factor, pairs);

    LevelRecord rec;
    rec.level = l;
    rec.pieces = pieces;
    rec.worst_ratio = out[worst_index(out)].ratio;
    levels_hold = levels_hold && rec.worst_ratio <= 1.0 + kPiecewiseSlack;

    double scale = 1.0;
    for (const auto& o : out) scale = std::max({scale, norm2(o.fx), norm2(o.fy)});
    noise = std::max(noise, kNoiseFactor * (flow.config().rel_tol * scale + flow.config().abs_tol));

    if (l == 0) {
      rec.cauchy_gap = std::numeric_limits<double>::quiet_NaN();
      rec.gap_tolerance = std::numeric_limits<double>::quiet_NaN();
    } else {
      double gap = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i)
        gap = std::max({gap, distance2(out[i].fx, prev[i].fx), distance2(out[i].fy, prev[i].fy)});
      if (l == 1) first_gap = gap;
      rec.cauchy_gap = gap;
      rec.gap_tolerance = 2.0 * first_gap * std::ldexp(1.0, -static_cast<int>(l - 1)) + noise;
      if (!(gap <= rec.gap_tolerance)) {
        throw ApproximationNotConverging("check_limit_contraction: Cauchy gap " + format_double(gap) +
                                         " at level " + std::to_string(l) + " exceeds " +
                                         format_double(rec.gap_tolerance));
      }
    }
    res.levels.push_back(rec);
    prev = std::move(out);
  }

  const auto target_out = run_pairs(flow, target, t1, t2, factor, pairs);
  for (std::size_t i = 0; i < target_out.size(); ++i)
    res.approximation_error = std::max({res.approximation_error, distance2(target_out[i].fx, prev[i].fx),
                                        distance2(target_out[i].fy, prev[i].fy)});
  const double last_gap = refinement_levels == 0 ? 0.0 : res.levels.back().cauchy_gap;
  if (!(res.approximation_error <= 2.0 * last_gap + noise)) {
    throw ApproximationNotConverging("check_limit_contraction: finest approximant is " +
                                     format_double(res.approximation_error) + " from the target flow");
  }

  const std::size_t arg = worst_index(target_out);
  Certificate& cert = res.certificate;
  cert.grid = box_grid(box, std::size_t{1} << refinement_levels);
  cert.margin = target_out[arg].ratio;
  cert.holds = levels_hold && cert.margin <= 1.0 + kLimitSlack;
  cert.witness = Witness{pairs[arg][0], {}, pairs[arg][1], t2};
  cert.note = "target flow ratio with slack 1e-4 after " + std::to_string(refinement_levels + 1) +
              " dyadic midpoint approximants";
  return res;
}

Json to_json(const LimitContraction& r) {
  Json j = to_json(r.certificate);
  Json levels = Json::array();
  for (const auto& l : r.levels) {
    Json jl;
    jl["level"] = l.level;
    jl["pieces"] = l.pieces;
    jl["worst_ratio"] = l.worst_ratio;
    jl["cauchy_gap"] = l.level == 0 ? Json(nullptr) : Json(l.cauchy_gap);
    jl["gap_tolerance"] = l.level == 0 ? Json(nullptr) : Json(l.gap_tolerance);
    levels.push_back(std::move(jl));
  }
  j["levels"] = std::move(levels);
  j["approximation_error"] = r.approximation_error;
  return j;
}

}  // namespace clab::flowspace
