#include "clab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "clab/constant_metric.hpp"
#include "clab/contraction.hpp"
#include "clab/counterexample.hpp"
#include "clab/entrainment.hpp"
#include "clab/errors.hpp"
#include "clab/flowspace.hpp"

namespace clab::cli {

namespace {

namespace fs = std::filesystem;
using std::numbers::pi;

struct Outcome {
  Json parameters;
  Json result;
  bool confirmed = false;
  std::vector<std::pair<std::string, std::string>> csv;
};

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ':') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

template <class T>
T parse_value(std::string_view s, const std::string& whole) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size())
    throw UsageError("cannot parse '" + whole + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw UsageError("non-finite value in '" + whole + "'");
  return v;
}

VectorField forced_decay() {
  return VectorField(
      1, 1, [](std::span<const double> x, std::span<const double> u) { return Vector{-x[0] + u[0]}; },
      [](std::span<const double>, std::span<const double>) { return SquareMatrix{{-1.0}}; });
}

VectorField cubic_decay() {
  return VectorField(
      1, 1,
      [](std::span<const double> x, std::span<const double> u) { return Vector{-x[0] * x[0] * x[0] - x[0] + u[0]}; },
      [](std::span<const double> x, std::span<const double>) { return SquareMatrix{{-3 * x[0] * x[0] - 1}}; });
}

InputSignal sine_input() {
  return InputSignal::periodic(2 * pi, [](double t) { return Vector{std::sin(t)}; });
}

double r_star_for(const ExperimentConfig& c, Json& params) {
  const std::array<double, 2> iv = c.interval.value_or(std::array<double, 2>{0.1, 4.0});
  const double tol = c.tol.value_or(1e-13);
  params["interval"] = json_array(iv);
  params["tol"] = tol;
  const auto cert = counterexample::find_r_star(iv[0], iv[1], tol);
  if (!cert.valid()) throw Error("r* certificate does not satisfy its invariants");
  return cert.r_star;
}

GridSpec single_axis(const ExperimentConfig& c, const GridSpec& fallback) {
  if (c.grid.size() > 1) throw UsageError(c.experiment + " takes a single --grid axis");
  return c.grid.empty() ? fallback : c.grid.front();
}

std::uint64_t seed_of(const ExperimentConfig& c) { return c.seed.value_or(0); }

std::vector<Vector> ball_samples(std::size_t count, double radius, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cube(-radius, radius);
  std::vector<Vector> out{Vector(n, 0.0)};
  while (out.size() < count) {
    Vector v(n);
    for (double& x : v) x = cube(rng);
    if (norm2(v) <= radius) out.push_back(std::move(v));
  }
  return out;
}

flowspace::PiecewiseSchedule random_schedule(std::mt19937_64& rng, std::size_t pieces, double t1, double t2) {
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  flowspace::PiecewiseSchedule s;
  s.t1 = t1;
  s.t2 = t2;
  double sum = 0.0;
  for (std::size_t i = 0; i < pieces; ++i) {
    s.values.push_back({value(rng)});
    s.fractions.push_back(weight(rng));
    sum += s.fractions.back();
  }
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < pieces; ++i) head += (s.fractions[i] /= sum);
  s.fractions.back() = 1.0 - head;
  return s;
}

std::vector<flowspace::PointPair> random_pairs(std::mt19937_64& rng, std::size_t count, double spread) {
  std::uniform_real_distribution<double> d(-spread, spread);
  std::vector<flowspace::PointPair> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back({Vector{d(rng)}, Vector{d(rng)}});
  return out;
}

Json run_json(const ViolationRun& r) {
  Json j;
  j["from"] = json_array(r.from);
  j["to"] = json_array(r.to);
  j["peak"] = r.peak;
  j["peak_at"] = json_array(r.peak_at);
  return j;
}

Outcome ges_check(const ExperimentConfig& c) {
  Outcome o;
  const double rate = c.rate.value_or(0.5);
  const double horizon = c.horizon.value_or(20.0);
  const std::uint64_t seed = seed_of(c);
  o.parameters["rate"] = rate;
  o.parameters["horizon"] = horizon;
  o.parameters["seed"] = seed;
  o.parameters["initial_conditions"] = 100;
  o.parameters["disk_radius"] = 10.0;
  const auto ics = counterexample::sample_disk(100, 10.0, seed);
  const Certificate cert = counterexample::verify_ges(ics, horizon, rate);
  o.result = to_json(cert);
  o.confirmed = cert.holds;
  return o;
}

Outcome circle_orbit(const ExperimentConfig& c) {
  Outcome o;
  const double r = r_star_for(c, o.parameters);
  constexpr int kSamples = 1000;
  constexpr double kOffset = 0.1;
  o.parameters["sample_count"] = kSamples;
  o.parameters["perturbation"] = kOffset;
  const double residual = counterexample::circle_orbit_residual(r, kSamples);
  const double perturbed = counterexample::circle_orbit_residual(r + kOffset, r, kSamples);
  o.result["r_star"] = r;
  o.result["residual"] = residual;
  o.result["perturbed_residual"] = perturbed;
  o.confirmed = residual <= 1e-10 && perturbed > 1e-3;
  return o;
}

Outcome divergence(const ExperimentConfig& c) {
  Outcome o;
  const double r = r_star_for(c, o.parameters);
  const std::size_t periods = c.periods.value_or(10);
  if (periods < 3) throw std::invalid_argument("divergence: --periods must be at least 3");
  constexpr double kDelta = 0.1;
  constexpr std::size_t kIterations = 50;
  constexpr double kTol = 1e-8;
  o.parameters["periods"] = periods;
  o.parameters["delta"] = kDelta;
  o.parameters["max_iterations"] = kIterations;
  o.parameters["entrainment_tol"] = kTol;

  const auto perturbed = entrainment::counterexample_divergence(r, kDelta, periods);
  const auto orbit = entrainment::counterexample_divergence(r, 0.0, periods);
  const auto& d = perturbed.distance;
  const bool increasing = d[0] < d[1] && d[1] < d[2] && d[2] < d[3];

  const auto sys = counterexample::build_counterexample(r);
  const std::vector<Vector> ics{{r, 0.0}, {r - kDelta, 0.0}};
  const auto verdict = entrainment::detect_entrainment(sys.field, sys.input, ics, kIterations, kTol);

  o.result["perturbed"] = to_json(perturbed);
  o.result["orbit"] = to_json(orbit);
  o.result["strictly_increasing_first_3_periods"] = increasing;
  o.result["verdict"] = to_json(verdict);
  o.confirmed = perturbed.diverges() && increasing && verdict.status == entrainment::Status::kDiverges;

  if (c.format != Format::kJson) {
    std::ostringstream a;
    std::ostringstream b;
    entrainment::write_csv(orbit, a);
    entrainment::write_csv(perturbed, b);
    o.csv.emplace_back("divergence_orbit.csv", a.str());
    o.csv.emplace_back("divergence_perturbed.csv", b.str());
  }
  return o;
}

Outcome entrainment_linear(const ExperimentConfig& c) {
  Outcome o;
  const double tol = c.tol.value_or(1e-8);
  const std::size_t iterations = c.periods.value_or(50);
  const IntegratorConfig cfg{1e-12, 1e-14};
  o.parameters["tol"] = tol;
  o.parameters["max_iterations"] = iterations;
  o.parameters["rel_tol"] = cfg.rel_tol;
  o.parameters["abs_tol"] = cfg.abs_tol;
  const std::vector<Vector> ics{{-10.0}, {0.0}, {10.0}};
  const auto verdict = entrainment::detect_entrainment(forced_decay(), sine_input(), ics, iterations, tol, cfg);
  const double limit = verdict.orbit_sample ? (*verdict.orbit_sample)[0] : std::nan("");
  const double error = std::abs(limit + 0.5);
  o.result["verdict"] = to_json(verdict);
  o.result["expected_limit"] = -0.5;
  o.result["limit_error"] = error;
  o.confirmed = verdict.status == entrainment::Status::kEntrains && error <= tol;

  if (c.format != Format::kJson) {
    const double t_end = 2 * pi * static_cast<double>(verdict.iterates.front().size() - 1);
    const Trajectory traj = integrate(forced_decay(), sine_input(), Vector{10.0}, {0.0, t_end}, cfg);
    std::ostringstream s;
    traj.write_csv(s);
    o.csv.emplace_back("entrainment-linear_trajectory.csv", s.str());
  }
  return o;
}

Outcome metric_certify(const ExperimentConfig& c) {
  Outcome o;
  const GridSpec grid = single_axis(c, GridSpec::uniform_1d(-20, 20, 40001));
  grid.validate();
  if (grid.dim() != 1) throw UsageError("metric-certify needs a one-dimensional grid");
  constexpr double kBeta = 1.0 / 3;
  o.parameters["grid"] = to_json(grid);
  o.parameters["beta"] = kBeta;
  o.parameters["c"] = 0.0;
  const auto field = contraction::scalar_example_field();
  const auto metric = contraction::scalar_example_metric();
  const Vector c0{0.0};
  const Certificate cert = contraction::check_contraction_region(field, metric, grid, kBeta, c0);

  double worst = 0.0;
  for (std::size_t i = 0; i < grid.total(); ++i) {
    const Vector x = grid.point(i);
    const double cm = contraction::contraction_matrix(field, metric, x, c0)(0, 0);
    const double target = 4.0 / (std::sin(x[0] * x[0]) - 2.0);
    worst = std::max(worst, std::abs(cm - target) / std::abs(target));
  }
  o.result["certificate"] = to_json(cert);
  o.result["identity_max_relative_error"] = worst;
  o.confirmed = cert.holds && worst <= 1e-9;
  return o;
}

Outcome metric_violate(const ExperimentConfig& c) {
  Outcome o;
  const GridSpec grid = single_axis(c, GridSpec::uniform_1d(-20, 20, 40001));
  grid.validate();
  if (grid.dim() != 1) throw UsageError("metric-violate needs a one-dimensional grid");
  constexpr double kBeta = 1.0 / 3;
  const double c_value = 27.0 / 16;
  const double x_target = 4 * std::sqrt(2 * pi);
  o.parameters["grid"] = to_json(grid);
  o.parameters["beta"] = kBeta;
  o.parameters["c"] = c_value;
  o.parameters["x"] = x_target;

  const auto field = contraction::scalar_example_field();
  const auto metric = contraction::scalar_example_metric();
  const Vector cv{c_value};
  const Certificate cert = contraction::check_contraction_region(field, metric, grid, kBeta, cv);
  const double value = contraction::contraction_matrix(field, metric, Vector{x_target}, cv)(0, 0);
  const double closed = -2 + 13.5 * std::sqrt(2 * pi);
  const double rel = std::abs(value - closed) / std::abs(closed);

  const double h = grid.spacing(0);
  const auto hit = std::find_if(cert.violation_runs.begin(), cert.violation_runs.end(), [&](const ViolationRun& r) {
    return r.from[0] - h <= x_target && x_target <= r.to[0] + h;
  });
  o.result["certificate"] = to_json(cert);
  o.result["value"] = value;
  o.result["closed_form"] = closed;
  o.result["relative_error"] = rel;
  o.result["run_at_x"] = hit != cert.violation_runs.end() ? run_json(*hit) : Json(nullptr);

  // Grid point nearest to x and its lambda_max(contraction matrix + beta M).
  const double pos = std::round((x_target - grid.lo[0]) / h);
  const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(grid.total() - 1)));
  const Vector nearest = grid.point(idx);
  const double nearest_value = contraction::contraction_matrix(field, metric, nearest, cv)(0, 0) +
                               kBeta * contraction::scalar_metric(nearest[0]);
  const bool near = std::abs(nearest[0] - x_target) <= h && nearest_value > 0;
  o.result["nearest_grid_witness"]["x"] = nearest[0];
  o.result["nearest_grid_witness"]["value"] = nearest_value;
  o.confirmed = !cert.holds && value > 0 && rel <= 1e-9 && hit != cert.violation_runs.end() && near;
  return o;
}

Outcome uniform_contraction(const ExperimentConfig&) {
  Outcome o;
  const GridSpec lin_box = GridSpec::uniform_1d(-5, 5, 11);
  const GridSpec lin_region = GridSpec::uniform_1d(-5, 5, 101);
  const GridSpec scalar_box = GridSpec::uniform_1d(-2, 2, 17);
  const GridSpec scalar_region = GridSpec::uniform_1d(-20, 20, 40001);
  o.parameters["linear"]["input_box"] = to_json(lin_box);
  o.parameters["linear"]["region"] = to_json(lin_region);
  o.parameters["linear"]["beta"] = 2.0;
  o.parameters["scalar"]["input_box"] = to_json(scalar_box);
  o.parameters["scalar"]["region"] = to_json(scalar_region);
  o.parameters["scalar"]["beta"] = 1.0 / 3;

  const Certificate lin = contraction::check_uniform_contraction(
      forced_decay(), contraction::RiemannianMetric::constant(SquareMatrix{{1.0}}), lin_box, lin_region, 2.0);
  const Certificate scalar =
      contraction::check_uniform_contraction(contraction::scalar_example_field(), contraction::scalar_example_metric(),
                                             scalar_box, scalar_region, 1.0 / 3);
  o.result["linear"] = to_json(lin);
  o.result["scalar"] = to_json(scalar);
  o.confirmed = lin.holds && !scalar.holds;
  return o;
}

Outcome bounded_metric(const ExperimentConfig&) {
  Outcome o;
  constexpr double kBound = 1.0;
  constexpr double kBeta = 1.0;
  o.parameters["bound"] = kBound;
  o.parameters["beta"] = kBeta;
  const auto param = contraction::bounded_metric_m_parameter(kBound, kBeta);
  const double reach = 10 * std::sqrt(param.m);
  const GridSpec box = GridSpec::uniform_1d(-kBound, kBound, 21);
  const GridSpec region = GridSpec::uniform_1d(-reach, reach, 20001);
  const Certificate uniform =
      contraction::check_uniform_contraction(forced_decay(), contraction::bounded_metric(param.m), box, region, kBeta);
  o.result["m"] = param.m;
  o.result["parameter_certificate"] = to_json(param.certificate);
  o.result["uniform"] = to_json(uniform);
  o.confirmed = param.certificate.holds && uniform.holds;
  return o;
}

Outcome thm3(const constant_metric::ExampleSystem& sys, double rho, std::uint64_t seed) {
  Outcome o;
  constexpr double kRadius = 0.25;
  constexpr std::size_t kSamples = 8;
  o.parameters["rho"] = rho;
  o.parameters["seed"] = seed;
  o.parameters["sample_radius"] = kRadius;
  o.parameters["sample_count"] = kSamples;
  const auto xs = ball_samples(kSamples, kRadius, sys.field.state_dim(), seed);
  const auto report = constant_metric::check_thm3_conditions(sys.field, sys.family, xs, rho);
  o.result = to_json(report);
  o.confirmed = report.holds();
  return o;
}

Outcome thm3_example1(const ExperimentConfig& c) {
  return thm3(constant_metric::example_3d_system(), constant_metric::example1_inradius() / 2, seed_of(c));
}

Outcome thm3_example2(const ExperimentConfig& c) {
  return thm3(constant_metric::additive_example(3), 1.0 / 6, seed_of(c));
}

Outcome flow_compose(const ExperimentConfig& c) {
  Outcome o;
  const std::uint64_t seed = seed_of(c);
  o.parameters["seed"] = seed;
  o.parameters["lambda"] = -1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto cubic = flowspace::flow_from_field(cubic_decay());
  double composition = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const double t1 = unit(rng);
    const double t2 = t1 + 0.1 + unit(rng);
    const double t3 = t2 + 0.1 + unit(rng);
    const InputSignal f = random_schedule(rng, 3, t1, t2).to_signal();
    const InputSignal g = random_schedule(rng, 2, t2, t3).to_signal();
    const Vector x{2 * unit(rng) - 1};
    const Vector lhs = cubic.apply(g, t2, t3, cubic.apply(f, t1, t2, x));
    const Vector rhs = cubic.apply(concat(f, g, t2), t1, t3, x);
    composition = std::max(composition, distance2(lhs, rhs));
  }

  double factor = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double lambda = -0.1 - 2.9 * unit(rng);
    const auto s = random_schedule(rng, 1 + trial % 8, 0.0, 0.5 + 4.5 * unit(rng));
    const double whole = std::exp(lambda * (s.t2 - s.t1));
    factor = std::max(factor, std::abs(flowspace::schedule_contraction_factor(lambda, s) - whole) / whole);
  }

  const auto linear = flowspace::flow_from_field(forced_decay());
  const flowspace::Box box{{-1.0}, {1.0}};
  bool all_hold = true;
  double ratio_lo = std::numeric_limits<double>::infinity();
  double ratio_hi = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_schedule(rng, 1 + trial % 5, 0.0, 0.5 + 2.5 * unit(rng));
    const auto pairs = random_pairs(rng, 10, 3.0);
    const Certificate cert = flowspace::check_piecewise_contraction(linear, box, -1.0, s, pairs);
    all_hold = all_hold && cert.holds;
    // Every pair contracts by exactly e^{-(t2 - t1)} for this field.
    for (const auto& p : pairs) {
      const InputSignal u = s.to_signal();
      const double ratio = linear.distance(linear.apply(u, s.t1, s.t2, p[0]), linear.apply(u, s.t1, s.t2, p[1])) /
                           (std::exp(-(s.t2 - s.t1)) * linear.distance(p[0], p[1]));
      ratio_lo = std::min(ratio_lo, ratio);
      ratio_hi = std::max(ratio_hi, ratio);
    }
  }

  o.result["composition_max_error"] = composition;
  o.result["factor_max_relative_error"] = factor;
  o.result["piecewise_all_hold"] = all_hold;
  o.result["linear_ratio_min"] = ratio_lo;
  o.result["linear_ratio_max"] = ratio_hi;
  o.confirmed = composition <= 1e-7 && factor <= 1e-14 && all_hold && std::abs(ratio_lo - 1) <= 1e-6 &&
                std::abs(ratio_hi - 1) <= 1e-6;
  return o;
}

Outcome flow_limit(const ExperimentConfig& c) {
  Outcome o;
  const std::uint64_t seed = seed_of(c);
  constexpr std::size_t kLevels = 8;
  o.parameters["seed"] = seed;
  o.parameters["lambda"] = -1.0;
  o.parameters["levels"] = kLevels;
  o.parameters["t1"] = 0.0;
  o.parameters["t2"] = 2 * pi;
  std::mt19937_64 rng(seed);
  const auto pairs = random_pairs(rng, 10, 3.0);
  const InputSignal target =
      InputSignal::periodic(2 * pi, [](double t) { return Vector{std::clamp(std::sin(t), -1.0, 1.0)}; });
  const auto r = flowspace::check_limit_contraction(flowspace::flow_from_field(forced_decay()),
                                                    flowspace::Box{{-1.0}, {1.0}}, -1.0, target, 0.0, 2 * pi,
                                                    kLevels, pairs);
  o.result = to_json(r);
  o.confirmed = r.certificate.holds;
  return o;
}

using Runner = std::function<Outcome(const ExperimentConfig&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> table{
      {"ges-check", ges_check},
      {"circle-orbit", circle_orbit},
      {"divergence", divergence},
      {"entrainment-linear", entrainment_linear},
      {"metric-certify", metric_certify},
      {"metric-violate", metric_violate},
      {"uniform-contraction", uniform_contraction},
      {"bounded-metric", bounded_metric},
      {"thm3-example1", thm3_example1},
      {"thm3-example2", thm3_example2},
      {"flow-compose", flow_compose},
      {"flow-limit", flow_limit},
  };
  return table;
}

const ExperimentInfo& lookup(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return e;
  throw UsageError("unknown experiment '" + name + "'");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + path.string());
}

int report(const std::string& dir, std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    err << "report: cannot read directory " << dir << '\n';
    return kExitFailure;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  if (ec) {
    err << "report: cannot read directory " << dir << '\n';
    return kExitFailure;
  }
  std::sort(files.begin(), files.end());

  struct Row {
    std::string name;
    std::string claim;
    bool pass;
  };
  std::vector<Row> rows;
  for (const auto& path : files) {
    Json j;
    try {
      std::ifstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open");
      j = Json::parse(f);
    } catch (const std::exception& e) {
      err << "report: " << path.filename().string() << ": " << e.what() << '\n';
      return kExitFailure;
    }
    if (!j.is_object() || !j.contains("experiment") || !j["experiment"].is_string() || !j.contains("claim") ||
        !j["claim"].is_string() || !j.contains("confirmed") || !j["confirmed"].is_boolean()) {
      err << "report: " << path.filename().string() << ": not an experiment record\n";
      return kExitFailure;
    }
    rows.push_back({j["experiment"].get<std::string>(), j["claim"].get<std::string>(), j["confirmed"].get<bool>()});
  }

  std::size_t w_name = std::string_view("experiment").size();
  std::size_t w_claim = std::string_view("claim").size();
  for (const auto& r : rows) {
    w_name = std::max(w_name, r.name.size());
    w_claim = std::max(w_claim, r.claim.size());
  }
  auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
    out << a << std::string(w_name - a.size() + 2, ' ') << b << std::string(w_claim - b.size() + 2, ' ') << c << '\n';
  };
  line("experiment", "claim", "status");
  bool all = true;
  for (const auto& r : rows) {
    line(r.name, r.claim, r.pass ? "PASS" : "FAIL");
    all = all && r.pass;
  }
  return all ? kExitConfirmed : kExitRefuted;
}

}  // namespace

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> list{
      {"ges-check", "the unforced planar system is globally exponentially stable at rate 1/2",
       {"horizon", "rate", "seed"}, false},
      {"circle-orbit", "the circle of radius r* is a periodic solution under the rotating input",
       {"interval", "tol"}, false},
      {"divergence", "a trajectory started next to the forced orbit moves away from it", {"interval", "tol", "periods"},
       true},
      {"entrainment-linear", "x' = -x + sin t entrains to the periodic solution through -1/2", {"tol", "periods"}, true},
      {"metric-certify", "the scalar metric certifies contraction with beta = 1/3 at c = 0", {"grid"}, false},
      {"metric-violate", "the scalar metric fails at c = 27/16 near x = 4 sqrt(2 pi)", {"grid"}, false},
      {"uniform-contraction", "a constant metric is uniform over an input box and the scalar metric is not", {}, false},
      {"bounded-metric", "a bounded non-constant metric certifies x' = -x + u uniformly over |u| <= 1", {}, false},
      {"thm3-example1", "hull and vanishing-ratio conditions hold for x' = -x + Bu with four input directions",
       {"seed"}, false},
      {"thm3-example2", "hull and vanishing-ratio conditions hold for x' = -x + c over a simplex of inputs", {"seed"},
       false},
      {"flow-compose", "flow composition, schedule factor identity and piecewise contraction at rate -1", {"seed"},
       false},
      {"flow-limit", "contraction at rate -1 passes to the limit of piecewise-constant approximations", {"seed"},
       false},
  };
  return list;
}

std::array<double, 2> parse_interval(const std::string& text) {
  const auto parts = split(text);
  if (parts.size() != 2) throw UsageError("interval must look like a:b, got '" + text + "'");
  return {parse_value<double>(parts[0], text), parse_value<double>(parts[1], text)};
}

GridSpec parse_grid_axis(const std::string& text) {
  const auto parts = split(text);
  if (parts.size() != 3) throw UsageError("grid axis must look like lo:hi:count, got '" + text + "'");
  return GridSpec::uniform_1d(parse_value<double>(parts[0], text), parse_value<double>(parts[1], text),
                              parse_value<std::size_t>(parts[2], text));
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  const ExperimentInfo& info = lookup(config.experiment);
  const std::pair<const char*, bool> given[] = {
      {"interval", config.interval.has_value()}, {"tol", config.tol.has_value()},
      {"grid", !config.grid.empty()},            {"horizon", config.horizon.has_value()},
      {"periods", config.periods.has_value()},   {"rate", config.rate.has_value()},
      {"seed", config.seed.has_value()},
  };
  for (const auto& [flag, set] : given)
    if (set && std::find(info.flags.begin(), info.flags.end(), flag) == info.flags.end())
      throw UsageError("--" + std::string(flag) + " does not apply to " + info.name);
  if (config.format != Format::kJson && !info.writes_csv)
    throw UsageError(info.name + " has no CSV output");

  Outcome o = runners().at(info.name)(config);
  ExperimentOutput result;
  result.document["experiment"] = info.name;
  result.document["claim"] = info.claim;
  result.document["confirmed"] = o.confirmed;
  result.document["parameters"] = o.parameters.is_null() ? Json::object() : std::move(o.parameters);
  result.document["result"] = std::move(o.result);
  result.confirmed = o.confirmed;
  result.csv = std::move(o.csv);
  return result;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contraction analysis experiments", "contraction-lab"};
  app.require_subcommand(1);

  auto* find = app.add_subcommand("find-rstar", "Locate r* and print its certificate");
  std::string find_interval = "0.1:4";
  double find_tol = 1e-13;
  find->add_option("--interval", find_interval, "Search interval a:b")->capture_default_str();
  find->add_option("--tol", find_tol, "Bracket width")->capture_default_str();

  std::vector<std::string> names;
  for (const auto& e : experiments()) names.push_back(e.name);
  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  std::string name;
  std::string interval;
  double tol = 0.0;
  std::vector<std::string> grid;
  double horizon = 0.0;
  std::size_t periods = 0;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format = "json";
  run_cmd->add_option("experiment", name, "Experiment name")->required()->check(CLI::IsMember(names));
  auto* o_interval = run_cmd->add_option("--interval", interval, "r* search interval a:b");
  auto* o_tol = run_cmd->add_option("--tol", tol, "Tolerance");
  run_cmd->add_option("--grid", grid, "Grid axis lo:hi:count (repeatable)")->allow_extra_args(false);
  auto* o_horizon = run_cmd->add_option("--horizon", horizon, "Integration horizon");
  auto* o_periods = run_cmd->add_option("--periods", periods, "Number of periods");
  auto* o_rate = run_cmd->add_option("--rate", rate, "Exponential rate");
  auto* o_seed = run_cmd->add_option("--seed", seed, "Random seed");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--format", format, "json, csv or both")
      ->check(CLI::IsMember({"json", "csv", "both"}))
      ->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "Summarise the JSON records in a directory");
  std::string report_dir;
  report_cmd->add_option("dir", report_dir, "Directory of experiment records")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitConfirmed;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitConfirmed;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (find->parsed()) {
      const auto iv = parse_interval(find_interval);
      const auto cert = counterexample::find_r_star(iv[0], iv[1], find_tol);
      out << to_json_text(to_json(cert));
      return cert.valid() ? kExitConfirmed : kExitRefuted;
    }
    if (report_cmd->parsed()) return report(report_dir, out, err);

    ExperimentConfig cfg;
    cfg.experiment = name;
    if (o_interval->count() > 0) cfg.interval = parse_interval(interval);
    if (o_tol->count() > 0) cfg.tol = tol;
    for (const auto& g : grid) cfg.grid.push_back(parse_grid_axis(g));
    if (o_horizon->count() > 0) cfg.horizon = horizon;
    if (o_periods->count() > 0) cfg.periods = periods;
    if (o_rate->count() > 0) cfg.rate = rate;
    if (o_seed->count() > 0) cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.format = format == "csv" ? Format::kCsv : format == "both" ? Format::kBoth : Format::kJson;
    if (cfg.format != Format::kJson && cfg.out_dir.empty()) throw UsageError("--format " + format + " needs --out");

    const ExperimentOutput result = run_experiment(cfg);
    const std::string text = to_json_text(result.document);
    out << text;
    if (!cfg.out_dir.empty()) {
      const fs::path dir(cfg.out_dir);
      fs::create_directories(dir);
      if (cfg.format != Format::kCsv) write_file(dir / (cfg.experiment + ".json"), text);
      for (const auto& [file, contents] : result.csv) write_file(dir / file, contents);
    }
    return result.confirmed ? kExitConfirmed : kExitRefuted;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace clab::cli
