#include "clab/certificate.hpp"

#include <stdexcept>

namespace clab {

void GridSpec::validate() const {
  if (lo.size() != hi.size() || lo.size() != counts.size() || lo.empty())
    throw std::invalid_argument("GridSpec: lo, hi and counts must have the same non-zero length");
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (counts[k] == 0) throw std::invalid_argument("GridSpec: zero count");
    if (!(lo[k] <= hi[k])) throw std::invalid_argument("GridSpec: lo > hi");
  }
}

std::size_t GridSpec::total() const {
  std::size_t n = 1;
  for (std::size_t c : counts) n *= c;
  return n;
}

double GridSpec::spacing(std::size_t axis) const {
  return counts[axis] > 1 ? (hi[axis] - lo[axis]) / static_cast<double>(counts[axis] - 1) : 0.0;
}

Vector GridSpec::point(std::size_t flat_index) const {
  Vector p(lo.size());
  for (std::size_t k = lo.size(); k-- > 0;) {
    const std::size_t i = flat_index % counts[k];
    flat_index /= counts[k];
    if (counts[k] == 1) {
      p[k] = lo[k];
    } else if (i + 1 == counts[k]) {
      p[k] = hi[k];
    } else {
      p[k] = lo[k] + static_cast<double>(i) * spacing(k);
    }
  }
  return p;
}

std::vector<ViolationRun> violation_runs(const GridSpec& grid, std::span<const double> values) {
  std::vector<ViolationRun> runs;
  bool open = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) {
      open = false;
      continue;
    }
    if (!open) {
      runs.push_back({grid.point(i), grid.point(i), values[i], grid.point(i)});
      open = true;
    }
    ViolationRun& r = runs.back();
    r.to = grid.point(i);
    if (values[i] > r.peak) {
      r.peak = values[i];
      r.peak_at = r.to;
    }
  }
  return runs;
}

Json to_json(const Witness& w) {
  Json j;
  j["x"] = json_array(w.x);
  j["c"] = json_array(w.c);
  if (w.z) j["z"] = json_array(*w.z);
  if (w.t) j["t"] = *w.t;
  return j;
}

Json to_json(const GridSpec& g) {
  Json j;
  j["lo"] = json_array(g.lo);
  j["hi"] = json_array(g.hi);
  j["counts"] = g.counts;
  return j;
}

Json to_json(const Certificate& c) {
  Json j;
  j["holds"] = c.holds;
  j["margin"] = c.margin;
  j["witness"] = c.witness ? to_json(*c.witness) : Json(nullptr);
  j["grid"] = to_json(c.grid);
  if (!c.violation_runs.empty()) {
    Json runs = Json::array();
    for (const auto& r : c.violation_runs) {
      Json jr;
      jr["from"] = json_array(r.from);
      jr["to"] = json_array(r.to);
      jr["peak"] = r.peak;
      jr["peak_at"] = json_array(r.peak_at);
      runs.push_back(std::move(jr));
    }
    j["violation_runs"] = std::move(runs);
  }
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

}  // namespace clab
