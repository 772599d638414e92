#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clab/io.hpp"
#include "clab/linalg.hpp"

namespace clab {

/// Axis-aligned box sampled on a tensor grid. Axis k has counts[k] equally
/// spaced points from lo[k] to hi[k] inclusive; the last axis varies fastest.
struct GridSpec {
  Vector lo;
  Vector hi;
  std::vector<std::size_t> counts;

  static GridSpec uniform_1d(double lo, double hi, std::size_t count) { return {{lo}, {hi}, {count}}; }

  void validate() const;
  std::size_t dim() const { return lo.size(); }
  std::size_t total() const;
  double spacing(std::size_t axis) const;
  Vector point(std::size_t flat_index) const;
};

struct Witness {
  Vector x;
  Vector c;
  std::optional<Vector> z;
  std::optional<double> t;
};

/// Maximal run of consecutive violating grid points (consecutive in flat index order).
struct ViolationRun {
  Vector from;
  Vector to;
  double peak;
  Vector peak_at;
};

/// Verdict of a region or property check. margin is the worst observed value
/// of the checked quantity; witness is where it was attained.
struct Certificate {
  bool holds = true;
  double margin = -std::numeric_limits<double>::infinity();
  std::optional<Witness> witness;
  GridSpec grid;
  std::vector<ViolationRun> violation_runs;
  std::string note;
};

/// Maximal runs of flat indices with values[i] > 0, values indexed like grid.
std::vector<ViolationRun> violation_runs(const GridSpec& grid, std::span<const double> values);

Json to_json(const Witness& w);
Json to_json(const GridSpec& g);
Json to_json(const Certificate& c);

}  // namespace clab
