#pragma once

// Command-line front end: find-rstar, run <experiment> and report <dir>.
//
// Exit codes: 0 claim confirmed, 1 claim refuted, 2 numerical failure or
// unreadable outputs, 64 usage error.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clab/certificate.hpp"
#include "clab/io.hpp"

namespace clab::cli {

inline constexpr int kExitConfirmed = 0;
inline constexpr int kExitRefuted = 1;
inline constexpr int kExitFailure = 2;
inline constexpr int kExitUsage = 64;

enum class Format { kJson, kCsv, kBoth };

/// Thrown for flags that are malformed or do not apply to the chosen experiment.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string experiment;
  std::optional<std::array<double, 2>> interval;
  std::optional<double> tol;
  /// One entry per --grid flag, in order.
  std::vector<GridSpec> grid;
  std::optional<double> horizon;
  std::optional<std::size_t> periods;
  std::optional<double> rate;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  Format format = Format::kJson;
};

struct ExperimentInfo {
  std::string name;
  std::string claim;
  /// Flags accepted besides --out and --format, without the leading dashes.
  std::vector<std::string> flags;
  bool writes_csv = false;
};

const std::vector<ExperimentInfo>& experiments();

struct ExperimentOutput {
  /// {experiment, claim, confirmed, parameters, result}
  Json document;
  bool confirmed = false;
  /// (file name, contents) pairs; empty unless the format asks for CSV.
  std::vector<std::pair<std::string, std::string>> csv;
};

/// Runs one experiment. Throws UsageError for flags the experiment does not
/// take, std::invalid_argument for bad values and clab::Error on numerical failure.
ExperimentOutput run_experiment(const ExperimentConfig& config);

/// "a:b" and "lo:hi:count"; UsageError on malformed text.
std::array<double, 2> parse_interval(const std::string& text);
GridSpec parse_grid_axis(const std::string& text);

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clab::cli
