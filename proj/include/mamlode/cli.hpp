#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mamlode/types.hpp"

// Subcommands of the mamlode tool. Each returns the process exit code:
// 0 success (including hypothesis-violated checks), 1 verification failure,
// 2 usage or config error, 3 divergence.

namespace mamlode::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kDiverged = 3 };

int exit_code_for(ErrorKind kind);

struct CommonOptions {
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_constants(const CommonOptions& opts, std::ostream& out, std::ostream& err);

int cmd_counterexample(double alpha, double grid_min, double grid_max, double step,
                       const std::string& out_dir, std::ostream& out, std::ostream& err);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with one polyline per series. With log_y, non-positive values
/// are skipped.
std::string render_svg(const std::vector<Series>& series, const std::string& column, bool log_y);

/// One SVG per column; with several columns the files are <stem>_<column>.svg.
int cmd_plot(const std::vector<std::string>& csv_paths, const std::vector<std::string>& columns,
             const std::string& out_svg, bool log_y, std::ostream& out, std::ostream& err);

int cmd_theory_map(const std::optional<std::string>& report_path, const std::string& out_path,
                   std::ostream& out, std::ostream& err);

/// Argument parsing front end used by the mamlode binary.
int main(int argc, char** argv);

}  // namespace mamlode::cli
