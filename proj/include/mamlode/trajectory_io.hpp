#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mamlode/task_model.hpp"

namespace mamlode {

inline constexpr const char* kTrajectoryHeader =
    "run_id,algorithm,iter,t,phase,F_val,gradF_norm,gradf_norm,hess_evals_cum,grad_evals_cum,"
    "wall_ns";

/// Shortest decimal string that parses back to exactly v ("nan", "inf",
/// "-inf" for the non-finite values).
std::string format_double(double v);

/// One CSV line per sample, LF endings, no header.
void write_trajectory_rows(std::ostream& out, const Trajectory& traj, const std::string& run_id,
                           const std::string& algorithm);

/// Header plus rows. Throws Error(io) when the file cannot be written.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::string& run_id, const std::string& algorithm);

struct TrajectoryRow {
  std::string run_id;
  std::string algorithm;
  std::int64_t iter = 0;
  double t = 0.0;
  std::string phase;
  double F_val = 0.0;
  double gradF_norm = 0.0;
  double gradf_norm = 0.0;
  std::uint64_t hess_evals_cum = 0;
  std::uint64_t grad_evals_cum = 0;
  std::int64_t wall_ns = 0;
};

/// Reads a file written by write_trajectory_csv. Throws Error(parse) when the
/// header differs from kTrajectoryHeader or a row is malformed.
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

/// {algorithm, terminal_gradF_norm, iters, t_final, hess_evals, grad_evals,
///  wall_ns, termination}
nlohmann::json summary_json(const Trajectory& traj, const std::string& algorithm);

}  // namespace mamlode
