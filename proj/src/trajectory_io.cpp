#include "mamlode/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mamlode/datagen.hpp"

namespace mamlode {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorKind::io, "cannot format double");
  return std::string(buf, end);
}

void write_trajectory_rows(std::ostream& out, const Trajectory& traj, const std::string& run_id,
                           const std::string& algorithm) {
  for (const auto& s : traj.samples) {
    out << run_id << ',' << algorithm << ',' << s.iter << ',' << format_double(s.t) << ','
        << to_string(s.phase) << ',' << format_double(s.F_val) << ','
        << format_double(s.gradF_norm) << ',' << format_double(s.gradf_norm) << ','
        << s.hess_evals_cum << ',' << s.grad_evals_cum << ',' << s.wall_ns << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::string& run_id, const std::string& algorithm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << kTrajectoryHeader << '\n';
  write_trajectory_rows(out, traj, run_id, algorithm);
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

namespace {

double parse_double(const std::string& s, std::size_t row, const char* col) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::parse, "bad value '" + s + "' at row " + std::to_string(row) +
                                      ", column '" + col + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t row, const char* col) {
  Int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::parse, "bad integer '" + s + "' at row " + std::to_string(row) +
                                      ", column '" + col + "'");
  }
  return v;
}

}  // namespace

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::string header;
  for (std::size_t j = 0; j < t.header.size(); ++j) header += (j ? "," : "") + t.header[j];
  if (header != kTrajectoryHeader) {
    throw Error(ErrorKind::parse, "'" + path + "' does not have the trajectory header");
  }
  std::vector<TrajectoryRow> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& c = t.rows[r];
    const std::size_t n = r + 1;
    TrajectoryRow row;
    row.run_id = c[0];
    row.algorithm = c[1];
    row.iter = parse_int<std::int64_t>(c[2], n, "iter");
    row.t = parse_double(c[3], n, "t");
    row.phase = c[4];
    row.F_val = parse_double(c[5], n, "F_val");
    row.gradF_norm = parse_double(c[6], n, "gradF_norm");
    row.gradf_norm = parse_double(c[7], n, "gradf_norm");
    row.hess_evals_cum = parse_int<std::uint64_t>(c[8], n, "hess_evals_cum");
    row.grad_evals_cum = parse_int<std::uint64_t>(c[9], n, "grad_evals_cum");
    row.wall_ns = parse_int<std::int64_t>(c[10], n, "wall_ns");
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json summary_json(const Trajectory& traj, const std::string& algorithm) {
  nlohmann::json j;
  j["algorithm"] = algorithm;
  if (traj.samples.empty()) {
    j["terminal_gradF_norm"] = nullptr;
    j["iters"] = 0;
    j["t_final"] = 0.0;
    j["hess_evals"] = 0;
    j["grad_evals"] = 0;
    j["wall_ns"] = 0;
  } else {
    const auto& s = traj.back();
    if (std::isfinite(s.gradF_norm)) {
      j["terminal_gradF_norm"] = s.gradF_norm;
    } else {
      j["terminal_gradF_norm"] = nullptr;
    }
    j["iters"] = s.iter;
    j["t_final"] = s.t;
    j["hess_evals"] = s.hess_evals_cum;
    j["grad_evals"] = s.grad_evals_cum;
    j["wall_ns"] = s.wall_ns;
  }
  j["termination"] = to_string(traj.termination);
  return j;
}

}  // namespace mamlode
