#include "mamlode/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mamlode/config.hpp"
#include "mamlode/diagnostics.hpp"
#include "mamlode/losses.hpp"
#include "mamlode/optimizers.hpp"
#include "mamlode/theory_map.hpp"
#include "mamlode/trajectory_io.hpp"
#include "mamlode/verify.hpp"

namespace mamlode::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::non_finite: return kDiverged;
    case ErrorKind::not_strongly_convex:
    case ErrorKind::hypothesis_violated: return kVerifyFailed;
    default: return kUsage;
  }
}

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

RunConfig load(const CommonOptions& opts) {
  if (opts.config.empty()) throw Error(ErrorKind::config, "--config is required");
  RunConfig cfg = load_config(opts.config, opts.seed);
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  return cfg;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  f << text;
}

Trajectory run_algorithm(Algorithm a, const RunConfig& cfg) {
  switch (a) {
    case Algorithm::gd_f: return run_gd_f(cfg.pool, cfg.maml, cfg.w0);
    case Algorithm::maml: return run_maml(cfg.pool, cfg.maml, cfg.w0);
    case Algorithm::fo_maml: return run_fo_maml(cfg.pool, cfg.maml, cfg.w0);
    case Algorithm::bi_maml: return run_bi_maml(cfg.pool, cfg.maml, cfg.w0);
    case Algorithm::maml_ode: return run_maml_ode(cfg.pool, cfg.maml, cfg.w0);
    case Algorithm::bi_maml_ode: return run_bi_maml_ode(cfg.pool, cfg.maml, cfg.w0);
  }
  throw Error(ErrorKind::config, "unknown algorithm");
}

void thin(Trajectory& t, std::size_t every, bool timing) {
  if (every > 1) {
    std::vector<TrajectorySample> kept;
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
      if (k % every == 0 || k + 1 == t.samples.size()) kept.push_back(std::move(t.samples[k]));
    }
    t.samples = std::move(kept);
  }
  if (!timing) {
    for (auto& s : t.samples) s.wall_ns = 0;
  }
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    if (cfg.algorithms.empty()) throw Error(ErrorKind::config, "algorithms: at least one is required");
    for (const auto& w : cfg.pool_warnings) err << "warning: " << w << '\n';
    const fs::path dir = prepare_dir(cfg.output_dir);
    const std::string run_id = cfg.pool_label + "-s" + std::to_string(cfg.seed);

    json summary = json::array();
    std::map<Algorithm, json> by_algo;
    bool diverged = false;
    for (Algorithm a : cfg.algorithms) {
      Trajectory t = run_algorithm(a, cfg);
      thin(t, cfg.record_every, cfg.timing);
      write_trajectory_csv((dir / (std::string(to_string(a)) + ".csv")).string(), t, run_id, to_string(a));
      json s = summary_json(t, to_string(a));
      out << std::left << std::setw(12) << to_string(a) << " termination=" << to_string(t.termination)
          << " iters=" << s["iters"] << " gradF_norm=" << s["terminal_gradF_norm"]
          << " hess_evals=" << s["hess_evals"] << " wall_ns=" << s["wall_ns"] << '\n';
      diverged = diverged || t.termination == Termination::diverged;
      by_algo[a] = s;
      summary.push_back(std::move(s));
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    const auto ratio = [&](Algorithm fast, Algorithm base) {
      if (!by_algo.count(fast) || !by_algo.count(base)) return;
      const json& f = by_algo[fast];
      const json& b = by_algo[base];
      json cmp = {{"algorithm", to_string(fast)}, {"baseline", to_string(base)}};
      const double bh = b["hess_evals"].get<double>(), bw = b["wall_ns"].get<double>();
      cmp["hess_evals_ratio"] = bh > 0 ? json(f["hess_evals"].get<double>() / bh) : json(nullptr);
      cmp["wall_ns_ratio"] = bw > 0 ? json(f["wall_ns"].get<double>() / bw) : json(nullptr);
      write_text(dir / ("comparison_" + std::string(to_string(fast)) + ".json"), cmp.dump(2) + "\n");
      out << to_string(fast) << "/" << to_string(base) << " hess_evals_ratio=" << cmp["hess_evals_ratio"]
          << " wall_ns_ratio=" << cmp["wall_ns_ratio"] << '\n';
    };
    ratio(Algorithm::bi_maml, Algorithm::maml);
    ratio(Algorithm::bi_maml_ode, Algorithm::maml_ode);
    return diverged ? kDiverged : kOk;
  });
}

int cmd_verify(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    for (const auto& w : cfg.pool_warnings) err << "warning: " << w << '\n';
    const VerifyOutcome v = run_verification(cfg);
    const fs::path dir = prepare_dir(cfg.output_dir);
    write_text(dir / "verification.json", v.report().dump(2) + "\n");
    for (const auto& c : v.checks) {
      out << std::left << std::setw(34) << c.check << std::setw(20) << to_string(c.status)
          << "margin=" << finite_or_null(c.margin) << '\n';
    }
    return v.failed() ? kVerifyFailed : kOk;
  });
}

int cmd_constants(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    for (const auto& w : cfg.pool_warnings) err << "warning: " << w << '\n';
    Box region;
    if (cfg.region) {
      region = *cfg.region;
    } else {
      MamlConfig m = cfg.maml;
      m.max_iters = std::min<std::size_t>(m.max_iters, 10000);
      region = box_hull(run_maml(cfg.pool, m, cfg.w0), cfg.verify.region_margin);
    }
    const SmoothnessConstants c = probe_constants(cfg.pool, region, cfg.constants);
    const bool sc = c.mu > 0.0;
    json j = {{"L", c.L},
              {"mu", c.mu},
              {"kappa", c.kappa},
              {"sigma", c.sigma},
              {"f_star", c.f_star},
              {"f_minimizer", vec_json(c.f_minimizer)},
              {"exact", c.exact},
              {"region", {{"lo", vec_json(c.region.lo)}, {"hi", vec_json(c.region.hi)}}},
              {"strongly_convex", sc}};
    if (sc) {
      json terms = json::object();
      for (const auto& t : alpha_bound_maml_ode_terms(c)) terms[t.name] = finite_or_null(t.value);
      json printed = json::object();
      for (const auto& t : alpha_bound_maml_ode_terms(c, ConvergenceBoundForm::as_printed)) {
        printed[t.name] = finite_or_null(t.value);
      }
      j["alpha_bound_maml_ode"] = alpha_bound_maml_ode(c);
      j["alpha_bound_maml_ode_terms"] = terms;
      j["alpha_bound_maml_ode_as_printed"] = alpha_bound_maml_ode(c, ConvergenceBoundForm::as_printed);
      j["alpha_bound_maml_ode_as_printed_terms"] = printed;
      j["alpha_bound_bi_maml_ode"] = alpha_bound_bi_maml_ode(c, cfg.maml.eps0);
      j["alpha_bound_strong_convexity"] = alpha_bound_strong_convexity(c, cfg.verify.K);
      j["alpha_bound_unique_minimum"] =
          alpha_bound_strong_convexity(c, cfg.verify.K, WindowCap::quarter_over_L);
      j["K"] = cfg.verify.K;
      j["eps0"] = cfg.maml.eps0;
    } else {
      j["error"] = "pool not strongly convex on region";
    }
    const fs::path dir = prepare_dir(cfg.output_dir);
    write_text(dir / "constants.json", j.dump(2) + "\n");
    out << j.dump(2) << '\n';
    return sc ? kOk : kVerifyFailed;
  });
}

int cmd_counterexample(double alpha, double grid_min, double grid_max, double step,
                       const std::string& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!std::isfinite(step) || !(step > 0.0)) throw Error(ErrorKind::config, "step: must be positive");
    if (!std::isfinite(alpha) || alpha < 0.0) throw Error(ErrorKind::config, "alpha: must be non-negative");
    if (!(grid_min <= grid_max)) throw Error(ErrorKind::config, "grid: needs min <= max");
    const CurvatureScan s = scan_curvature_1d(counterexample_pool(), alpha, grid_min, grid_max, step);
    const fs::path dir = prepare_dir(out_dir);
    std::ostringstream csv;
    csv << "w,F_second\n";
    for (std::size_t k = 0; k < s.w.size(); ++k) {
      csv << format_double(s.w[k]) << ',' << format_double(s.d2F[k]) << '\n';
    }
    write_text(dir / "counterexample_F_second.csv", csv.str());
    json intervals = json::array();
    for (const auto& [a, b] : s.dF_sign_changes) intervals.push_back({a, b});
    const json j = {{"alpha", alpha},
                    {"grid", {grid_min, grid_max, step}},
                    {"min_F_second", s.min_d2F},
                    {"argmin_F_second", s.argmin_d2F},
                    {"F_prime_sign_changes", intervals},
                    {"F_prime_slope_sign_changes", s.slope_sign_changes},
                    {"nonconvex", s.min_d2F < 0.0}};
    write_text(dir / "counterexample.json", j.dump(2) + "\n");
    out << j.dump(2) << '\n';
    return kOk;
  });
}

std::string render_svg(const std::vector<Series>& series, const std::string& column, bool log_y) {
  constexpr double W = 800, H = 500, left = 80, right = 160, top = 30, bottom = 50;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  auto usable = [&](double y) { return std::isfinite(y) && (!log_y || y > 0.0); };
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!usable(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (ty(y) - y0) / (y1 - y0) * (H - top - bottom); };

  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
    << H - bottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  const auto ylabel = [&](double v) {
    std::ostringstream s;
    s << std::setprecision(3) << (log_y ? std::pow(10.0, v) : v);
    return s.str();
  };
  o << "<text x=\"" << left - 6 << "\" y=\"" << H - bottom << "\" text-anchor=\"end\">" << ylabel(y0)
    << "</text>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << ylabel(y1)
    << "</text>\n";
  o << "<text x=\"" << left << "\" y=\"" << H - bottom + 16 << "\">" << x0 << "</text>\n";
  o << "<text x=\"" << W - right << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"end\">" << x1
    << "</text>\n";
  o << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">iter</text>\n";
  o << "<text x=\"14\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 14 "
    << (top + H - bottom) / 2 << ")\" text-anchor=\"middle\">" << column << (log_y ? " (log)" : "")
    << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % std::size(palette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[i].x.size(); ++k) {
      if (!usable(series[i].y[k])) continue;
      o << px(series[i].x[k]) << ',' << py(series[i].y[k]) << ' ';
    }
    o << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(i) + 8;
    o << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - right + 34 << "\" y=\"" << ly + 4 << "\">" << series[i].label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::vector<std::string>& columns,
             const std::string& out_svg, bool log_y, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (csv_paths.empty()) throw Error(ErrorKind::config, "plot: at least one CSV is required");
    static const std::vector<std::string> plottable = {"F_val", "gradF_norm", "gradf_norm", "t",
                                                       "hess_evals_cum", "grad_evals_cum", "wall_ns"};
    const std::vector<std::string> cols = columns.empty() ? std::vector<std::string>{"gradF_norm"} : columns;
    for (const auto& c : cols) {
      if (std::find(plottable.begin(), plottable.end(), c) == plottable.end()) {
        throw Error(ErrorKind::config, "plot: column '" + c + "' is absent from the trajectory schema");
      }
    }
    std::vector<std::vector<TrajectoryRow>> tables;
    for (const auto& p : csv_paths) {
      auto rows = read_trajectory_csv(p);
      if (rows.empty()) throw Error(ErrorKind::config, "plot: '" + p + "' has no rows");
      tables.push_back(std::move(rows));
    }
    for (const auto& c : cols) {
      std::vector<Series> series;
      for (std::size_t i = 0; i < tables.size(); ++i) {
        Series s;
        s.label = tables[i].front().algorithm + " (" + fs::path(csv_paths[i]).stem().string() + ")";
        for (const auto& r : tables[i]) {
          s.x.push_back(static_cast<double>(r.iter));
          double v = 0.0;
          if (c == "F_val") v = r.F_val;
          else if (c == "gradF_norm") v = r.gradF_norm;
          else if (c == "gradf_norm") v = r.gradf_norm;
          else if (c == "t") v = r.t;
          else if (c == "hess_evals_cum") v = static_cast<double>(r.hess_evals_cum);
          else if (c == "grad_evals_cum") v = static_cast<double>(r.grad_evals_cum);
          else v = static_cast<double>(r.wall_ns);
          s.y.push_back(v);
        }
        series.push_back(std::move(s));
      }
      fs::path target(out_svg);
      if (cols.size() > 1) {
        target = target.parent_path() / (target.stem().string() + "_" + c + ".svg");
      }
      if (!target.parent_path().empty()) prepare_dir(target.parent_path().string());
      write_text(target, render_svg(series, c, log_y));
      out << "wrote " << target.string() << '\n';
    }
    return kOk;
  });
}

int cmd_theory_map(const std::optional<std::string>& report_path, const std::string& out_path,
                   std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::map<std::string, std::string> statuses;
    if (report_path) {
      std::ifstream in(*report_path);
      if (!in) throw Error(ErrorKind::io, "cannot read '" + *report_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      statuses = statuses_from_report(ss.str());
    }
    const std::string doc = emit_theory_map(theory_registry(), statuses);
    const fs::path target(out_path);
    if (!target.parent_path().empty()) prepare_dir(target.parent_path().string());
    write_text(target, doc);
    out << "wrote " << target.string() << '\n';
    return kOk;
  });
}

int main(int argc, char** argv) {
  CLI::App app{"MAML, BI-MAML and their ODE limits, with checks of the convergence theory"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string seed_text;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment config (JSON)")->required();
    sub->add_option("--out", common.out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", common.seed, "seed (overrides the config)");
  };
  auto* run = app.add_subcommand("run", "run the configured algorithms and write trajectories");
  add_common(run);
  auto* verify = app.add_subcommand("verify", "run the verification checks");
  add_common(verify);
  auto* constants = app.add_subcommand("constants", "estimate L, mu, kappa, sigma and step-size bounds");
  add_common(constants);

  double alpha = 0.4, grid_min = -3.0, grid_max = 3.0, step = 1e-3;
  std::string ce_out = "out";
  auto* ce = app.add_subcommand("counterexample", "scan F' and F'' of the non-convex two-task example");
  ce->add_option("--alpha", alpha, "inner step size")->capture_default_str();
  ce->add_option("--min", grid_min, "grid start")->capture_default_str();
  ce->add_option("--max", grid_max, "grid end")->capture_default_str();
  ce->add_option("--step", step, "grid step")->capture_default_str();
  ce->add_option("--out", ce_out, "output directory")->capture_default_str();

  std::vector<std::string> csvs, columns;
  std::string svg = "plot.svg";
  bool log_y = false;
  auto* plot = app.add_subcommand("plot", "render trajectory CSVs as an SVG line chart");
  plot->add_option("csv", csvs, "trajectory CSV files")->required();
  plot->add_option("--column", columns, "column to plot (repeatable; default gradF_norm)");
  plot->add_option("--out", svg, "output SVG path")->capture_default_str();
  plot->add_flag("--log-y", log_y, "logarithmic y axis");

  std::optional<std::string> report;
  std::string map_out = "docs/theory_map.md";
  auto* tmap = app.add_subcommand("theory-map", "write the theory-to-code map");
  tmap->add_option("--report", report, "verification report to take statuses from");
  tmap->add_option("--out", map_out, "output markdown path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (run->parsed()) return cmd_run(common, std::cout, std::cerr);
  if (verify->parsed()) return cmd_verify(common, std::cout, std::cerr);
  if (constants->parsed()) return cmd_constants(common, std::cout, std::cerr);
  if (ce->parsed()) return cmd_counterexample(alpha, grid_min, grid_max, step, ce_out, std::cout, std::cerr);
  if (plot->parsed()) return cmd_plot(csvs, columns, svg, log_y, std::cout, std::cerr);
  if (tmap->parsed()) return cmd_theory_map(report, map_out, std::cout, std::cerr);
  return kUsage;
}

}  // namespace mamlode::cli
