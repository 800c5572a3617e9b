#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mamlode/diagnostics.hpp"
#include "mamlode/task_model.hpp"

namespace mamlode {

enum class Algorithm { gd_f, maml, fo_maml, bi_maml, maml_ode, bi_maml_ode };

const char* to_string(Algorithm a);
/// Throws Error(config, "unknown algorithm '<name>'").
Algorithm parse_algorithm(const std::string& name);

struct VerifySettings {
  std::vector<std::string> checks;  // empty: every check
  double beta = 1e-3;               // RK4 step of the checked trajectories
  double horizon = 10.0;            // length of the fixed-horizon trajectory
  double eps = 0.01;                // ε of the convergence-time checks
  double K = 1.0;                   // level of U(K) for the Hessian window
  std::size_t probes = 100;
  std::size_t inclusion_samples = 1000;
  std::size_t starts = 20;
  double box_lo = -10.0;
  double box_hi = 10.0;
  double uniqueness_tol = 1e-4;
  double uniqueness_step = 1e-2;
  double region_margin = 0.1;
};

struct RunConfig {
  TaskPool pool;
  std::string pool_label{};
  std::vector<std::string> pool_warnings{};
  std::vector<Algorithm> algorithms{};
  MamlConfig maml{};
  Vector w0{};
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  bool timing = true;  // false writes wall_ns = 0 for byte-reproducible files
  std::size_t record_every = 1;
  std::optional<Box> region{};
  ConstantsOptions constants{};
  VerifySettings verify{};
};

/// Builds a run from a JSON document. Exactly one of "pool", "suite" or "csv"
/// must be present. Errors are Error(config) naming the offending key.
/// Relative csv paths resolve against base_dir.
RunConfig parse_config(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = {},
                       const std::string& base_dir = ".");

/// Reads and parses a config file; JSON syntax errors map to Error(config).
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = {});

}  // namespace mamlode
