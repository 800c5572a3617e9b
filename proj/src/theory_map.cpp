#include "mamlode/theory_map.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mamlode/verify.hpp"

namespace mamlode {

const std::vector<TheoryEntry>& theory_registry() {
  static const std::vector<TheoryEntry> entries = {
      {"expected-loss-objective", "f(w) = E_i f_i(w), the objective meta-learning starts from",
       "expected_loss, expected_grad", "gradient_consistency"},
      {"maml-loss", "F(w) = E_i f_i(w - α∇f_i(w)) and its chain-rule gradient",
       "maml_loss, maml_grad, maml_hess", "gradient_consistency"},
      {"maml-update", "w⁺ = w - β∇F(w)", "run_maml", "euler_equivalence"},
      {"maml-ode-limit", "MAML is forward Euler on ẇ = -∇F(w)", "MamlOdeField, euler_integrate",
       "euler_equivalence"},
      {"bi-maml-algorithm", "descend f until ‖∇f‖ <= ε₀, then descend F", "run_bi_maml",
       "biphasic_phases"},
      {"bi-maml-ode", "two-phase flow with a one-way latch", "BiMamlField, run_bi_maml_ode",
       "biphasic_phases"},
      {"smoothness-constants", "L, μ, κ, σ of the task pool", "estimate_constants", "constants"},
      {"maml-ode-convergence-time", "step-size bound and time to ‖∇F‖ <= ε for the MAML ODE",
       "alpha_bound_maml_ode, time_bound_maml_ode", "time_bound_maml_ode"},
      {"bi-maml-ode-convergence-time", "step-size bound and time to ‖∇F‖ <= ε for BI-MAML ODE",
       "alpha_bound_bi_maml_ode, time_bound_bi_maml_ode", "time_bound_bi_maml_ode"},
      {"lyapunov-descent", "d/dt ½‖∇f‖² <= -ζ‖∇f‖² + σ²/2", "lyapunov_rhs, check_lyapunov",
       "lyapunov"},
      {"correction-term-bound", "∇fᵀ∇²f E[B_i∇f_i] <= (μ - ζ)‖∇f‖² + σ²/2",
       "correction_term_bound, check_correction_bound", "correction_bound"},
      {"gradient-envelope", "‖∇f(w(t))‖² <= ((ζy₀ - γ)e^{-ζt} + γ)/ζ", "envelope, check_envelope",
       "envelope"},
      {"forward-norm-transfer", "‖∇F‖ <= (1 + 2αL + α²L²)‖∇f‖ + (2αL + α²L²)σ",
       "grad_norm_transfer_fwd", "norm_transfer_forward"},
      {"backward-norm-transfer", "‖∇f‖ <= (‖∇F‖ + 2αLσ)/(1 - 2αL) for α < 1/(4L)",
       "grad_norm_transfer_bwd", "norm_transfer_backward"},
      {"expected-gradient-hessian-window", "μ/8 ⪯ Hess F ⪯ 9L/8 where ‖∇f‖ <= G",
       "hess_window_check (expected_gradient)", "hessian_window_expected_gradient"},
      {"local-strong-convexity", "μ/8 ⪯ Hess F ⪯ 9L/8 on U(K) for small α",
       "alpha_bound_strong_convexity, hess_window_check", "strong_convexity_window"},
      {"sublevel-inclusion", "U(K) ⊆ V((2K+σ)²/(2μ)) ⊆ U(σ + √(L/μ)(2K+σ))",
       "region_membership, check_region_inclusions", "region_inclusions"},
      {"critical-point-inclusion", "crit F ⊆ V((K'-σ)²/(2L)) ⊆ U(K')", "check_region_inclusions",
       "region_inclusions"},
      {"critical-point-existence", "F has a critical point for α < 1/(4L)", "run_maml_ode",
       "critical_point_existence"},
      {"unique-global-minimum", "F has a unique critical point, its global minimum",
       "uniqueness_probe", "unique_minimum"},
      {"nonconvex-counterexample", "strongly convex tasks whose MAML loss is non-convex at α = 0.4",
       "counterexample_pool, scan_curvature_1d", "counterexample_scan"},
  };
  return entries;
}

std::string emit_theory_map(const std::vector<TheoryEntry>& entries,
                            const std::map<std::string, std::string>& statuses) {
  const auto& known = check_names();
  for (const auto& e : entries) {
    if (e.operation.empty()) {
      throw Error(ErrorKind::config, "anchor '" + e.anchor + "' has no operation");
    }
    if (e.check.empty() || std::find(known.begin(), known.end(), e.check) == known.end()) {
      throw Error(ErrorKind::config, "anchor '" + e.anchor + "' has no check");
    }
  }
  std::ostringstream out;
  out << "# Theory map\n\n"
      << "Generated by `mamlode theory-map`. Status is the result of the named check in the\n"
      << "verification report passed with `--report`; `not-run` when none was given.\n\n"
      << "| anchor | statement | operation | check | status |\n"
      << "|---|---|---|---|---|\n";
  for (const auto& e : entries) {
    const auto it = statuses.find(e.check);
    out << "| " << e.anchor << " | " << e.statement << " | `" << e.operation << "` | `" << e.check
        << "` | " << (it == statuses.end() ? "not-run" : it->second) << " |\n";
  }
  return out.str();
}

std::map<std::string, std::string> statuses_from_report(const std::string& report_json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(report_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("report: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::parse, "report: expected a JSON list");
  std::map<std::string, std::string> out;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("check") || !item.contains("status")) {
      throw Error(ErrorKind::parse, "report: entries need check and status");
    }
    out[item.at("check").get<std::string>()] = item.at("status").get<std::string>();
  }
  return out;
}

}  // namespace mamlode
