#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mamlode/config.hpp"
#include "mamlode/diagnostics.hpp"

namespace mamlode {

struct CheckResult {
  std::string check;
  CheckStatus status = CheckStatus::inconclusive;
  /// Positive slack by which the checked inequality held (negative when it did
  /// not); NaN when the check has no single margin.
  double margin = std::numeric_limits<double>::quiet_NaN();
  std::string hypothesis;
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const CheckResult& r);

/// Every check run_verification knows, in report order.
const std::vector<std::string>& check_names();

struct VerifyOutcome {
  SmoothnessConstants constants;
  bool strongly_convex = false;
  std::vector<CheckResult> checks;

  /// True iff a check whose hypotheses hold failed.
  bool failed() const;
  nlohmann::json report() const;
};

/// Integrates the MAML ODE from cfg.w0, certifies the constants on the box hull
/// of the trajectory (or cfg.region), then runs the requested checks. Checks
/// whose hypotheses do not hold are reported as hypothesis-violated.
VerifyOutcome run_verification(const RunConfig& cfg);

}  // namespace mamlode
