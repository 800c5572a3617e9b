#pragma once

#include <map>
#include <string>
#include <vector>

namespace mamlode {

/// One statement of the theory, the code that implements it and the
/// verification check that exercises it.
struct TheoryEntry {
  std::string anchor;     // stable descriptive id, e.g. "lyapunov-descent"
  std::string statement;  // one-line summary
  std::string operation;  // implementing function(s)
  std::string check;      // name from check_names()
};

const std::vector<TheoryEntry>& theory_registry();

/// Markdown table {anchor, statement, operation, check, status}. Statuses come
/// from `statuses` (check name -> status) and default to "not-run". Throws
/// Error(config) naming the first anchor without an operation or with a check
/// unknown to the verification suite.
std::string emit_theory_map(const std::vector<TheoryEntry>& entries,
                            const std::map<std::string, std::string>& statuses = {});

/// check -> status from a verification report (JSON list as written by verify).
std::map<std::string, std::string> statuses_from_report(const std::string& report_json);

}  // namespace mamlode
