#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mamlode/task_model.hpp"

namespace mamlode {

/// Seed of the substream for `index`. Task i draws from substream i; the
/// initial point of an M-task suite draws from substream M.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

/// M linear-regression tasks: γ_i ~ N(0, I), x ~ N(0, I), y = xᵀγ_i + noise·z,
/// each task the mean squared loss ½‖Xw - y‖²/n.
struct RegressionSuiteSpec {
  std::size_t M = 10;
  std::size_t d = 20;
  std::size_t n = 100;
  double noise = 1.0;
  std::uint64_t seed = 42;
  /// All tasks share one ground-truth vector.
  bool shared_truth = false;
};

TaskPool gen_regression_suite(const RegressionSuiteSpec& spec);

/// M binary tasks with Gaussian clusters at ±separation·u (u a random unit
/// vector per task), trained with the smoothed hinge loss.
struct ClassificationSuiteSpec {
  std::size_t M = 50;
  std::size_t d = 20;
  std::size_t n = 300;  // must be even when balance = 0.5
  double balance = 0.5; // fraction of positive labels
  double separation = 1.0;
  double delta = 0.1;
  std::uint64_t seed = 42;
};

TaskPool gen_classification_suite(const ClassificationSuiteSpec& spec);

/// Standard normal starting point drawn from substream M.
Vector suite_initial_point(std::uint64_t seed, std::size_t M, std::size_t d);

enum class SplitOp { eq, ne, gt, ge, lt, le, gt_mean };

/// Predicate on one column. gt_mean ignores `value` and compares against the
/// column mean over the whole file.
struct SplitRule {
  std::string column;
  SplitOp op = SplitOp::eq;
  double value = 0.0;
};

SplitOp parse_split_op(const std::string& s);

enum class CsvLoss { quadratic, hinge };

struct CsvTaskSpec {
  std::string path;
  /// Empty means every column except the label and the split columns.
  std::vector<std::string> feature_columns;
  std::string label_column;
  std::vector<SplitRule> splits;
  CsvLoss loss = CsvLoss::quadratic;
  double hinge_delta = 0.1;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws Error(config) naming the column when absent.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated, header row required, fields optionally double-quoted
/// ("" escapes a quote). Rows must match the header width.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Column of doubles; errors name the 1-based data row and the column.
Vector numeric_column(const CsvTable& table, const std::string& name);

/// Per-column zero mean, unit (population) variance. Constant columns are only
/// centred.
void standardize_columns(Matrix& X);

struct CsvTasks {
  TaskPool pool;
  /// One label per surviving split cell, e.g. "sex == 1 & age > mean".
  std::vector<std::string> cells;
  std::vector<std::string> warnings;
};

/// One task per cell of the 2^k partition induced by k split rules. Empty cells
/// are dropped with a warning; features are standardized over the whole file.
CsvTasks load_csv_tasks(const CsvTaskSpec& spec);
CsvTasks csv_tasks_from_table(const CsvTable& table, const CsvTaskSpec& spec);

}  // namespace mamlode
