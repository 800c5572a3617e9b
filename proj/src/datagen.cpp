#include "mamlode/datagen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mamlode/losses.hpp"

namespace mamlode {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vector normal_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = N(rng);
  return v;
}

Matrix normal_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = N(rng);
  }
  return X;
}

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw Error(ErrorKind::invalid_argument, std::string(name) + " must be positive");
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index + 1) * 0xD1B54A32D192ED03ULL);
}

TaskPool gen_regression_suite(const RegressionSuiteSpec& spec) {
  require_positive(spec.M, "M");
  require_positive(spec.d, "d");
  require_positive(spec.n, "n");
  if (!std::isfinite(spec.noise) || spec.noise < 0.0) {
    throw Error(ErrorKind::invalid_argument, "noise must be finite and non-negative");
  }
  std::vector<TaskPtr> tasks;
  Vector shared;
  if (spec.shared_truth) {
    std::mt19937_64 rng(substream_seed(spec.seed, spec.M + 1));
    shared = normal_vector(rng, spec.d);
  }
  for (std::size_t i = 0; i < spec.M; ++i) {
    std::mt19937_64 rng(substream_seed(spec.seed, i));
    const Vector truth = spec.shared_truth ? shared : normal_vector(rng, spec.d);
    const Matrix X = normal_matrix(rng, spec.n, spec.d);
    const Vector z = normal_vector(rng, spec.n);
    const Vector y = X * truth + spec.noise * z;
    tasks.push_back(quadratic_from_regression(X, y));
  }
  return TaskPool(std::move(tasks));
}

TaskPool gen_classification_suite(const ClassificationSuiteSpec& spec) {
  require_positive(spec.M, "M");
  require_positive(spec.d, "d");
  require_positive(spec.n, "n");
  if (!(spec.balance > 0.0 && spec.balance < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "balance must lie in (0, 1)");
  }
  if (spec.balance == 0.5 && spec.n % 2 != 0) {
    throw Error(ErrorKind::invalid_argument, "n must be even for evenly split classes");
  }
  if (!std::isfinite(spec.separation) || spec.separation < 0.0) {
    throw Error(ErrorKind::invalid_argument, "separation must be finite and non-negative");
  }
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto n_pos = static_cast<Eigen::Index>(std::llround(spec.balance * static_cast<double>(spec.n)));
  std::vector<TaskPtr> tasks;
  for (std::size_t i = 0; i < spec.M; ++i) {
    std::mt19937_64 rng(substream_seed(spec.seed, i));
    Vector u = normal_vector(rng, spec.d);
    u /= u.norm();
    Matrix X = normal_matrix(rng, spec.n, spec.d);
    Vector y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      y[r] = r < n_pos ? 1.0 : -1.0;
      X.row(r) += y[r] * spec.separation * u.transpose();
    }
    tasks.push_back(smoothed_hinge(X, y, spec.delta));
  }
  return TaskPool(std::move(tasks));
}

Vector suite_initial_point(std::uint64_t seed, std::size_t M, std::size_t d) {
  std::mt19937_64 rng(substream_seed(seed, M));
  return normal_vector(rng, d);
}

SplitOp parse_split_op(const std::string& s) {
  if (s == "eq" || s == "==") return SplitOp::eq;
  if (s == "ne" || s == "!=") return SplitOp::ne;
  if (s == "gt" || s == ">") return SplitOp::gt;
  if (s == "ge" || s == ">=") return SplitOp::ge;
  if (s == "lt" || s == "<") return SplitOp::lt;
  if (s == "le" || s == "<=") return SplitOp::le;
  if (s == "gt_mean") return SplitOp::gt_mean;
  throw Error(ErrorKind::config, "unknown split op '" + s + "'");
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw Error(ErrorKind::config, "missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record.front().empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_record();
      ++line;
    } else if (ch == '\r') {
      // tolerate CRLF
    } else {
      field += ch;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::parse, "unterminated quoted field at line " + std::to_string(line));
  if (!field.empty() || !record.empty()) end_record();

  if (records.empty()) throw Error(ErrorKind::parse, "csv has no header row");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw Error(ErrorKind::parse, "row " + std::to_string(r) + " has " +
                                        std::to_string(records[r].size()) + " fields, header has " +
                                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

Vector numeric_column(const CsvTable& table, const std::string& name) {
  const std::size_t j = table.column(name);
  Vector v(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][j];
    std::size_t a = 0, b = cell.size();
    while (a < b && (cell[a] == ' ' || cell[a] == '\t')) ++a;
    while (b > a && (cell[b - 1] == ' ' || cell[b - 1] == '\t')) --b;
    if (a < b && cell[a] == '+') ++a;
    double x = 0.0;
    const auto [end, ec] = std::from_chars(cell.data() + a, cell.data() + b, x);
    const bool ok = a < b && ec == std::errc() && end == cell.data() + b && std::isfinite(x);
    if (!ok) {
      throw Error(ErrorKind::parse, "unparsable numeric cell '" + cell + "' at row " +
                                        std::to_string(r + 1) + ", column '" + name + "'");
    }
    v[static_cast<Eigen::Index>(r)] = x;
  }
  return v;
}

void standardize_columns(Matrix& X) {
  if (X.rows() == 0) return;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(X.rows()));
    if (sd > 0.0) X.col(j) /= sd;
  }
}

namespace {

const char* op_text(SplitOp op) {
  switch (op) {
    case SplitOp::eq: return "==";
    case SplitOp::ne: return "!=";
    case SplitOp::gt: return ">";
    case SplitOp::ge: return ">=";
    case SplitOp::lt: return "<";
    case SplitOp::le: return "<=";
    case SplitOp::gt_mean: return ">";
  }
  return "?";
}

bool holds(SplitOp op, double x, double v) {
  switch (op) {
    case SplitOp::eq: return x == v;
    case SplitOp::ne: return x != v;
    case SplitOp::gt:
    case SplitOp::gt_mean: return x > v;
    case SplitOp::ge: return x >= v;
    case SplitOp::lt: return x < v;
    case SplitOp::le: return x <= v;
  }
  return false;
}

std::string format_value(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

CsvTasks csv_tasks_from_table(const CsvTable& table, const CsvTaskSpec& spec) {
  if (spec.label_column.empty()) throw Error(ErrorKind::config, "missing label column");
  if (spec.splits.size() > 16) throw Error(ErrorKind::config, "at most 16 split rules");
  if (table.rows.empty()) throw Error(ErrorKind::config, "csv has no data rows");

  std::vector<std::string> features = spec.feature_columns;
  if (features.empty()) {
    for (const auto& h : table.header) {
      bool skip = h == spec.label_column;
      for (const auto& s : spec.splits) skip = skip || h == s.column;
      if (!skip) features.push_back(h);
    }
  }
  if (features.empty()) throw Error(ErrorKind::config, "no feature columns");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix X(n, static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    X.col(static_cast<Eigen::Index>(j)) = numeric_column(table, features[j]);
  }
  standardize_columns(X);
  Vector y = numeric_column(table, spec.label_column);
  if (spec.loss == CsvLoss::hinge) {
    for (Eigen::Index r = 0; r < n; ++r) {
      if (y[r] == 0.0) y[r] = -1.0;
      if (y[r] != 1.0 && y[r] != -1.0) {
        throw Error(ErrorKind::parse, "hinge label must be -1/1 or 0/1 at row " +
                                          std::to_string(r + 1) + ", column '" +
                                          spec.label_column + "'");
      }
    }
  }

  std::vector<Vector> split_cols;
  std::vector<double> thresholds;
  for (const auto& s : spec.splits) {
    split_cols.push_back(numeric_column(table, s.column));
    thresholds.push_back(s.op == SplitOp::gt_mean ? split_cols.back().mean() : s.value);
  }

  const std::size_t cells = std::size_t{1} << spec.splits.size();
  std::vector<std::vector<Eigen::Index>> members(cells);
  for (Eigen::Index r = 0; r < n; ++r) {
    std::size_t cell = 0;
    for (std::size_t k = 0; k < spec.splits.size(); ++k) {
      if (holds(spec.splits[k].op, split_cols[k][r], thresholds[k])) cell |= std::size_t{1} << k;
    }
    members[cell].push_back(r);
  }

  std::vector<TaskPtr> tasks;
  std::vector<std::string> labels, warnings;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::string label;
    for (std::size_t k = 0; k < spec.splits.size(); ++k) {
      const auto& s = spec.splits[k];
      const std::string rhs = s.op == SplitOp::gt_mean ? "mean" : format_value(s.value);
      const std::string pred = s.column + " " + op_text(s.op) + " " + rhs;
      if (!label.empty()) label += " & ";
      label += (cell >> k) & 1 ? pred : "not(" + pred + ")";
    }
    if (label.empty()) label = "all";
    if (members[cell].empty()) {
      warnings.push_back("split cell '" + label + "' matches no rows; task dropped");
      continue;
    }
    const auto m = static_cast<Eigen::Index>(members[cell].size());
    Matrix Xc(m, X.cols());
    Vector yc(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      Xc.row(r) = X.row(members[cell][static_cast<std::size_t>(r)]);
      yc[r] = y[members[cell][static_cast<std::size_t>(r)]];
    }
    if (spec.loss == CsvLoss::quadratic) {
      tasks.push_back(quadratic_from_regression(Xc, yc));
    } else {
      tasks.push_back(smoothed_hinge(Xc, yc, spec.hinge_delta));
    }
    labels.push_back(label);
  }
  if (tasks.empty()) throw Error(ErrorKind::config, "every split cell is empty");
  return CsvTasks{TaskPool(std::move(tasks)), std::move(labels), std::move(warnings)};
}

CsvTasks load_csv_tasks(const CsvTaskSpec& spec) {
  return csv_tasks_from_table(read_csv(spec.path), spec);
}

}  // namespace mamlode
