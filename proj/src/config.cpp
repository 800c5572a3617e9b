#include "mamlode/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "mamlode/datagen.hpp"
#include "mamlode/losses.hpp"

namespace mamlode {

using nlohmann::json;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gd_f: return "gd_f";
    case Algorithm::maml: return "maml";
    case Algorithm::fo_maml: return "fo_maml";
    case Algorithm::bi_maml: return "bi_maml";
    case Algorithm::maml_ode: return "maml_ode";
    case Algorithm::bi_maml_ode: return "bi_maml_ode";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::gd_f, Algorithm::maml, Algorithm::fo_maml, Algorithm::bi_maml,
                 Algorithm::maml_ode, Algorithm::bi_maml_ode}) {
    if (name == to_string(a)) return a;
  }
  throw Error(ErrorKind::config, "unknown algorithm '" + name + "'");
}

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::config, key + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(where, "must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail(where.empty() ? k : where + "." + k, "unknown key");
  }
}

std::string join(const std::string& where, const char* key) {
  return where.empty() ? key : where + "." + key;
}

double number(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(join(where, key), "must be a number");
  return v.get<double>();
}

std::size_t count(const json& obj, const std::string& where, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(join(where, key), "must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string text(const json& obj, const std::string& where, const char* key,
                 const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(join(where, key), "must be a string");
  return v.get<std::string>();
}

bool flag(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(join(where, key), "must be true or false");
  return v.get<bool>();
}

Vector vec(const json& v, const std::string& key) {
  if (!v.is_array()) fail(key, "must be an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(key, "must be an array of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Matrix mat(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of rows");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) fail(key, "rows must be arrays of equal length");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) fail(key, "entries must be numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
    }
  }
  return out;
}

TaskPool pool_from_json(const json& p, std::string& label) {
  allow_keys(p, "pool", {"kind", "tasks", "weights"});
  const std::string kind = text(p, "pool", "kind", "");
  label = kind;
  if (kind == "symmetric_pair") return symmetric_pair_pool();
  if (kind == "counterexample") return counterexample_pool();
  if (kind != "quadratic") fail("pool.kind", "unknown pool kind '" + kind + "'");
  if (!p.contains("tasks") || !p.at("tasks").is_array() || p.at("tasks").empty()) {
    fail("pool.tasks", "must be a non-empty array");
  }
  std::vector<TaskPtr> tasks;
  const json& ts = p.at("tasks");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string where = "pool.tasks[" + std::to_string(i) + "]";
    allow_keys(ts[i], where, {"H", "b", "c"});
    if (!ts[i].contains("H") || !ts[i].contains("b")) fail(where, "needs H and b");
    try {
      tasks.push_back(std::make_shared<QuadraticLoss>(mat(ts[i].at("H"), where + ".H"),
                                                      vec(ts[i].at("b"), where + ".b"),
                                                      number(ts[i], where, "c", 0.0)));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      fail(where, e.what());
    }
  }
  try {
    if (p.contains("weights")) {
      const Vector w = vec(p.at("weights"), "pool.weights");
      return TaskPool(std::move(tasks), std::vector<double>(w.data(), w.data() + w.size()));
    }
    return TaskPool(std::move(tasks));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail("pool", e.what());
  }
}

TaskPool suite_from_json(const json& s, std::uint64_t seed, std::string& label) {
  allow_keys(s, "suite", {"kind", "M", "d", "n", "noise", "shared_truth", "balance", "separation",
                          "delta"});
  const std::string kind = text(s, "suite", "kind", "");
  label = kind + "_suite";
  try {
    if (kind == "regression") {
      RegressionSuiteSpec spec;
      spec.M = count(s, "suite", "M", spec.M);
      spec.d = count(s, "suite", "d", spec.d);
      spec.n = count(s, "suite", "n", spec.n);
      spec.noise = number(s, "suite", "noise", spec.noise);
      spec.shared_truth = flag(s, "suite", "shared_truth", false);
      spec.seed = seed;
      return gen_regression_suite(spec);
    }
    if (kind == "classification") {
      ClassificationSuiteSpec spec;
      spec.M = count(s, "suite", "M", spec.M);
      spec.d = count(s, "suite", "d", spec.d);
      spec.n = count(s, "suite", "n", spec.n);
      spec.balance = number(s, "suite", "balance", spec.balance);
      spec.separation = number(s, "suite", "separation", spec.separation);
      spec.delta = number(s, "suite", "delta", spec.delta);
      spec.seed = seed;
      return gen_classification_suite(spec);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail("suite", e.what());
  }
  fail("suite.kind", "unknown suite kind '" + kind + "'");
}

TaskPool csv_from_json(const json& c, const std::string& base_dir, std::string& label,
                       std::vector<std::string>& warnings) {
  allow_keys(c, "csv", {"path", "label", "features", "splits", "loss", "delta"});
  CsvTaskSpec spec;
  spec.path = text(c, "csv", "path", "");
  if (spec.path.empty()) fail("csv.path", "required");
  if (std::filesystem::path(spec.path).is_relative()) {
    spec.path = (std::filesystem::path(base_dir) / spec.path).string();
  }
  spec.label_column = text(c, "csv", "label", "");
  if (spec.label_column.empty()) fail("csv.label", "required");
  if (c.contains("features")) {
    const json& f = c.at("features");
    if (!f.is_array()) fail("csv.features", "must be an array of column names");
    for (const auto& name : f) {
      if (!name.is_string()) fail("csv.features", "must be an array of column names");
      spec.feature_columns.push_back(name.get<std::string>());
    }
  }
  if (c.contains("splits")) {
    const json& sp = c.at("splits");
    if (!sp.is_array()) fail("csv.splits", "must be an array");
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const std::string where = "csv.splits[" + std::to_string(i) + "]";
      allow_keys(sp[i], where, {"column", "op", "value"});
      SplitRule rule;
      rule.column = text(sp[i], where, "column", "");
      if (rule.column.empty()) fail(where + ".column", "required");
      rule.op = parse_split_op(text(sp[i], where, "op", "eq"));
      rule.value = number(sp[i], where, "value", 0.0);
      spec.splits.push_back(rule);
    }
  }
  const std::string loss = text(c, "csv", "loss", "quadratic");
  if (loss == "quadratic") {
    spec.loss = CsvLoss::quadratic;
  } else if (loss == "hinge") {
    spec.loss = CsvLoss::hinge;
  } else {
    fail("csv.loss", "unknown loss '" + loss + "'");
  }
  spec.hinge_delta = number(c, "csv", "delta", spec.hinge_delta);
  label = "csv:" + std::filesystem::path(spec.path).filename().string();
  CsvTasks loaded = load_csv_tasks(spec);
  warnings = std::move(loaded.warnings);
  return std::move(loaded.pool);
}

}  // namespace

RunConfig parse_config(const json& doc, std::optional<std::uint64_t> seed_override,
                       const std::string& base_dir) {
  allow_keys(doc, "", {"pool", "suite", "csv", "algorithms", "maml", "budgets", "integrator", "w0",
                       "seed", "output_dir", "timing", "record_every", "region", "constants",
                       "verify"});
  const int sources = doc.contains("pool") + doc.contains("suite") + doc.contains("csv");
  if (sources != 1) fail("pool", "exactly one of pool, suite or csv is required");

  std::uint64_t seed = 42;
  if (doc.contains("seed")) {
    const json& v = doc.at("seed");
    if (!v.is_number_integer() || v.get<long long>() < 0) fail("seed", "must be a non-negative integer");
    seed = doc.at("seed").get<std::uint64_t>();
  }
  if (seed_override) seed = *seed_override;

  std::string label;
  std::vector<std::string> warnings;
  TaskPool pool = doc.contains("pool")    ? pool_from_json(doc.at("pool"), label)
                  : doc.contains("suite") ? suite_from_json(doc.at("suite"), seed, label)
                                          : csv_from_json(doc.at("csv"), base_dir, label, warnings);

  RunConfig cfg{.pool = std::move(pool)};
  cfg.pool_label = label;
  cfg.pool_warnings = std::move(warnings);
  cfg.seed = seed;

  if (doc.contains("algorithms")) {
    const json& a = doc.at("algorithms");
    if (!a.is_array()) fail("algorithms", "must be an array of names");
    for (const auto& name : a) {
      if (!name.is_string()) fail("algorithms", "must be an array of names");
      try {
        cfg.algorithms.push_back(parse_algorithm(name.get<std::string>()));
      } catch (const Error& e) {
        fail("algorithms", e.what());
      }
    }
  }

  if (doc.contains("maml")) {
    const json& m = doc.at("maml");
    allow_keys(m, "maml", {"alpha", "beta", "eps", "eps0"});
    cfg.maml.alpha = number(m, "maml", "alpha", cfg.maml.alpha);
    cfg.maml.beta = number(m, "maml", "beta", cfg.maml.beta);
    cfg.maml.eps = number(m, "maml", "eps", cfg.maml.eps);
    cfg.maml.eps0 = number(m, "maml", "eps0", cfg.maml.eps0);
  }
  if (doc.contains("budgets")) {
    const json& b = doc.at("budgets");
    allow_keys(b, "budgets", {"max_iters", "max_time"});
    cfg.maml.max_iters = count(b, "budgets", "max_iters", cfg.maml.max_iters);
    cfg.maml.max_time = number(b, "budgets", "max_time", cfg.maml.max_time);
  }
  const std::string integrator = text(doc, "", "integrator", "euler");
  if (integrator == "euler") {
    cfg.maml.integrator = Integrator::euler;
  } else if (integrator == "rk4") {
    cfg.maml.integrator = Integrator::rk4;
  } else {
    fail("integrator", "unknown integrator '" + integrator + "'");
  }
  try {
    cfg.maml.validate();
  } catch (const Error& e) {
    fail("maml", e.what());
  }

  const std::size_t d = cfg.pool.dim();
  if (doc.contains("w0")) {
    cfg.w0 = vec(doc.at("w0"), "w0");
    if (static_cast<std::size_t>(cfg.w0.size()) != d) {
      fail("w0", "has " + std::to_string(cfg.w0.size()) + " entries, pool dimension is " +
                     std::to_string(d));
    }
  } else {
    cfg.w0 = suite_initial_point(seed, cfg.pool.size(), d);
  }

  cfg.output_dir = text(doc, "", "output_dir", cfg.output_dir);
  cfg.timing = flag(doc, "", "timing", cfg.timing);
  cfg.record_every = count(doc, "", "record_every", cfg.record_every);
  if (cfg.record_every == 0) fail("record_every", "must be positive");

  if (doc.contains("region")) {
    const json& r = doc.at("region");
    allow_keys(r, "region", {"lo", "hi"});
    if (!r.contains("lo") || !r.contains("hi")) fail("region", "needs lo and hi");
    Box box{vec(r.at("lo"), "region.lo"), vec(r.at("hi"), "region.hi")};
    if (box.lo.size() == 1 && d > 1) box = cube(d, box.lo[0], box.hi[0]);
    if (box.dim() != d || box.hi.size() != box.lo.size()) fail("region", "dimension mismatch");
    if ((box.hi.array() < box.lo.array()).any()) fail("region", "needs lo <= hi");
    cfg.region = box;
  }

  if (doc.contains("constants")) {
    const json& c = doc.at("constants");
    allow_keys(c, "constants", {"samples", "kappa_pairs", "seed"});
    cfg.constants.samples = count(c, "constants", "samples", cfg.constants.samples);
    cfg.constants.kappa_pairs = count(c, "constants", "kappa_pairs", cfg.constants.kappa_pairs);
    cfg.constants.seed = count(c, "constants", "seed", cfg.constants.seed);
  }

  if (doc.contains("verify")) {
    const json& v = doc.at("verify");
    allow_keys(v, "verify", {"checks", "beta", "horizon", "eps", "K", "probes", "inclusion_samples",
                             "starts", "box", "uniqueness_tol", "uniqueness_step",
                             "region_margin"});
    VerifySettings& s = cfg.verify;
    if (v.contains("checks")) {
      const json& ch = v.at("checks");
      if (!ch.is_array()) fail("verify.checks", "must be an array of names");
      for (const auto& name : ch) {
        if (!name.is_string()) fail("verify.checks", "must be an array of names");
        s.checks.push_back(name.get<std::string>());
      }
    }
    s.beta = number(v, "verify", "beta", s.beta);
    s.horizon = number(v, "verify", "horizon", s.horizon);
    s.eps = number(v, "verify", "eps", s.eps);
    s.K = number(v, "verify", "K", s.K);
    s.probes = count(v, "verify", "probes", s.probes);
    s.inclusion_samples = count(v, "verify", "inclusion_samples", s.inclusion_samples);
    s.starts = count(v, "verify", "starts", s.starts);
    if (v.contains("box")) {
      const Vector b = vec(v.at("box"), "verify.box");
      if (b.size() != 2 || !(b[0] < b[1])) fail("verify.box", "must be [lo, hi] with lo < hi");
      s.box_lo = b[0];
      s.box_hi = b[1];
    }
    s.uniqueness_tol = number(v, "verify", "uniqueness_tol", s.uniqueness_tol);
    s.uniqueness_step = number(v, "verify", "uniqueness_step", s.uniqueness_step);
    s.region_margin = number(v, "verify", "region_margin", s.region_margin);
    for (auto [key, val] : {std::pair{"verify.beta", s.beta}, {"verify.horizon", s.horizon},
                            {"verify.eps", s.eps}, {"verify.K", s.K},
                            {"verify.uniqueness_tol", s.uniqueness_tol},
                            {"verify.uniqueness_step", s.uniqueness_step}}) {
      if (!std::isfinite(val) || !(val > 0.0)) fail(key, "must be finite and positive");
    }
    if (!(s.region_margin >= 0.0)) fail("verify.region_margin", "must be non-negative");
  }
  return cfg;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "config: cannot read '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("config: invalid JSON: ") + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(doc, seed_override, dir.empty() ? "." : dir.string());
}

}  // namespace mamlode
