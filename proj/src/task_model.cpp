#include "mamlode/task_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "parallel.hpp"

namespace mamlode {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::invalid_pool: return "invalid pool";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::not_strongly_convex: return "not strongly convex";
    case ErrorKind::hypothesis_violated: return "hypothesis violated";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

const char* to_string(Phase p) {
  return p == Phase::expected_loss ? "expected_loss" : "maml";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::iter_budget: return "iter_budget";
    case Termination::time_budget: return "time_budget";
    case Termination::diverged: return "diverged";
  }
  return "unknown";
}

const char* to_string(Integrator i) { return i == Integrator::euler ? "euler" : "rk4"; }

// ---------------------------------------------------------------------------

TaskLoss::TaskLoss(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorKind::invalid_argument, "task dimension must be >= 1");
}

void TaskLoss::check_dim(const Vector& w) const {
  if (static_cast<std::size_t>(w.size()) != dim_) {
    std::ostringstream os;
    os << "dimension mismatch: task expects " << dim_ << ", got " << w.size();
    throw Error(ErrorKind::dimension_mismatch, os.str());
  }
}

double TaskLoss::value(const Vector& w) const {
  check_dim(w);
  value_evals_.fetch_add(1, std::memory_order_relaxed);
  return do_value(w);
}

Vector TaskLoss::grad(const Vector& w) const {
  check_dim(w);
  grad_evals_.fetch_add(1, std::memory_order_relaxed);
  return do_grad(w);
}

Matrix TaskLoss::hess(const Vector& w) const {
  check_dim(w);
  hess_evals_.fetch_add(1, std::memory_order_relaxed);
  return do_hess(w);
}

EvalCounts TaskLoss::counts() const noexcept {
  return {value_evals_.load(std::memory_order_relaxed),
          grad_evals_.load(std::memory_order_relaxed),
          hess_evals_.load(std::memory_order_relaxed)};
}

void TaskLoss::reset_counts() const noexcept {
  value_evals_.store(0);
  grad_evals_.store(0);
  hess_evals_.store(0);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> structural_issues(const std::vector<TaskPtr>& tasks,
                                           const std::vector<double>& weights) {
  std::vector<std::string> issues;
  if (tasks.empty()) {
    issues.emplace_back("pool must contain at least one task");
    return issues;
  }
  for (const auto& t : tasks) {
    if (!t) {
      issues.emplace_back("null task");
      return issues;
    }
  }
  if (weights.size() != tasks.size()) {
    issues.emplace_back("weights and tasks differ in length");
    return issues;
  }
  const std::size_t d = tasks.front()->dim();
  for (const auto& t : tasks) {
    if (t->dim() != d) {
      issues.emplace_back("dimension mismatch");
      break;
    }
  }
  bool finite = true;
  for (double p : weights) finite = finite && std::isfinite(p);
  if (!finite) {
    issues.emplace_back("weights must be finite");
    return issues;
  }
  for (double p : weights) {
    if (p < 0.0) {
      issues.emplace_back("weights must be non-negative");
      break;
    }
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "weights must sum to 1 (sum = " << total << ")";
    issues.push_back(os.str());
  }
  return issues;
}

}  // namespace

TaskPool::TaskPool(std::vector<TaskPtr> tasks, std::vector<double> weights)
    : tasks_(std::move(tasks)), weights_(std::move(weights)) {
  auto issues = structural_issues(tasks_, weights_);
  if (!issues.empty()) {
    std::string msg = issues.front();
    for (std::size_t i = 1; i < issues.size(); ++i) msg += "; " + issues[i];
    throw Error(ErrorKind::invalid_pool, msg);
  }
}

TaskPool::TaskPool(std::vector<TaskPtr> tasks)
    : TaskPool(tasks, std::vector<double>(tasks.size(),
                                          tasks.empty() ? 0.0 : 1.0 / static_cast<double>(tasks.size()))) {}

TaskPool TaskPool::reweighted(std::vector<double> weights) const {
  return TaskPool(tasks_, std::move(weights));
}

TaskPool TaskPool::clone() const {
  std::vector<TaskPtr> copies;
  copies.reserve(tasks_.size());
  for (const auto& t : tasks_) copies.emplace_back(t->clone());
  return TaskPool(std::move(copies), weights_);
}

EvalCounts TaskPool::counts() const {
  EvalCounts total;
  for (const auto& t : tasks_) total += t->counts();
  return total;
}

void TaskPool::reset_counts() const {
  for (const auto& t : tasks_) t->reset_counts();
}

void MamlConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw Error(ErrorKind::invalid_argument,
                  std::string(name) + " must be finite and positive");
    }
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(eps, "eps");
  positive(eps0, "eps0");
  positive(max_time, "max_time");
  if (max_iters == 0) throw Error(ErrorKind::invalid_argument, "max_iters must be positive");
}

// ---------------------------------------------------------------------------

namespace {

void check_pool_dim(const TaskPool& pool, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != pool.dim()) {
    std::ostringstream os;
    os << "dimension mismatch: pool expects " << pool.dim() << ", got " << w.size();
    throw Error(ErrorKind::dimension_mismatch, os.str());
  }
}

}  // namespace

double expected_loss(const TaskPool& pool, const Vector& w, Exec exec) {
  check_pool_dim(pool, w);
  std::vector<double> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim(),
                        [&](std::size_t i) { parts[i] = pool.task(i).value(w); });
  double total = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) total += pool.weight(i) * parts[i];
  return total;
}

Vector expected_grad(const TaskPool& pool, const Vector& w, Exec exec) {
  check_pool_dim(pool, w);
  std::vector<Vector> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim(),
                        [&](std::size_t i) { parts[i] = pool.task(i).grad(w); });
  return detail::weighted_sum(pool.weights(), parts);
}

Matrix expected_hess(const TaskPool& pool, const Vector& w, Exec exec) {
  check_pool_dim(pool, w);
  std::vector<Matrix> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim() * pool.dim(),
                        [&](std::size_t i) { parts[i] = pool.task(i).hess(w); });
  return detail::weighted_sum(pool.weights(), parts);
}

std::vector<std::string> validate_pool(const std::vector<TaskPtr>& tasks,
                                       const std::vector<double>& weights) {
  auto issues = structural_issues(tasks, weights);
  if (tasks.empty()) return issues;
  for (const auto& t : tasks) {
    if (!t) return issues;
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = *tasks[i];
    const Vector origin = Vector::Zero(static_cast<Eigen::Index>(task.dim()));
    const std::string tag = " (task " + std::to_string(i) + ")";
    try {
      const double v = task.value(origin);
      const Vector g = task.grad(origin);
      const Matrix h = task.hess(origin);
      if (!std::isfinite(v) || !g.allFinite() || !h.allFinite()) {
        issues.push_back("non-finite evaluation at the origin" + tag);
        continue;
      }
      const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()),
                                                     Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0)) {
        issues.push_back("not strongly convex" + tag);
      }
    } catch (const std::exception& e) {
      issues.push_back(std::string("evaluation failed at the origin: ") + e.what() + tag);
    }
  }
  return issues;
}

std::vector<std::string> validate_pool(const TaskPool& pool) {
  std::vector<TaskPtr> tasks;
  for (std::size_t i = 0; i < pool.size(); ++i) tasks.push_back(pool.task_ptr(i));
  return validate_pool(tasks, pool.weights());
}

}  // namespace mamlode
