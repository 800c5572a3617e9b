#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mamlode/types.hpp"

namespace mamlode {

struct EvalCounts {
  std::uint64_t value_evals = 0;
  std::uint64_t grad_evals = 0;
  std::uint64_t hess_evals = 0;

  EvalCounts& operator+=(const EvalCounts& o) {
    value_evals += o.value_evals;
    grad_evals += o.grad_evals;
    hess_evals += o.hess_evals;
    return *this;
  }
  friend EvalCounts operator-(EvalCounts a, const EvalCounts& b) {
    a.value_evals -= b.value_evals;
    a.grad_evals -= b.grad_evals;
    a.hess_evals -= b.hess_evals;
    return a;
  }
  bool operator==(const EvalCounts&) const = default;
};

/// One task's risk f_i with value, gradient and Hessian.
///
/// The public evaluation methods check the argument dimension and bump the
/// matching counter before dispatching to the do_* hooks. Counters are atomic so
/// a task may be evaluated from several OpenMP threads at once; everything
/// else about a loss is immutable after construction.
class TaskLoss {
 public:
  explicit TaskLoss(std::size_t dim);
  virtual ~TaskLoss() = default;

  TaskLoss(const TaskLoss&) = delete;
  TaskLoss& operator=(const TaskLoss&) = delete;

  std::size_t dim() const noexcept { return dim_; }

  double value(const Vector& w) const;
  Vector grad(const Vector& w) const;
  Matrix hess(const Vector& w) const;

  virtual bool analytic_hessian() const = 0;
  virtual std::string kind() const = 0;

  /// Deep copy with fresh (zero) counters.
  virtual std::unique_ptr<TaskLoss> clone() const = 0;

  EvalCounts counts() const noexcept;
  void reset_counts() const noexcept;

 protected:
  virtual double do_value(const Vector& w) const = 0;
  virtual Vector do_grad(const Vector& w) const = 0;
  virtual Matrix do_hess(const Vector& w) const = 0;

 private:
  void check_dim(const Vector& w) const;

  std::size_t dim_;
  mutable std::atomic<std::uint64_t> value_evals_{0};
  mutable std::atomic<std::uint64_t> grad_evals_{0};
  mutable std::atomic<std::uint64_t> hess_evals_{0};
};

using TaskPtr = std::shared_ptr<const TaskLoss>;

/// M weighted tasks: the task distribution p and the expected loss f.
class TaskPool {
 public:
  /// Throws Error(invalid_pool) when the weights are negative, do not sum to
  /// one within 1e-12, or the tasks disagree on dimension.
  TaskPool(std::vector<TaskPtr> tasks, std::vector<double> weights);

  /// Uniform weights.
  explicit TaskPool(std::vector<TaskPtr> tasks);

  std::size_t size() const noexcept { return tasks_.size(); }
  std::size_t dim() const noexcept { return tasks_.front()->dim(); }
  const TaskLoss& task(std::size_t i) const { return *tasks_.at(i); }
  const TaskPtr& task_ptr(std::size_t i) const { return tasks_.at(i); }
  double weight(std::size_t i) const { return weights_.at(i); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Same tasks, different weights (validated the same way).
  TaskPool reweighted(std::vector<double> weights) const;

  /// Deep copy whose tasks carry independent counters.
  TaskPool clone() const;

  EvalCounts counts() const;
  void reset_counts() const;

 private:
  std::vector<TaskPtr> tasks_;
  std::vector<double> weights_;
};

enum class Integrator { euler, rk4 };

struct MamlConfig {
  double alpha = 0.1;
  double beta = 0.01;
  double eps = 1e-6;
  double eps0 = 1e-2;
  std::size_t max_iters = 10000;
  double max_time = 1e9;
  Integrator integrator = Integrator::euler;

  /// Throws Error(invalid_argument) naming the offending field.
  void validate() const;
};

enum class Phase { expected_loss, maml };
enum class Termination { converged, iter_budget, time_budget, diverged };

const char* to_string(Phase p);
const char* to_string(Termination t);
const char* to_string(Integrator i);

struct TrajectorySample {
  std::int64_t iter = 0;
  double t = 0.0;
  Vector w;
  double F_val = 0.0;
  double gradF_norm = 0.0;
  double gradf_norm = 0.0;
  Phase phase = Phase::maml;
  std::uint64_t hess_evals_cum = 0;
  std::uint64_t grad_evals_cum = 0;
  std::int64_t wall_ns = 0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::iter_budget;
  MamlConfig config;

  const TrajectorySample& back() const { return samples.back(); }
};

double expected_loss(const TaskPool& pool, const Vector& w, Exec exec = Exec::parallel);
Vector expected_grad(const TaskPool& pool, const Vector& w, Exec exec = Exec::parallel);
Matrix expected_hess(const TaskPool& pool, const Vector& w, Exec exec = Exec::parallel);

/// Returns every violated invariant; an empty list means the pool is usable.
/// Checks weight normalization, shared dimension, finite probe evaluations at
/// the origin, and positive-definite curvature at the origin.
std::vector<std::string> validate_pool(const std::vector<TaskPtr>& tasks,
                                       const std::vector<double>& weights);
std::vector<std::string> validate_pool(const TaskPool& pool);

}  // namespace mamlode
