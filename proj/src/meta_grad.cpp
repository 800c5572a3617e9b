#include "mamlode/meta_grad.hpp"

#include <cmath>
#include <sstream>

#include "mamlode/losses.hpp"
#include "parallel.hpp"

namespace mamlode {

namespace {

void check_alpha(double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw Error(ErrorKind::invalid_argument, "alpha must be finite and non-negative");
  }
}

void check_dim(const TaskPool& pool, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != pool.dim()) {
    std::ostringstream os;
    os << "dimension mismatch: pool expects " << pool.dim() << ", got " << w.size();
    throw Error(ErrorKind::dimension_mismatch, os.str());
  }
}

template <typename T>
const T& finite_or_throw(const T& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorKind::non_finite, std::string("non-finite ") + what);
  return v;
}

// A_i(w) g without forming A_i.
Vector apply_correction(const Matrix& hess, double alpha, const Vector& g) {
  return g - alpha * (hess * g);
}

}  // namespace

Vector inner_step(const TaskLoss& task, double alpha, const Vector& w) {
  check_alpha(alpha);
  const Vector g = task.grad(w);
  finite_or_throw(g, "gradient");
  return w - alpha * g;
}

double maml_task_loss(const TaskLoss& task, double alpha, const Vector& w) {
  return task.value(inner_step(task, alpha, w));
}

Matrix correction_matrix(const TaskLoss& task, double alpha, const Vector& w) {
  check_alpha(alpha);
  const auto d = static_cast<Eigen::Index>(task.dim());
  return Matrix::Identity(d, d) - alpha * task.hess(w);
}

double maml_loss(const TaskPool& pool, double alpha, const Vector& w, Exec exec) {
  check_alpha(alpha);
  check_dim(pool, w);
  std::vector<double> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim() * pool.dim(), [&](std::size_t i) {
    parts[i] = maml_task_loss(pool.task(i), alpha, w);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) total += pool.weight(i) * parts[i];
  return total;
}

Vector maml_grad(const TaskPool& pool, double alpha, const Vector& w, Exec exec) {
  check_alpha(alpha);
  check_dim(pool, w);
  std::vector<Vector> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim() * pool.dim(), [&](std::size_t i) {
    const TaskLoss& task = pool.task(i);
    const Vector g = finite_or_throw(task.grad(w), "gradient");
    const Vector inner = w - alpha * g;
    const Vector g_inner = finite_or_throw(task.grad(inner), "gradient at the inner point");
    const Matrix h = finite_or_throw(task.hess(w), "Hessian");
    parts[i] = apply_correction(h, alpha, g_inner);
  });
  return detail::weighted_sum(pool.weights(), parts);
}

Vector fo_maml_grad(const TaskPool& pool, double alpha, const Vector& w, Exec exec) {
  check_alpha(alpha);
  check_dim(pool, w);
  std::vector<Vector> parts(pool.size());
  detail::for_each_task(pool.size(), exec, pool.dim(), [&](std::size_t i) {
    const TaskLoss& task = pool.task(i);
    const Vector g = finite_or_throw(task.grad(w), "gradient");
    parts[i] = finite_or_throw(task.grad(w - alpha * g), "gradient at the inner point");
  });
  return detail::weighted_sum(pool.weights(), parts);
}

bool all_quadratic(const TaskPool& pool) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (dynamic_cast<const QuadraticLoss*>(&pool.task(i)) == nullptr) return false;
  }
  return true;
}

Matrix maml_hess(const TaskPool& pool, double alpha, const Vector& w, Exec exec) {
  check_alpha(alpha);
  check_dim(pool, w);
  if (all_quadratic(pool)) {
    const auto d = static_cast<Eigen::Index>(pool.dim());
    std::vector<Matrix> parts(pool.size());
    detail::for_each_task(pool.size(), exec, pool.dim() * pool.dim() * pool.dim(),
                          [&](std::size_t i) {
                            const auto& q = static_cast<const QuadraticLoss&>(pool.task(i));
                            const Matrix A = Matrix::Identity(d, d) - alpha * q.H();
                            Matrix part = A * q.H() * A;
                            parts[i] = 0.5 * (part + part.transpose());
                          });
    return detail::weighted_sum(pool.weights(), parts);
  }
  const double h = scaled_step(kMamlHessStep, w);
  return finite_diff_jacobian_sym(
      [&](const Vector& x) { return maml_grad(pool, alpha, x, exec); }, w, h);
}

// ---------------------------------------------------------------------------

namespace reference {

double maml_loss(const TaskPool& pool, double alpha, const Vector& w) {
  check_dim(pool, w);
  double total = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const TaskLoss& task = pool.task(i);
    const Vector adapted = w - alpha * task.grad(w);
    total += pool.weight(i) * task.value(adapted);
  }
  return total;
}

Vector maml_grad(const TaskPool& pool, double alpha, const Vector& w) {
  check_dim(pool, w);
  const auto d = static_cast<Eigen::Index>(pool.dim());
  Vector total = Vector::Zero(d);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const TaskLoss& task = pool.task(i);
    const Matrix A = Matrix::Identity(d, d) - alpha * task.hess(w);
    const Vector adapted = w - alpha * task.grad(w);
    total += pool.weight(i) * (A * task.grad(adapted));
  }
  return total;
}

Vector fo_maml_grad(const TaskPool& pool, double alpha, const Vector& w) {
  check_dim(pool, w);
  Vector total = Vector::Zero(static_cast<Eigen::Index>(pool.dim()));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const TaskLoss& task = pool.task(i);
    total += pool.weight(i) * task.grad(w - alpha * task.grad(w));
  }
  return total;
}

Vector expected_grad(const TaskPool& pool, const Vector& w) {
  check_dim(pool, w);
  Vector total = Vector::Zero(static_cast<Eigen::Index>(pool.dim()));
  for (std::size_t i = 0; i < pool.size(); ++i) total += pool.weight(i) * pool.task(i).grad(w);
  return total;
}

}  // namespace reference

}  // namespace mamlode
