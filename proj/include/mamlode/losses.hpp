#pragma once

#include <functional>
#include <memory>

#include "mamlode/task_model.hpp"

namespace mamlode {

/// f(w) = 1/2 wᵀHw + bᵀw + c with constant Hessian H.
class QuadraticLoss final : public TaskLoss {
 public:
  /// H must be square, symmetric to 1e-10 (it is symmetrized exactly) and
  /// match b in size.
  QuadraticLoss(Matrix H, Vector b, double c = 0.0);

  const Matrix& H() const noexcept { return H_; }
  const Vector& b() const noexcept { return b_; }
  double c() const noexcept { return c_; }

  bool analytic_hessian() const override { return true; }
  std::string kind() const override { return "quadratic"; }
  std::unique_ptr<TaskLoss> clone() const override;

 protected:
  double do_value(const Vector& w) const override;
  Vector do_grad(const Vector& w) const override;
  Matrix do_hess(const Vector& w) const override;

 private:
  Matrix H_;
  Vector b_;
  double c_;
};

/// Scalar f(w) = a w² + amp sin(freq w).
class SinusoidalQuadraticLoss final : public TaskLoss {
 public:
  SinusoidalQuadraticLoss(double a, double amp, double freq);

  double a() const noexcept { return a_; }
  double amp() const noexcept { return amp_; }
  double freq() const noexcept { return freq_; }

  /// Bounds of f'' over the real line: [2a - |amp| freq², 2a + |amp| freq²].
  double min_curvature() const noexcept;
  double max_curvature() const noexcept;
  /// sup |f'''| = |amp| freq³.
  double hessian_lipschitz() const noexcept;

  bool analytic_hessian() const override { return true; }
  std::string kind() const override { return "sinusoidal_quadratic"; }
  std::unique_ptr<TaskLoss> clone() const override;

 protected:
  double do_value(const Vector& w) const override;
  Vector do_grad(const Vector& w) const override;
  Matrix do_hess(const Vector& w) const override;

 private:
  double a_, amp_, freq_;
};

/// Average of the quadratically smoothed hinge over the samples:
///   f(w) = (1/n) Σ φ_δ(1 - y_j x_jᵀw),
///   φ_δ(z) = 0 (z <= 0), z²/(2δ) (0 < z < δ), z - δ/2 (z >= δ).
class SmoothedHingeLoss final : public TaskLoss {
 public:
  SmoothedHingeLoss(Matrix X, Vector y, double delta);

  const Matrix& X() const noexcept { return X_; }
  const Vector& y() const noexcept { return y_; }
  double delta() const noexcept { return delta_; }

  bool analytic_hessian() const override { return true; }
  std::string kind() const override { return "smoothed_hinge"; }
  std::unique_ptr<TaskLoss> clone() const override;

 protected:
  double do_value(const Vector& w) const override;
  Vector do_grad(const Vector& w) const override;
  Matrix do_hess(const Vector& w) const override;

 private:
  Matrix X_;
  Vector y_;
  double delta_;
};

/// Plain averaged hinge (1/n) Σ max(0, 1 - y_j x_jᵀw). Not twice
/// differentiable: grad returns a subgradient and hess returns zero, so pools
/// built from it are never admitted to the bound checks.
class HingeLoss final : public TaskLoss {
 public:
  HingeLoss(Matrix X, Vector y);

  bool analytic_hessian() const override { return false; }
  std::string kind() const override { return "hinge"; }
  std::unique_ptr<TaskLoss> clone() const override;

 protected:
  double do_value(const Vector& w) const override;
  Vector do_grad(const Vector& w) const override;
  Matrix do_hess(const Vector& w) const override;

 private:
  Matrix X_;
  Vector y_;
};

/// Loss known only through its values; derivatives by central differences
/// with steps scaled by max(1, ‖w‖∞).
class FiniteDiffLoss final : public TaskLoss {
 public:
  using ValueFn = std::function<double(const Vector&)>;

  static constexpr double kDefaultGradStep = 1e-5;
  static constexpr double kDefaultHessStep = 1e-4;

  FiniteDiffLoss(std::size_t dim, ValueFn value_fn, double h_grad = kDefaultGradStep,
                 double h_hess = kDefaultHessStep);

  bool analytic_hessian() const override { return false; }
  std::string kind() const override { return "finite_diff"; }
  std::unique_ptr<TaskLoss> clone() const override;

 protected:
  double do_value(const Vector& w) const override;
  Vector do_grad(const Vector& w) const override;
  Matrix do_hess(const Vector& w) const override;

 private:
  ValueFn value_fn_;
  double h_grad_, h_hess_;
};

/// f(γ) = 1/(2n) ‖y - Xγ‖², i.e. H = XᵀX/n, b = -Xᵀy/n, c = yᵀy/(2n).
std::shared_ptr<QuadraticLoss> quadratic_from_regression(const Matrix& X, const Vector& y);

/// Two uniformly weighted scalar tasks whose MAML loss is non-convex:
/// f₁ = 0.505w² - sin(w), f₂ = 0.505w² - 0.0001 sin(100w).
TaskPool counterexample_pool();

/// Uniform pool {½(w-1)², ½(w+1)²} used throughout the worked examples.
TaskPool symmetric_pair_pool();

std::shared_ptr<SmoothedHingeLoss> smoothed_hinge(const Matrix& X, const Vector& y,
                                                  double delta = 0.1);

/// Central-difference gradient of loss.value with step h (absolute).
/// Throws Error(non_finite, "evaluation overflow") on a non-finite value.
Vector finite_diff_grad(const TaskLoss& loss, const Vector& w, double h);
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& w, double h);

/// Central-difference Hessian, symmetrized as (A + Aᵀ)/2.
Matrix finite_diff_hess(const TaskLoss& loss, const Vector& w, double h);
Matrix finite_diff_hess(const std::function<double(const Vector&)>& f, const Vector& w, double h);

/// Central-difference Jacobian of a vector field, symmetrized. Used for the
/// Hessian of F from its gradient.
Matrix finite_diff_jacobian_sym(const std::function<Vector(const Vector&)>& g, const Vector& w,
                                double h);

/// h·max(1, ‖w‖∞).
double scaled_step(double h, const Vector& w);

}  // namespace mamlode
