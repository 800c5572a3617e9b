#pragma once

#include "mamlode/task_model.hpp"

// The MAML loss of a pool,
//
//   F(w) = Σ_i p_i f_i(w - α∇f_i(w)),
//
// its gradient by the exact chain rule
//
//   ∇F(w) = Σ_i p_i A_i(w) ∇f_i(w - α∇f_i(w)),   A_i(w) = I - α∇²f_i(w),
//
// the first-order approximation that drops A_i, and the Hessian of F.
//
// The mean-value form ∇F = ∇f - E[B_i ∇f_i] with
// B_i = α(∇²f_i(w) + ∇²f_i(w̃_i)) - α²∇²f_i(w)∇²f_i(w̃_i) is an analysis device:
// w̃_i is only known to exist, so nothing here evaluates B_i. The identity is
// still usable numerically through E[B_i ∇f_i] = ∇f - ∇F.

namespace mamlode {

/// w - α∇f_i(w). One gradient evaluation.
Vector inner_step(const TaskLoss& task, double alpha, const Vector& w);

/// F_i(w) = f_i(w - α∇f_i(w)).
double maml_task_loss(const TaskLoss& task, double alpha, const Vector& w);

/// A_i(w) = I - α∇²f_i(w).
Matrix correction_matrix(const TaskLoss& task, double alpha, const Vector& w);

double maml_loss(const TaskPool& pool, double alpha, const Vector& w, Exec exec = Exec::parallel);

/// Charges exactly one Hessian and two gradient evaluations per task.
Vector maml_grad(const TaskPool& pool, double alpha, const Vector& w, Exec exec = Exec::parallel);

/// Σ p_i ∇f_i(w - α∇f_i(w)). Never evaluates a Hessian.
Vector fo_maml_grad(const TaskPool& pool, double alpha, const Vector& w,
                    Exec exec = Exec::parallel);

/// Hessian of F. Closed form Σ p_i (I - αH_i) H_i (I - αH_i) when every task is
/// quadratic; otherwise the symmetrized central-difference Jacobian of
/// maml_grad with step 1e-4·max(1, ‖w‖∞).
Matrix maml_hess(const TaskPool& pool, double alpha, const Vector& w, Exec exec = Exec::parallel);

bool all_quadratic(const TaskPool& pool);

inline constexpr double kMamlHessStep = 1e-4;

/// Plain serial implementations that spell out each formula with explicit
/// matrices. Kept as the oracle for the OpenMP kernels above.
namespace reference {

double maml_loss(const TaskPool& pool, double alpha, const Vector& w);
Vector maml_grad(const TaskPool& pool, double alpha, const Vector& w);
Vector fo_maml_grad(const TaskPool& pool, double alpha, const Vector& w);
Vector expected_grad(const TaskPool& pool, const Vector& w);

}  // namespace reference

}  // namespace mamlode
