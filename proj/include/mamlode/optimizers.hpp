#pragma once

#include "mamlode/flow.hpp"
#include "mamlode/task_model.hpp"

// Discrete training loops. Each is the forward Euler discretization of the
// matching field in flow.hpp with step β, so they share one loop. Counters in
// the samples charge only the work that produces the descent directions; the
// recorded F, ‖∇F‖ and ‖∇f‖ come from an uncounted monitor.

namespace mamlode {

/// w ← w - β∇f(w) until ‖∇f‖ <= eps0.
Trajectory run_gd_f(const TaskPool& pool, const MamlConfig& config, const Vector& w0);

/// w ← w - β∇F(w) until ‖∇F‖ <= eps.
Trajectory run_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0);

/// w ← w - β E[∇f_i(w - α∇f_i(w))] until ‖∇F‖ <= eps. May stall away from
/// the critical points of F; it then stops on a budget.
Trajectory run_fo_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0);

/// Expected-loss descent while ‖∇f‖ > eps0, then (latched) MAML descent,
/// until ‖∇F‖ <= eps.
Trajectory run_bi_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0,
                       BiphasicOrder order = BiphasicOrder::expected_loss_first);

/// Continuous-time versions with config.integrator; β is the integration step.
Trajectory run_maml_ode(const TaskPool& pool, const MamlConfig& config, const Vector& w0);
Trajectory run_bi_maml_ode(const TaskPool& pool, const MamlConfig& config, const Vector& w0);

}  // namespace mamlode
