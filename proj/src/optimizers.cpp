#include "mamlode/optimizers.hpp"

namespace mamlode {

namespace {

IntegrateOptions options_from(const MamlConfig& config, double eps, StopOn on) {
  IntegrateOptions opts;
  opts.stop.eps = eps;
  opts.stop.on = on;
  opts.stop.max_iters = config.max_iters;
  opts.stop.max_time = config.max_time;
  return opts;
}

Trajectory finish(Trajectory traj, const MamlConfig& config, Integrator used) {
  traj.config = config;
  traj.config.integrator = used;
  return traj;
}

// The discrete loops also accept the degenerate α = 0 (plain GD on f) and
// β = 0 (the iterate never moves). eps = 0 runs to the budget, here and in
// the ODE runs.
void validate_loop_config(const MamlConfig& config) {
  MamlConfig probe = config;
  if (probe.beta == 0.0) probe.beta = 1.0;
  if (probe.alpha == 0.0) probe.alpha = 1.0;
  if (probe.eps == 0.0) probe.eps = 1.0;
  probe.validate();
}

void validate_ode_config(const MamlConfig& config) {
  MamlConfig probe = config;
  if (probe.eps == 0.0) probe.eps = 1.0;
  probe.validate();
}

}  // namespace

Trajectory run_gd_f(const TaskPool& pool, const MamlConfig& config, const Vector& w0) {
  validate_loop_config(config);
  ExpectedLossField field(pool);
  auto traj = euler_integrate(field, w0, config.beta, pool_monitor(pool, config.alpha),
                              options_from(config, config.eps0, StopOn::gradf));
  return finish(std::move(traj), config, Integrator::euler);
}

Trajectory run_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0) {
  validate_loop_config(config);
  MamlOdeField field(pool, config.alpha);
  auto traj = euler_integrate(field, w0, config.beta, pool_monitor(pool, config.alpha),
                              options_from(config, config.eps, StopOn::gradF));
  return finish(std::move(traj), config, Integrator::euler);
}

Trajectory run_fo_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0) {
  validate_loop_config(config);
  FoMamlField field(pool, config.alpha);
  auto traj = euler_integrate(field, w0, config.beta, pool_monitor(pool, config.alpha),
                              options_from(config, config.eps, StopOn::gradF));
  return finish(std::move(traj), config, Integrator::euler);
}

Trajectory run_bi_maml(const TaskPool& pool, const MamlConfig& config, const Vector& w0,
                       BiphasicOrder order) {
  validate_loop_config(config);
  BiMamlField field(pool, config.alpha, config.eps0, order);
  auto traj = euler_integrate(field, w0, config.beta, pool_monitor(pool, config.alpha),
                              options_from(config, config.eps, StopOn::gradF));
  return finish(std::move(traj), config, Integrator::euler);
}

Trajectory run_maml_ode(const TaskPool& pool, const MamlConfig& config, const Vector& w0) {
  validate_ode_config(config);
  MamlOdeField field(pool, config.alpha);
  auto traj = integrate(config.integrator, field, w0, config.beta,
                        pool_monitor(pool, config.alpha),
                        options_from(config, config.eps, StopOn::gradF));
  return finish(std::move(traj), config, config.integrator);
}

Trajectory run_bi_maml_ode(const TaskPool& pool, const MamlConfig& config, const Vector& w0) {
  validate_ode_config(config);
  BiMamlField field(pool, config.alpha, config.eps0);
  auto traj = integrate(config.integrator, field, w0, config.beta,
                        pool_monitor(pool, config.alpha),
                        options_from(config, config.eps, StopOn::gradF));
  return finish(std::move(traj), config, config.integrator);
}

}  // namespace mamlode
