#include "mamlode/flow.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "mamlode/meta_grad.hpp"

namespace mamlode {

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::maml_ode: return "maml_ode";
    case FieldKind::fo_maml: return "fo_maml";
    case FieldKind::expected_loss_flow: return "expected_loss_flow";
    case FieldKind::bi_maml_ode: return "bi_maml_ode";
    case FieldKind::custom: return "custom";
  }
  return "unknown";
}

double VectorField::alpha() const { return std::numeric_limits<double>::quiet_NaN(); }

MamlOdeField::MamlOdeField(TaskPool pool, double alpha, Exec exec)
    : pool_(std::move(pool)), alpha_(alpha), exec_(exec) {}

Vector MamlOdeField::eval(const Vector& w) const { return -maml_grad(pool_, alpha_, w, exec_); }

FoMamlField::FoMamlField(TaskPool pool, double alpha, Exec exec)
    : pool_(std::move(pool)), alpha_(alpha), exec_(exec) {}

Vector FoMamlField::eval(const Vector& w) const { return -fo_maml_grad(pool_, alpha_, w, exec_); }

ExpectedLossField::ExpectedLossField(TaskPool pool, Exec exec)
    : pool_(std::move(pool)), exec_(exec) {}

Vector ExpectedLossField::eval(const Vector& w) const { return -expected_grad(pool_, w, exec_); }

BiMamlField::BiMamlField(TaskPool pool, double alpha, double eps0, BiphasicOrder order, Exec exec)
    : pool_(std::move(pool)), alpha_(alpha), eps0_(eps0), order_(order), exec_(exec) {
  if (!std::isfinite(eps0) || !(eps0 > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "eps0 must be finite and positive");
  }
}

void BiMamlField::begin_step(const Vector& w, double t) {
  if (order_ == BiphasicOrder::expected_loss_first) {
    if (latched()) return;
    if (expected_grad(pool_, w, exec_).norm() <= eps0_) {
      switch_time_ = t;
      phase_ = Phase::maml;
    }
    return;
  }
  const bool small = expected_grad(pool_, w, exec_).norm() <= eps0_;
  phase_ = small ? Phase::expected_loss : Phase::maml;
}

Vector BiMamlField::eval(const Vector& w) const {
  if (phase_ == Phase::expected_loss) return -expected_grad(pool_, w, exec_);
  return -maml_grad(pool_, alpha_, w, exec_);
}

std::unique_ptr<VectorField> maml_ode_field(const TaskPool& pool, double alpha) {
  return std::make_unique<MamlOdeField>(pool, alpha);
}

std::unique_ptr<BiMamlField> bi_maml_field(const TaskPool& pool, double alpha, double eps0,
                                           BiphasicOrder order) {
  return std::make_unique<BiMamlField>(pool, alpha, eps0, order);
}

Monitor pool_monitor(const TaskPool& pool, double alpha) {
  auto own = std::make_shared<TaskPool>(pool.clone());
  return [own, alpha](const Vector& w) {
    SampleStats s;
    s.F_val = maml_loss(*own, alpha, w);
    s.gradF_norm = maml_grad(*own, alpha, w).norm();
    s.gradf_norm = expected_grad(*own, w).norm();
    return s;
  };
}

Monitor field_norm_monitor(const VectorField& field) {
  return [&field](const Vector& w) {
    SampleStats s;
    s.gradF_norm = field.eval(w).norm();
    return s;
  };
}

bool diverged(const Vector& w) {
  return !w.allFinite() || (w.size() > 0 && w.cwiseAbs().maxCoeff() > kDivergenceBound);
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Step>
Trajectory run_loop(VectorField& field, const Vector& w0, double beta, const Monitor& monitor,
                    const IntegrateOptions& opts, Integrator method, Step&& step) {
  if (!std::isfinite(beta) || beta < 0.0) {
    throw Error(ErrorKind::invalid_argument, "beta must be finite and non-negative");
  }
  if (!monitor) throw Error(ErrorKind::invalid_argument, "integrator needs a monitor");
  const std::size_t every = std::max<std::size_t>(1, opts.record_every);

  Trajectory traj;
  traj.config.alpha = field.alpha();
  traj.config.beta = beta;
  traj.config.eps = opts.stop.eps;
  traj.config.max_time = opts.stop.max_time;
  traj.config.max_iters = opts.stop.max_iters;
  traj.config.integrator = method;

  const EvalCounts base = field.counts();
  std::int64_t work_ns = 0;
  Vector w = w0;
  std::size_t k = 0;
  const double time_limit = opts.stop.max_time * (1.0 - 1e-12);

  for (;;) {
    const double t = static_cast<double>(k) * beta;
    const auto start = Clock::now();
    bool bad = diverged(w);
    if (!bad) field.begin_step(w, t);
    work_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();

    TrajectorySample s;
    s.iter = static_cast<std::int64_t>(k);
    s.t = t;
    s.w = w;
    s.phase = field.phase();
    const EvalCounts used = field.counts() - base;
    s.hess_evals_cum = used.hess_evals;
    s.grad_evals_cum = used.grad_evals;
    s.wall_ns = work_ns;
    if (!bad) {
      const SampleStats stats = monitor(w);
      s.F_val = stats.F_val;
      s.gradF_norm = stats.gradF_norm;
      s.gradf_norm = stats.gradf_norm;
      bad = !std::isfinite(s.gradF_norm) || !std::isfinite(s.gradf_norm);
    } else {
      s.F_val = s.gradF_norm = s.gradf_norm = std::numeric_limits<double>::quiet_NaN();
    }

    std::optional<Termination> done;
    if (bad) {
      done = Termination::diverged;
    } else if ((opts.stop.on == StopOn::gradF ? s.gradF_norm : s.gradf_norm) <= opts.stop.eps) {
      done = Termination::converged;
    } else if (k >= opts.stop.max_iters) {
      done = Termination::iter_budget;
    } else if (t >= time_limit) {
      done = Termination::time_budget;
    }

    if (done || k % every == 0) traj.samples.push_back(std::move(s));
    if (done) {
      traj.termination = *done;
      return traj;
    }

    const auto step_start = Clock::now();
    step(w);
    work_ns +=
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - step_start).count();
    ++k;
  }
}

}  // namespace

Trajectory euler_integrate(VectorField& field, const Vector& w0, double beta,
                           const Monitor& monitor, const IntegrateOptions& opts) {
  return run_loop(field, w0, beta, monitor, opts, Integrator::euler,
                  [&](Vector& w) { w += beta * field.eval(w); });
}

Trajectory rk4_integrate(VectorField& field, const Vector& w0, double beta,
                         const Monitor& monitor, const IntegrateOptions& opts) {
  return run_loop(field, w0, beta, monitor, opts, Integrator::rk4, [&](Vector& w) {
    const Vector k1 = field.eval(w);
    const Vector k2 = field.eval(w + 0.5 * beta * k1);
    const Vector k3 = field.eval(w + 0.5 * beta * k2);
    const Vector k4 = field.eval(w + beta * k3);
    w += (beta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  });
}

Trajectory integrate(Integrator method, VectorField& field, const Vector& w0, double beta,
                     const Monitor& monitor, const IntegrateOptions& opts) {
  return method == Integrator::euler ? euler_integrate(field, w0, beta, monitor, opts)
                                     : rk4_integrate(field, w0, beta, monitor, opts);
}

}  // namespace mamlode
