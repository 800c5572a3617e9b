#include "mamlode/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mamlode/losses.hpp"
#include "mamlode/meta_grad.hpp"
#include "mamlode/optimizers.hpp"

namespace mamlode {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

std::string alpha_cond(double alpha, const char* op, double bound, const std::string& name) {
  return "alpha " + std::string(op) + " " + name + " = " + fmt(bound) + " (alpha = " + fmt(alpha) + ")";
}

CheckResult make(const std::string& check, bool hypothesis_holds, std::string hypothesis) {
  CheckResult r;
  r.check = check;
  r.hypothesis = std::move(hypothesis);
  if (!hypothesis_holds) r.status = CheckStatus::hypothesis_violated;
  return r;
}

// Status from a pointwise report, leaving hypothesis-violated alone.
void settle(CheckResult& r, const PointwiseReport& p) {
  r.margin = p.min_margin;
  r.details["checked"] = p.checked;
  r.details["violations"] = p.violations;
  r.details["min_margin"] = number_or_null(p.min_margin);
  if (r.status == CheckStatus::hypothesis_violated) return;
  if (p.checked == 0) {
    r.status = CheckStatus::inconclusive;
  } else {
    r.status = p.violations == 0 ? CheckStatus::pass : CheckStatus::fail;
  }
}

Trajectory ode_run(VectorField& field, const TaskPool& pool, double alpha, const Vector& w0,
                   double beta, double eps, double max_time, std::size_t record_every = 1) {
  IntegrateOptions io;
  io.stop.eps = eps;
  io.stop.max_time = max_time;
  io.stop.max_iters = static_cast<std::size_t>(std::ceil(max_time / beta)) + 1;
  io.record_every = record_every;
  return rk4_integrate(field, w0, beta, pool_monitor(pool, alpha), io);
}

std::vector<Vector> iterates(const Trajectory& t, std::size_t stride) {
  std::vector<Vector> out;
  for (std::size_t k = 0; k < t.samples.size(); k += std::max<std::size_t>(1, stride)) {
    if (t.samples[k].w.allFinite()) out.push_back(t.samples[k].w);
  }
  if (!t.samples.empty() && t.back().w.allFinite()) out.push_back(t.back().w);
  return out;
}

Trajectory subsample(const Trajectory& t, std::size_t max_samples) {
  Trajectory out;
  out.termination = t.termination;
  out.config = t.config;
  const std::size_t stride = std::max<std::size_t>(1, t.samples.size() / std::max<std::size_t>(1, max_samples));
  for (std::size_t k = 0; k < t.samples.size(); k += stride) out.samples.push_back(t.samples[k]);
  return out;
}

json box_json(const Box& b) {
  return {{"lo", std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size())},
          {"hi", std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size())}};
}

struct Context {
  const RunConfig& cfg;
  const TaskPool& pool;
  double alpha;
  const SmoothnessConstants& c;
  bool sc;  // μ > 0
  const Trajectory& flow;  // fixed-horizon MAML ODE trajectory
};

std::string sc_hypothesis(const Context& x) { return "mu > 0 (mu = " + fmt(x.c.mu) + ")"; }

CheckResult check_constants(const Context& x) {
  CheckResult r = make("constants", x.sc, sc_hypothesis(x));
  if (x.sc) r.status = CheckStatus::pass;
  r.margin = x.c.mu;
  r.details = {{"L", x.c.L},         {"mu", x.c.mu},     {"kappa", x.c.kappa},
               {"sigma", x.c.sigma}, {"f_star", x.c.f_star}, {"exact", x.c.exact},
               {"region", box_json(x.c.region)}};
  return r;
}

CheckResult check_gradient_consistency(const Context& x) {
  const bool quad = all_quadratic(x.pool);
  const double tol = quad ? 1e-6 : 1e-4;
  CheckResult r = make("gradient_consistency", true, "none");
  const TaskPool own = x.pool.clone();
  std::mt19937_64 rng(x.cfg.seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const double scale = std::max(1.0, x.cfg.w0.cwiseAbs().maxCoeff());
  double worst = 0.0;
  const std::size_t probes = 50;
  for (std::size_t k = 0; k < probes; ++k) {
    Vector w = x.cfg.w0;
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] += scale * N(rng);
    const Vector g = maml_grad(own, x.alpha, w);
    const Vector fd = finite_diff_grad([&](const Vector& v) { return maml_loss(own, x.alpha, v); }, w,
                                       scaled_step(1e-5, w));
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-8));
  }
  r.margin = tol - worst;
  r.status = worst < tol ? CheckStatus::pass : CheckStatus::fail;
  r.details = {{"probes", probes}, {"max_relative_error", worst}, {"tolerance", tol}};
  return r;
}

CheckResult check_euler_equivalence(const Context& x) {
  CheckResult r = make("euler_equivalence", true, "none");
  MamlConfig one = x.cfg.maml;
  one.max_iters = 1;
  one.eps = 0.0;
  const Trajectory discrete = run_maml(x.pool, one, x.cfg.w0);
  MamlOdeField field(x.pool.clone(), x.alpha);
  IntegrateOptions io;
  io.stop.eps = 0.0;
  io.stop.max_iters = 1;
  const Trajectory flow = euler_integrate(field, x.cfg.w0, one.beta, pool_monitor(x.pool, x.alpha), io);
  if (discrete.samples.size() < 2 || flow.samples.size() < 2) {
    r.status = CheckStatus::inconclusive;
    r.details["reason"] = "run stopped before one step";
    return r;
  }
  const Vector& a = discrete.samples[1].w;
  const Vector& b = flow.samples[1].w;
  const double rel = (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
  r.margin = 1e-15 - rel;
  r.status = (a - b).norm() <= 1e-15 * b.norm() ? CheckStatus::pass : CheckStatus::fail;
  r.details = {{"relative_difference", rel}, {"beta", one.beta}};
  return r;
}

// Phase sequence expected_loss* maml*, no Hessians in the first phase, and
// the latch closes only once ‖∇f‖ <= ε₀.
bool phases_ok(const Trajectory& t, double eps0, json& d) {
  bool ok = true;
  bool in_maml = false;
  std::size_t switch_iter = 0;
  for (const auto& s : t.samples) {
    if (s.phase == Phase::maml) {
      if (!in_maml) {
        in_maml = true;
        switch_iter = static_cast<std::size_t>(s.iter);
        ok = ok && s.gradf_norm <= eps0;
      }
    } else {
      ok = ok && !in_maml && s.hess_evals_cum == 0;
    }
  }
  d["switched"] = in_maml;
  d["switch_iter"] = switch_iter;
  return ok;
}

CheckResult check_biphasic_phases(const Context& x) {
  CheckResult r = make("biphasic_phases", true, "none");
  MamlConfig cfg = x.cfg.maml;
  cfg.max_iters = std::min<std::size_t>(cfg.max_iters, 5000);
  json disc, cont;
  const bool a = phases_ok(run_bi_maml(x.pool, cfg, x.cfg.w0), cfg.eps0, disc);
  cfg.max_time = std::min(cfg.max_time, static_cast<double>(cfg.max_iters) * cfg.beta);
  const bool b = phases_ok(run_bi_maml_ode(x.pool, cfg, x.cfg.w0), cfg.eps0, cont);
  r.status = a && b ? CheckStatus::pass : CheckStatus::fail;
  r.details = {{"bi_maml", disc}, {"bi_maml_ode", cont}};
  return r;
}

CheckResult check_lyapunov_descent(const Context& x) {
  const double cap = 1.0 / (2.0 * x.c.L);
  const bool hyp = x.sc && x.alpha < cap;
  CheckResult r = make("lyapunov", hyp, alpha_cond(x.alpha, "<", cap, "1/(2L)"));
  if (x.flow.samples.size() < 3) {
    if (hyp) r.status = CheckStatus::inconclusive;
    r.details["reason"] = "trajectory shorter than three samples";
    return r;
  }
  const LyapunovReport rep = check_lyapunov(x.flow, x.c, x.alpha);
  r.margin = -rep.max_excess;
  r.details = {{"checked", rep.checked},
               {"violations", rep.violations},
               {"max_normalized_excess", number_or_null(rep.max_excess)},
               {"worst_t", rep.worst_t},
               {"zeta", lyapunov_rate(x.c, x.alpha)}};
  if (hyp) r.status = rep.violations == 0 ? CheckStatus::pass : CheckStatus::fail;
  return r;
}

CheckResult check_gradient_envelope(const Context& x) {
  const double cap = 1.0 / (2.0 * x.c.L);
  const double zeta = lyapunov_rate(x.c, x.alpha);
  const bool hyp = x.sc && x.alpha < cap && zeta > 0.0;
  CheckResult r = make("envelope", hyp,
                       alpha_cond(x.alpha, "<", cap, "1/(2L)") + " and zeta = " + fmt(zeta) + " > 0");
  if (!hyp) return r;
  settle(r, check_envelope(x.flow, x.c, x.alpha));
  const Envelope env = envelope(x.c, x.alpha, x.flow.samples.front().gradf_norm * x.flow.samples.front().gradf_norm);
  r.details["asymptote"] = env.asymptote();
  r.details["sigma_sq_over_mu"] = x.c.sigma * x.c.sigma / x.c.mu;
  r.details["constant_envelope"] = env.constant();
  return r;
}

CheckResult check_transfer_forward(const Context& x) {
  CheckResult r = make("norm_transfer_forward", true, "none beyond the certified constants");
  settle(r, check_norm_transfer(x.flow, x.c, x.alpha).forward);
  return r;
}

CheckResult check_transfer_backward(const Context& x) {
  const double cap = 1.0 / (4.0 * x.c.L);
  const bool hyp = x.alpha < cap;
  CheckResult r = make("norm_transfer_backward", hyp, alpha_cond(x.alpha, "<", cap, "1/(4L)"));
  if (!hyp) return r;
  settle(r, check_norm_transfer(x.flow, x.c, x.alpha).backward);
  return r;
}

CheckResult check_correction(const Context& x) {
  const double cap = 1.0 / (2.0 * x.c.L);
  const bool hyp = x.sc && x.alpha < cap;
  CheckResult r = make("correction_bound", hyp, alpha_cond(x.alpha, "<", cap, "1/(2L)"));
  if (!hyp) return r;
  settle(r, check_correction_bound(x.pool, subsample(x.flow, 200), x.c, x.alpha));
  return r;
}

CheckResult check_time_maml(const Context& x) {
  const double eps = x.cfg.verify.eps;
  double bound_alpha = 0.0;
  if (x.sc) bound_alpha = alpha_bound_maml_ode(x.c);
  const bool hyp = x.sc && x.alpha < bound_alpha;
  CheckResult r = make("time_bound_maml_ode", hyp,
                       alpha_cond(x.alpha, "<", bound_alpha, "maml ode step-size bound"));
  if (x.sc) r.details["alpha_bound_as_printed"] = alpha_bound_maml_ode(x.c, ConvergenceBoundForm::as_printed);
  if (!hyp) return r;
  const double g0 = x.flow.samples.front().gradf_norm;
  const auto bound = time_bound_maml_ode(x.c, x.alpha, g0, eps);
  if (!bound) {
    r.status = CheckStatus::inconclusive;
    r.details["reason"] = "time bound not applicable (sigma = 0 or iota <= 0)";
    return r;
  }
  MamlOdeField field(x.pool.clone(), x.alpha);
  const double beta = x.cfg.verify.beta;
  const Trajectory t = ode_run(field, x.pool, x.alpha, x.cfg.w0, beta, eps, *bound + beta, 1000);
  r.details["time_bound"] = *bound;
  r.details["eps"] = eps;
  if (t.termination != Termination::converged) {
    r.status = CheckStatus::fail;
    r.margin = -beta;
    r.details["reason"] = "not converged within the bound";
    return r;
  }
  r.details["observed_time"] = t.back().t;
  r.margin = *bound - t.back().t;
  r.status = t.back().t <= *bound ? CheckStatus::pass : CheckStatus::fail;
  return r;
}

CheckResult check_time_bi_maml(const Context& x) {
  const double eps = x.cfg.verify.eps;
  const double eps0 = x.cfg.maml.eps0;
  double bound_alpha = 0.0;
  if (x.sc) bound_alpha = alpha_bound_bi_maml_ode(x.c, eps0);
  const bool hyp = x.sc && x.alpha < bound_alpha;
  CheckResult r = make("time_bound_bi_maml_ode", hyp,
                       alpha_cond(x.alpha, "<", bound_alpha, "bi-maml ode step-size bound"));
  if (!hyp) return r;
  const double g0 = x.flow.samples.front().gradf_norm;
  const double bound = time_bound_bi_maml_ode(x.c, x.alpha, eps0, g0, eps);
  BiMamlField field(x.pool.clone(), x.alpha, eps0);
  const double beta = x.cfg.verify.beta;
  const Trajectory t = ode_run(field, x.pool, x.alpha, x.cfg.w0, beta, eps, bound + beta, 1000);
  r.details["time_bound"] = bound;
  r.details["eps"] = eps;
  r.details["eps0"] = eps0;
  if (field.switch_time()) r.details["switch_time"] = *field.switch_time();
  if (t.termination != Termination::converged) {
    r.status = CheckStatus::fail;
    r.margin = -beta;
    r.details["reason"] = "not converged within the bound";
    return r;
  }
  r.details["observed_time"] = t.back().t;
  r.margin = bound - t.back().t;
  r.status = t.back().t <= bound ? CheckStatus::pass : CheckStatus::fail;
  return r;
}

CheckResult window_result(const std::string& name, const Context& x, WindowRegion region) {
  const double K = x.cfg.verify.K;
  if (!x.sc) return make(name, false, sc_hypothesis(x));
  ProbeOptions po;
  po.seed = x.cfg.seed;
  const HessWindowReport rep = hess_window_check(x.pool, x.alpha, x.c, K, x.cfg.verify.probes, po, region);
  CheckResult r = make(name, rep.hypothesis_holds,
                       alpha_cond(x.alpha, "<=", rep.alpha_bound, "window step-size bound"));
  r.status = rep.status;
  if (rep.probes > 0) r.margin = std::min(rep.min_eig - x.c.mu / 8.0, 9.0 * x.c.L / 8.0 - rep.max_eig);
  r.details = {{"K", K},
               {"probes", rep.probes},
               {"violations", rep.violations},
               {"min_eig", number_or_null(rep.min_eig)},
               {"max_eig", number_or_null(rep.max_eig)},
               {"lower", rep.lower},
               {"upper", rep.upper}};
  return r;
}

CheckResult check_inclusions(const Context& x) {
  if (!x.sc) return make("region_inclusions", false, sc_hypothesis(x));
  ProbeOptions po;
  po.seed = x.cfg.seed;
  const InclusionReport rep =
      check_region_inclusions(x.pool, x.alpha, x.c, x.cfg.verify.K, x.cfg.verify.inclusion_samples, po);
  CheckResult r = make("region_inclusions", rep.status != CheckStatus::hypothesis_violated,
                       alpha_cond(x.alpha, "<", 1.0 / (4.0 * x.c.L), "1/(4L)"));
  r.status = rep.status;
  r.details = {{"samples", rep.samples}, {"in_U", rep.in_U},         {"u_not_in_v", rep.u_not_in_v},
               {"in_V", rep.in_V},       {"v_not_in_u", rep.v_not_in_u}, {"K", rep.K},
               {"K_prime", rep.K_prime}};
  return r;
}

CheckResult check_existence(const Context& x) {
  const double cap = 1.0 / (4.0 * x.c.L);
  const bool hyp = x.sc && x.alpha < cap;
  CheckResult r = make("critical_point_existence", hyp, alpha_cond(x.alpha, "<", cap, "1/(4L)"));
  if (!hyp) return r;
  MamlOdeField field(x.pool.clone(), x.alpha);
  const Trajectory t = ode_run(field, x.pool, x.alpha, x.cfg.w0, x.cfg.verify.uniqueness_step, 1e-8,
                               1e4, std::numeric_limits<std::size_t>::max());
  r.status = t.termination == Termination::converged ? CheckStatus::pass : CheckStatus::inconclusive;
  r.details = {{"termination", to_string(t.termination)},
               {"t_final", t.back().t},
               {"gradF_norm", number_or_null(t.back().gradF_norm)}};
  return r;
}

CheckResult check_uniqueness(const Context& x) {
  if (!x.sc) return make("unique_minimum", false, sc_hypothesis(x));
  UniquenessOptions uo;
  uo.beta = x.cfg.verify.uniqueness_step;
  uo.seed = x.cfg.seed;
  const Box box = cube(x.pool.dim(), x.cfg.verify.box_lo, x.cfg.verify.box_hi);
  const UniquenessReport rep =
      uniqueness_probe(x.pool, x.alpha, x.c, x.cfg.verify.starts, box, x.cfg.verify.uniqueness_tol, uo);
  CheckResult r = make("unique_minimum", rep.hypothesis_holds,
                       alpha_cond(x.alpha, "<=", rep.alpha_bound, "unique-minimum step-size bound"));
  r.status = rep.status;
  r.margin = x.cfg.verify.uniqueness_tol - rep.max_pairwise_distance;
  r.details = {{"runs", rep.runs},
               {"converged", rep.converged},
               {"max_pairwise_distance", rep.max_pairwise_distance},
               {"K", rep.K},
               {"v_level", rep.v_level},
               {"f_gap", rep.f_gap},
               {"terminal_in_V", rep.terminal_in_V}};
  return r;
}

CheckResult check_counterexample(const Context&) {
  CheckResult r = make("counterexample_scan", true, "none");
  const TaskPool pool = counterexample_pool();
  const CurvatureScan bent = scan_curvature_1d(pool, 0.4, -3.0, 3.0, 1e-3);
  const CurvatureScan flat = scan_curvature_1d(pool, 0.0, -3.0, 3.0, 1e-3);
  const bool nonconvex = bent.min_d2F < 0.0 && bent.slope_sign_changes >= 3;
  const bool convex_without_step = flat.min_d2F >= 0.01 - 1e-6;
  r.status = nonconvex && convex_without_step ? CheckStatus::pass : CheckStatus::fail;
  r.margin = -bent.min_d2F;
  r.details = {{"alpha", 0.4},
               {"min_F_second", bent.min_d2F},
               {"argmin", bent.argmin_d2F},
               {"slope_sign_changes", bent.slope_sign_changes},
               {"min_F_second_alpha0", flat.min_d2F}};
  return r;
}

}  // namespace

json to_json(const CheckResult& r) {
  return {{"check", r.check},
          {"status", to_string(r.status)},
          {"margin", number_or_null(r.margin)},
          {"hypothesis", r.hypothesis},
          {"details", r.details}};
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "constants",
      "gradient_consistency",
      "euler_equivalence",
      "biphasic_phases",
      "lyapunov",
      "envelope",
      "norm_transfer_forward",
      "norm_transfer_backward",
      "correction_bound",
      "time_bound_maml_ode",
      "time_bound_bi_maml_ode",
      "strong_convexity_window",
      "hessian_window_expected_gradient",
      "region_inclusions",
      "critical_point_existence",
      "unique_minimum",
      "counterexample_scan",
  };
  return names;
}

bool VerifyOutcome::failed() const {
  return std::any_of(checks.begin(), checks.end(),
                     [](const CheckResult& r) { return r.status == CheckStatus::fail; });
}

json VerifyOutcome::report() const {
  json out = json::array();
  for (const auto& c : checks) out.push_back(to_json(c));
  return out;
}

VerifyOutcome run_verification(const RunConfig& cfg) {
  const auto& wanted = cfg.verify.checks.empty() ? check_names() : cfg.verify.checks;
  for (const auto& name : wanted) {
    if (std::find(check_names().begin(), check_names().end(), name) == check_names().end()) {
      throw Error(ErrorKind::config, "verify.checks: unknown check '" + name + "'");
    }
  }
  const TaskPool& pool = cfg.pool;
  const double alpha = cfg.maml.alpha;

  MamlOdeField field(pool.clone(), alpha);
  const Trajectory flow =
      ode_run(field, pool, alpha, cfg.w0, cfg.verify.beta, 0.0, cfg.verify.horizon);

  VerifyOutcome out;
  const Box region = cfg.region ? *cfg.region : box_hull(flow, cfg.verify.region_margin);
  ConstantsOptions co = cfg.constants;
  if (!all_quadratic(pool)) {
    for (auto& w : iterates(flow, 10)) co.extra_points.push_back(std::move(w));
  }
  out.constants = probe_constants(pool, region, co);
  out.strongly_convex = out.constants.mu > 0.0;

  const Context x{cfg, pool, alpha, out.constants, out.strongly_convex, flow};
  for (const auto& name : check_names()) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    if (name == "constants") out.checks.push_back(check_constants(x));
    else if (name == "gradient_consistency") out.checks.push_back(check_gradient_consistency(x));
    else if (name == "euler_equivalence") out.checks.push_back(check_euler_equivalence(x));
    else if (name == "biphasic_phases") out.checks.push_back(check_biphasic_phases(x));
    else if (name == "lyapunov") out.checks.push_back(check_lyapunov_descent(x));
    else if (name == "envelope") out.checks.push_back(check_gradient_envelope(x));
    else if (name == "norm_transfer_forward") out.checks.push_back(check_transfer_forward(x));
    else if (name == "norm_transfer_backward") out.checks.push_back(check_transfer_backward(x));
    else if (name == "correction_bound") out.checks.push_back(check_correction(x));
    else if (name == "time_bound_maml_ode") out.checks.push_back(check_time_maml(x));
    else if (name == "time_bound_bi_maml_ode") out.checks.push_back(check_time_bi_maml(x));
    else if (name == "strong_convexity_window")
      out.checks.push_back(window_result(name, x, WindowRegion::maml_gradient));
    else if (name == "hessian_window_expected_gradient")
      out.checks.push_back(window_result(name, x, WindowRegion::expected_gradient));
    else if (name == "region_inclusions") out.checks.push_back(check_inclusions(x));
    else if (name == "critical_point_existence") out.checks.push_back(check_existence(x));
    else if (name == "unique_minimum") out.checks.push_back(check_uniqueness(x));
    else if (name == "counterexample_scan") out.checks.push_back(check_counterexample(x));
  }
  return out;
}

}  // namespace mamlode
