#include "mamlode/diagnostics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "mamlode/losses.hpp"
#include "mamlode/meta_grad.hpp"
#include "parallel.hpp"

namespace mamlode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// a/b with a zero denominator read as +∞.
double ratio_or_inf(double num, double den) { return den > 0.0 ? num / den : kInf; }

std::pair<double, double> eig_extremes(const Matrix& H) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double spectral_norm_sym(const Matrix& H) {
  auto [lo, hi] = eig_extremes(H);
  return std::max(std::abs(lo), std::abs(hi));
}

double variance_at(const TaskPool& pool, const Vector& w) {
  std::vector<Vector> grads(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) grads[i] = pool.task(i).grad(w);
  const Vector mean = detail::weighted_sum(pool.weights(), grads);
  double v = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) v += pool.weight(i) * (grads[i] - mean).squaredNorm();
  return v;
}

const QuadraticLoss* as_quadratic(const TaskLoss& t) {
  return dynamic_cast<const QuadraticLoss*>(&t);
}

void require_region(const Box& region, std::size_t dim) {
  if (region.lo.size() == 0 || region.lo.size() != region.hi.size()) {
    throw Error(ErrorKind::invalid_argument, "region must be a non-empty box");
  }
  if (region.dim() != dim) {
    throw Error(ErrorKind::dimension_mismatch, "region dimension does not match the pool");
  }
  if (!region.lo.allFinite() || !region.hi.allFinite() || (region.hi.array() < region.lo.array()).any()) {
    throw Error(ErrorKind::invalid_argument, "region bounds must be finite with lo <= hi");
  }
}

// Largest Σ p_i ‖D_i w + e_i‖² over the box vertices, walking them in Gray-code
// order so each step is O(d). The function is convex, so a vertex attains the
// supremum over the box.
double quadratic_variance_vertices(const Matrix& Q, const Vector& r, double s, const Box& box) {
  const std::size_t d = box.dim();
  Vector w = box.lo;
  Vector Qw = Q * w;
  auto value = [&] { return w.dot(Qw) + 2.0 * r.dot(w) + s; };
  double best = value();
  const std::uint64_t count = std::uint64_t{1} << d;
  for (std::uint64_t k = 1; k < count; ++k) {
    const auto j = static_cast<Eigen::Index>(std::countr_zero(k));
    const double delta = w[j] == box.lo[j] ? box.hi[j] - box.lo[j] : box.lo[j] - box.hi[j];
    w[j] = w[j] == box.lo[j] ? box.hi[j] : box.lo[j];
    Qw += delta * Q.col(j);
    if ((k & 0xFFFF) == 0) Qw = Q * w;
    best = std::max(best, value());
  }
  return best;
}

// E(‖D_i c + e_i‖ + ‖D_i‖₂ ‖h‖)² with c the box centre and h its half-width:
// an upper bound on the variance anywhere in the box.
double quadratic_variance_bound(const std::vector<Matrix>& D, const std::vector<Vector>& e,
                                const std::vector<double>& p, const Box& box) {
  const Vector c = box.center();
  const double h = (0.5 * (box.hi - box.lo)).norm();
  double v = 0.0;
  for (std::size_t i = 0; i < D.size(); ++i) {
    const double a = (D[i] * c + e[i]).norm() + spectral_norm_sym(D[i]) * h;
    v += p[i] * a * a;
  }
  return v;
}

void quadratic_constants(const TaskPool& pool, const Box& region, const ConstantsOptions& opts,
                         SmoothnessConstants& out) {
  const std::size_t d = pool.dim();
  double L = -kInf, mu = kInf;
  Matrix Hbar = Matrix::Zero(d, d);
  Vector bbar = Vector::Zero(d);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto* q = as_quadratic(pool.task(i));
    auto [lo, hi] = eig_extremes(q->H());
    L = std::max(L, hi);
    mu = std::min(mu, lo);
    Hbar += pool.weight(i) * q->H();
    bbar += pool.weight(i) * q->b();
  }
  std::vector<Matrix> D;
  std::vector<Vector> e;
  Matrix Q = Matrix::Zero(d, d);
  Vector r = Vector::Zero(d);
  double s = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto* q = as_quadratic(pool.task(i));
    D.push_back(q->H() - Hbar);
    e.push_back(q->b() - bbar);
    Q += pool.weight(i) * D.back().transpose() * D.back();
    r += pool.weight(i) * D.back().transpose() * e.back();
    s += pool.weight(i) * e.back().squaredNorm();
  }
  const bool all_same_hessian = Q.norm() == 0.0;
  double var;
  bool exact = true;
  if (all_same_hessian) {
    var = s;
  } else if (d <= opts.max_exact_vertex_dim) {
    var = quadratic_variance_vertices(Q, r, s, region);
  } else {
    var = quadratic_variance_bound(D, e, pool.weights(), region);
    exact = false;
  }
  for (const auto& w : opts.extra_points) var = std::max(var, variance_at(pool, w));

  out.L = L;
  out.mu = mu;
  out.kappa = 0.0;
  out.sigma = std::sqrt(std::max(0.0, var));
  out.exact = exact;

  Eigen::LDLT<Matrix> ldlt(Hbar);
  Vector x = ldlt.solve(-bbar);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) {
    x = Hbar.completeOrthogonalDecomposition().solve(-bbar);
  }
  out.f_minimizer = x;
  out.f_star = expected_loss(pool, x, Exec::serial);
}

// Damped Newton while the Hessian of f is positive definite, gradient steps
// otherwise, until ‖∇f‖ <= 1e-12 or the iteration caps run out.
Vector minimize_expected_loss(const TaskPool& pool, const Vector& start, double L) {
  Vector w = start;
  const double step = L > 0.0 ? 1.0 / L : 1.0;
  for (int it = 0; it < 200; ++it) {
    const Vector g = expected_grad(pool, w);
    if (g.norm() <= 1e-12) return w;
    const Matrix H = expected_hess(pool, w);
    Eigen::LDLT<Matrix> ldlt(H);
    Vector dir;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
      dir = -ldlt.solve(g);
    } else {
      dir = -step * g;
    }
    const double f0 = expected_loss(pool, w);
    double t = 1.0;
    Vector next = w + dir;
    while (t > 1e-12 && !(expected_loss(pool, next) <= f0 + 1e-4 * t * g.dot(dir))) {
      t *= 0.5;
      next = w + t * dir;
    }
    if (t <= 1e-12) break;
    w = next;
  }
  for (int it = 0; it < 20000; ++it) {
    const Vector g = expected_grad(pool, w);
    if (g.norm() <= 1e-12) break;
    w -= step * g;
  }
  return w;
}

void sampled_constants(const TaskPool& pool, const Box& region, const ConstantsOptions& opts,
                       SmoothnessConstants& out) {
  std::vector<Vector> points;
  points.reserve(opts.samples + opts.extra_points.size() + 1);
  points.push_back(region.center());
  for (std::size_t k = 1; k <= opts.samples; ++k) points.push_back(halton_point(k, region));
  for (const auto& w : opts.extra_points) points.push_back(w);

  std::vector<double> lo(points.size()), hi(points.size()), var(points.size());
  const std::size_t work = pool.size() * pool.dim() * pool.dim();
  detail::for_each_task(points.size(), Exec::parallel, work, [&](std::size_t k) {
    double l = kInf, h = -kInf;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      auto [a, b] = eig_extremes(pool.task(i).hess(points[k]));
      l = std::min(l, a);
      h = std::max(h, b);
    }
    lo[k] = l;
    hi[k] = h;
    var[k] = variance_at(pool, points[k]);
  });
  out.mu = *std::min_element(lo.begin(), lo.end());
  out.L = *std::max_element(hi.begin(), hi.end());
  out.sigma = std::sqrt(std::max(0.0, *std::max_element(var.begin(), var.end())));

  std::mt19937_64 rng(opts.seed);
  const std::size_t d = pool.dim();
  std::vector<std::pair<Vector, Vector>> pairs(opts.kappa_pairs);
  for (auto& [u, v] : pairs) {
    u.resize(d);
    v.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      std::uniform_real_distribution<double> U(region.lo[j], region.hi[j]);
      u[j] = U(rng);
      v[j] = U(rng);
    }
  }
  std::vector<double> quot(pairs.size(), 0.0);
  detail::for_each_task(pairs.size(), Exec::parallel, work, [&](std::size_t k) {
    const auto& [u, v] = pairs[k];
    const double dist = (u - v).norm();
    if (!(dist > 0.0)) return;
    double q = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      q = std::max(q, spectral_norm_sym(pool.task(i).hess(u) - pool.task(i).hess(v)) / dist);
    }
    quot[k] = q;
  });
  out.kappa = quot.empty() ? 0.0 : *std::max_element(quot.begin(), quot.end());
  out.exact = false;

  out.f_minimizer = minimize_expected_loss(pool, region.center(), out.L);
  out.f_star = expected_loss(pool, out.f_minimizer);
}

}  // namespace

bool Box::contains(const Vector& w) const {
  return w.size() == lo.size() && (w.array() >= lo.array()).all() && (w.array() <= hi.array()).all();
}

Box cube(std::size_t dim, double lo, double hi) {
  return Box{Vector::Constant(static_cast<Eigen::Index>(dim), lo),
             Vector::Constant(static_cast<Eigen::Index>(dim), hi)};
}

Box box_hull(const std::vector<Vector>& points, double margin) {
  if (points.empty()) throw Error(ErrorKind::invalid_argument, "box_hull needs at least one point");
  Box b{points.front(), points.front()};
  for (const auto& p : points) {
    if (p.size() != b.lo.size()) throw Error(ErrorKind::dimension_mismatch, "box_hull: point dimensions differ");
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  for (Eigen::Index j = 0; j < b.lo.size(); ++j) {
    const double width = b.hi[j] - b.lo[j];
    const double mid = 0.5 * (b.hi[j] + b.lo[j]);
    const double pad = width > 0.0 ? margin * width : margin * std::max(1.0, std::abs(mid));
    b.lo[j] -= pad;
    b.hi[j] += pad;
  }
  return b;
}

Box box_hull(const Trajectory& traj, double margin) {
  std::vector<Vector> pts;
  pts.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    if (s.w.allFinite()) pts.push_back(s.w);
  }
  return box_hull(pts, margin);
}

Vector halton_point(std::size_t index, const Box& box) {
  static constexpr int kPrimes[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,
                                    43,  47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101,
                                    103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167,
                                    173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229};
  const std::size_t d = box.dim();
  if (d > std::size(kPrimes)) {
    throw Error(ErrorKind::invalid_argument, "halton_point supports at most 50 dimensions");
  }
  Vector w(d);
  for (std::size_t j = 0; j < d; ++j) {
    const int base = kPrimes[j];
    double f = 1.0, x = 0.0;
    for (std::size_t i = index; i > 0; i /= static_cast<std::size_t>(base)) {
      f /= base;
      x += f * static_cast<double>(i % static_cast<std::size_t>(base));
    }
    w[static_cast<Eigen::Index>(j)] = box.lo[j] + x * (box.hi[j] - box.lo[j]);
  }
  return w;
}

SmoothnessConstants probe_constants(const TaskPool& pool, const Box& region,
                                    const ConstantsOptions& opts) {
  require_region(region, pool.dim());
  for (const auto& w : opts.extra_points) {
    if (static_cast<std::size_t>(w.size()) != pool.dim()) {
      throw Error(ErrorKind::dimension_mismatch, "extra point dimension does not match the pool");
    }
  }
  const TaskPool own = pool.clone();
  SmoothnessConstants c;
  c.region = region;
  if (all_quadratic(own)) {
    quadratic_constants(own, region, opts, c);
  } else {
    if (region.dim() > 50 && opts.samples > 0) {
      throw Error(ErrorKind::invalid_argument, "sampled constants support at most 50 dimensions");
    }
    sampled_constants(own, region, opts, c);
  }
  return c;
}

SmoothnessConstants estimate_constants(const TaskPool& pool, const Box& region,
                                       const ConstantsOptions& opts) {
  SmoothnessConstants c = probe_constants(pool, region, opts);
  if (!(c.mu > 0.0)) {
    throw Error(ErrorKind::not_strongly_convex,
                "pool not strongly convex on region (mu = " + std::to_string(c.mu) + ")");
  }
  return c;
}

double lyapunov_rate(const SmoothnessConstants& c, double alpha) {
  const double L = c.L;
  return c.mu - 1.25 * L * L * alpha * (L * L * L * alpha * alpha + 2.0 * L * L * alpha + 2.0);
}

double lyapunov_rhs(const SmoothnessConstants& c, double alpha, double gradf_norm_sq) {
  return -lyapunov_rate(c, alpha) * gradf_norm_sq + 0.5 * c.sigma * c.sigma;
}

double correction_term_bound(const SmoothnessConstants& c, double alpha, double gradf_norm_sq) {
  return (c.mu - lyapunov_rate(c, alpha)) * gradf_norm_sq + 0.5 * c.sigma * c.sigma;
}

namespace {

// Positive root of (5/4)L²α(L³α² + 2L²α + 2) = μ/2, i.e. ζ(α) = μ/2. The left
// side is increasing in α > 0, so bisection on a bracket suffices.
double half_rate_root(const SmoothnessConstants& c) {
  auto excess = [&](double a) { return c.mu / 2.0 - lyapunov_rate(c, a); };
  double lo = 0.0, hi = 1.0 / c.L;
  while (excess(hi) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

void require_constants(const SmoothnessConstants& c) {
  if (!(c.L > 0.0) || !(c.mu > 0.0) || !std::isfinite(c.L) || !std::isfinite(c.mu) ||
      !std::isfinite(c.kappa) || !std::isfinite(c.sigma) || c.kappa < 0.0 || c.sigma < 0.0) {
    throw Error(ErrorKind::invalid_argument, "constants must be finite with L, mu > 0");
  }
}

}  // namespace

std::vector<NamedTerm> alpha_bound_maml_ode_terms(const SmoothnessConstants& c,
                                                  ConvergenceBoundForm form) {
  require_constants(c);
  const double L = c.L, mu = c.mu, k = c.kappa, s = c.sigma;
  const double smu = std::sqrt(mu);
  std::vector<NamedTerm> terms = {
      {"1/(2L)", 1.0 / (2.0 * L)},
      {"mu^1.5/(36 kappa sigma + 28 kappa sqrt(mu) sigma)",
       ratio_or_inf(mu * smu, 36.0 * k * s + 28.0 * k * smu * s)},
      {"mu^1.5/(16 sqrt(L) kappa sigma + 24 kappa sqrt(mu) sigma)",
       ratio_or_inf(mu * smu, 16.0 * std::sqrt(L) * k * s + 24.0 * k * smu * s)},
  };
  if (form == ConvergenceBoundForm::as_printed) {
    terms.push_back({"(2/15)^(1/3) mu^(1/3) L^(-5/3)",
                     std::cbrt(2.0 / 15.0) * std::cbrt(mu) * std::pow(L, -5.0 / 3.0)});
    terms.push_back({"(1/15)^(1/2) mu^(1/2) L^(-2)", std::sqrt(1.0 / 15.0) * smu / (L * L)});
    terms.push_back({"(1/15)^(1/2) mu L^(-2)", std::sqrt(1.0 / 15.0) * mu / (L * L)});
  } else {
    terms.push_back({"root of zeta(alpha) = mu/2", half_rate_root(c)});
  }
  return terms;
}

double alpha_bound_maml_ode(const SmoothnessConstants& c, ConvergenceBoundForm form) {
  double best = kInf;
  for (const auto& t : alpha_bound_maml_ode_terms(c, form)) best = std::min(best, t.value);
  return best;
}

double alpha_bound_bi_maml_ode(const SmoothnessConstants& c, double eps0) {
  require_constants(c);
  if (!std::isfinite(eps0) || !(eps0 > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "eps0 must be finite and positive");
  }
  const double L = c.L, mu = c.mu, k = c.kappa, s = c.sigma, smu = std::sqrt(mu);
  return std::min({1.0 / (2.0 * L), ratio_or_inf(mu, 36.0 * k * eps0 + 28.0 * k * s),
                   ratio_or_inf(mu * smu, 16.0 * std::sqrt(L) * k * s + 24.0 * k * smu * s)});
}

double alpha_bound_strong_convexity(const SmoothnessConstants& c, double K, WindowCap cap) {
  require_constants(c);
  if (!std::isfinite(K) || !(K > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "K must be finite and positive");
  }
  const double first = cap == WindowCap::half_over_L ? 1.0 / (2.0 * c.L) : 1.0 / (4.0 * c.L);
  return std::min(first, ratio_or_inf(c.mu, 8.0 * c.kappa * (2.0 * K + c.sigma)));
}

Envelope::Envelope(double zeta, double gamma, double y0)
    : zeta_(zeta), gamma_(gamma), y0_(y0), c0_(std::numeric_limits<double>::quiet_NaN()) {
  if (!(zeta > 0.0)) throw Error(ErrorKind::hypothesis_violated, "step size too large for envelope");
  constant_ = zeta * y0 <= gamma;
  if (!constant_) c0_ = -std::log(zeta * y0 - gamma) / zeta;
}

double Envelope::operator()(double t) const {
  if (constant_) return std::max(y0_, gamma_ / zeta_);
  return ((zeta_ * y0_ - gamma_) * std::exp(-zeta_ * t) + gamma_) / zeta_;
}

Envelope envelope(const SmoothnessConstants& c, double alpha, double y0) {
  return Envelope(lyapunov_rate(c, alpha), 0.5 * c.sigma * c.sigma, y0);
}

EnvelopeParams envelope_params(const SmoothnessConstants& c, double alpha, double y0) {
  const Envelope e = envelope(c, alpha, y0);
  return {e.zeta(), e.gamma(), e.c0(), e.zeta() - c.mu / 2.0};
}

double grad_norm_transfer_fwd(double G, const SmoothnessConstants& c, double alpha) {
  const double aL = alpha * c.L;
  return (1.0 + 2.0 * aL + aL * aL) * G + (2.0 * aL + aL * aL) * c.sigma;
}

double grad_norm_transfer_bwd(double Fnorm, const SmoothnessConstants& c, double alpha) {
  if (!(alpha < 1.0 / (4.0 * c.L))) {
    throw Error(ErrorKind::hypothesis_violated, "backward norm transfer needs alpha < 1/(4L)");
  }
  const double aL = alpha * c.L;
  return (Fnorm + 2.0 * aL * c.sigma) / (1.0 - 2.0 * aL);
}

std::optional<double> time_bound_maml_ode(const SmoothnessConstants& c, double alpha,
                                          double gradf0_norm, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::invalid_argument, "eps must be positive");
  const double mu = c.mu, s2 = c.sigma * c.sigma;
  const double iota = lyapunov_rate(c, alpha) - mu / 2.0;
  if (!(c.sigma > 0.0) || !(iota > 0.0)) return std::nullopt;
  const double g2 = gradf0_norm * gradf0_norm;
  double first = 0.0;
  if (g2 > s2 / mu) {
    first = std::max(0.0, (2.0 / mu) * std::log((mu * mu * g2 - mu * s2 / 2.0) / (iota * s2)));
  }
  const double second =
      std::max(0.0, (16.0 / mu) * std::log((5.0 + 9.0 / std::sqrt(mu)) * c.sigma / (4.0 * eps)));
  return first + second;
}

double time_bound_bi_maml_ode(const SmoothnessConstants& c, double /*alpha*/, double eps0,
                              double gradf0_norm, double eps) {
  if (!(eps > 0.0) || !(eps0 > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "eps and eps0 must be positive");
  }
  const double mu = c.mu;
  const double first =
      std::max(0.0, (2.0 / mu) * std::log(gradf0_norm * gradf0_norm / (eps0 * eps0)));
  const double second =
      std::max(0.0, (16.0 / mu) * std::log((9.0 * eps0 + 5.0 * c.sigma) / (4.0 * eps)));
  return first + second;
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::hypothesis_violated: return "hypothesis-violated";
    case CheckStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

LyapunovReport check_lyapunov(const Trajectory& traj, const SmoothnessConstants& c, double alpha,
                              double tol) {
  const auto& s = traj.samples;
  if (s.size() < 3) throw Error(ErrorKind::invalid_argument, "trajectory too short (< 3 samples)");
  LyapunovReport r;
  for (std::size_t j = 1; j + 1 < s.size(); ++j) {
    const double dt = s[j + 1].t - s[j - 1].t;
    if (!(dt > 0.0)) continue;
    const double e_next = 0.5 * s[j + 1].gradf_norm * s[j + 1].gradf_norm;
    const double e_prev = 0.5 * s[j - 1].gradf_norm * s[j - 1].gradf_norm;
    const double g2 = s[j].gradf_norm * s[j].gradf_norm;
    const double excess = ((e_next - e_prev) / dt - lyapunov_rhs(c, alpha, g2)) / (1.0 + g2);
    ++r.checked;
    if (excess > tol) ++r.violations;
    if (excess > r.max_excess) {
      r.max_excess = excess;
      r.worst_t = s[j].t;
    }
  }
  return r;
}

namespace {

void record(PointwiseReport& r, double value, double bound, double slack) {
  ++r.checked;
  const double margin = (bound - value) / (1.0 + std::abs(bound));
  if (value > bound + slack) ++r.violations;
  r.min_margin = std::min(r.min_margin, margin);
}

}  // namespace

PointwiseReport check_envelope(const Trajectory& traj, const SmoothnessConstants& c, double alpha,
                               double rel_tol) {
  PointwiseReport r;
  if (traj.samples.empty()) return r;
  const double y0 = traj.samples.front().gradf_norm * traj.samples.front().gradf_norm;
  const double t0 = traj.samples.front().t;
  const Envelope env = envelope(c, alpha, y0);
  for (const auto& s : traj.samples) {
    const double y = env(s.t - t0);
    record(r, s.gradf_norm * s.gradf_norm, y, rel_tol * y);
  }
  return r;
}

TransferReport check_norm_transfer(const Trajectory& traj, const SmoothnessConstants& c,
                                   double alpha) {
  TransferReport r;
  r.backward_applicable = alpha < 1.0 / (4.0 * c.L);
  for (const auto& s : traj.samples) {
    const double fwd = grad_norm_transfer_fwd(s.gradf_norm, c, alpha);
    record(r.forward, s.gradF_norm, fwd, 1e-12 * (1.0 + fwd));
    if (r.backward_applicable) {
      const double bwd = grad_norm_transfer_bwd(s.gradF_norm, c, alpha);
      record(r.backward, s.gradf_norm, bwd, 1e-12 * (1.0 + bwd));
    }
  }
  return r;
}

PointwiseReport check_correction_bound(const TaskPool& pool, const Trajectory& traj,
                                       const SmoothnessConstants& c, double alpha) {
  const TaskPool own = pool.clone();
  PointwiseReport r;
  for (const auto& s : traj.samples) {
    const Vector gf = expected_grad(own, s.w);
    const Vector gF = maml_grad(own, alpha, s.w);
    const double lhs = gf.dot(expected_hess(own, s.w) * (gf - gF));
    const double bound = correction_term_bound(c, alpha, gf.squaredNorm());
    record(r, lhs, bound, 1e-10 * (1.0 + std::abs(bound)));
  }
  return r;
}

namespace {

Vector ball_sample(std::mt19937_64& rng, const Vector& center, double radius) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector dir(center.size());
  for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = N(rng);
  const double n = dir.norm();
  if (n > 0.0) dir /= n;
  const double r = radius * std::pow(U(rng), 1.0 / static_cast<double>(center.size()));
  return center + r * dir;
}

void require_minimizer(const SmoothnessConstants& c, std::size_t dim) {
  if (static_cast<std::size_t>(c.f_minimizer.size()) != dim || !std::isfinite(c.f_star)) {
    throw Error(ErrorKind::invalid_argument, "constants lack f_star / minimizer of f");
  }
}

}  // namespace

HessWindowReport hess_window_check(const TaskPool& pool, double alpha,
                                   const SmoothnessConstants& c, double K, std::size_t n_probes,
                                   const ProbeOptions& opts, WindowRegion region) {
  require_minimizer(c, pool.dim());
  const TaskPool own = pool.clone();
  const bool on_F = region == WindowRegion::maml_gradient;
  HessWindowReport r;
  r.alpha_bound = on_F ? alpha_bound_strong_convexity(c, K)
                       : std::min(1.0 / (2.0 * c.L), ratio_or_inf(c.mu, 8.0 * c.kappa * K));
  r.hypothesis_holds = alpha <= r.alpha_bound;
  const double tol = 1e-6 * c.L;
  r.lower = c.mu / 8.0 - tol;
  r.upper = 9.0 * c.L / 8.0 + tol;

  std::mt19937_64 rng(opts.seed);
  double radius = on_F ? (2.0 * K + c.sigma) / c.mu : K / c.mu;
  std::vector<Vector> accepted;
  std::size_t attempts = 0, batch_tries = 0, batch_hits = 0;
  while (accepted.size() < n_probes && attempts < opts.max_attempts) {
    const Vector w = ball_sample(rng, c.f_minimizer, radius);
    ++attempts;
    ++batch_tries;
    const double g = on_F ? maml_grad(own, alpha, w).norm() : expected_grad(own, w).norm();
    if (g <= K) {
      accepted.push_back(w);
      ++batch_hits;
    }
    if (batch_tries == 200) {
      if (batch_hits < 10) radius *= 0.5;
      batch_tries = batch_hits = 0;
    }
  }

  std::vector<std::pair<double, double>> eigs(accepted.size());
  detail::for_each_task(accepted.size(), Exec::parallel, pool.size() * pool.dim() * pool.dim() * 8,
                        [&](std::size_t k) {
                          eigs[k] = eig_extremes(maml_hess(own, alpha, accepted[k], Exec::serial));
                        });
  for (const auto& [lo, hi] : eigs) {
    ++r.probes;
    r.min_eig = std::min(r.min_eig, lo);
    r.max_eig = std::max(r.max_eig, hi);
    if (lo < r.lower || hi > r.upper) ++r.violations;
  }
  if (!r.hypothesis_holds) {
    r.status = CheckStatus::hypothesis_violated;
  } else if (r.probes == 0) {
    r.status = CheckStatus::inconclusive;
  } else {
    r.status = r.violations == 0 ? CheckStatus::pass : CheckStatus::fail;
  }
  return r;
}

RegionMembership region_membership(const TaskPool& pool, const SmoothnessConstants& c,
                                   double alpha, const Vector& w, double K, double v_level) {
  require_minimizer(c, pool.dim());
  const TaskPool own = pool.clone();
  RegionMembership m;
  m.in_U = maml_grad(own, alpha, w).norm() <= K;
  m.in_V = expected_loss(own, w) - c.f_star <= v_level;
  return m;
}

InclusionReport check_region_inclusions(const TaskPool& pool, double alpha,
                                        const SmoothnessConstants& c, double K,
                                        std::size_t n_samples, const ProbeOptions& opts) {
  require_minimizer(c, pool.dim());
  const TaskPool own = pool.clone();
  InclusionReport r;
  r.K = K;
  const double root = std::sqrt(c.L / c.mu);
  r.K_prime = (1.0 + root) * c.sigma + std::max(K, 1e-3);
  const double v_u = (2.0 * K + c.sigma) * (2.0 * K + c.sigma) / (2.0 * c.mu);
  const double v_k = (r.K_prime - c.sigma) * (r.K_prime - c.sigma) / (2.0 * c.L);
  const double radius =
      1.25 * std::max((2.0 * K + c.sigma) / c.mu, (r.K_prime - c.sigma) / std::sqrt(c.L * c.mu));

  std::mt19937_64 rng(opts.seed);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Vector w = ball_sample(rng, c.f_minimizer, radius);
    const double gF = maml_grad(own, alpha, w).norm();
    const double gap = expected_loss(own, w) - c.f_star;
    ++r.samples;
    if (gF <= K) {
      ++r.in_U;
      if (gap > v_u * (1.0 + 1e-12) + 1e-12) ++r.u_not_in_v;
    }
    if (gap <= v_k) {
      ++r.in_V;
      if (gF > r.K_prime * (1.0 + 1e-12)) ++r.v_not_in_u;
    }
  }
  if (!(alpha < 1.0 / (4.0 * c.L))) {
    r.status = CheckStatus::hypothesis_violated;
  } else if (r.in_U == 0 && r.in_V == 0) {
    r.status = CheckStatus::inconclusive;
  } else {
    r.status = r.u_not_in_v + r.v_not_in_u == 0 ? CheckStatus::pass : CheckStatus::fail;
  }
  return r;
}

UniquenessReport uniqueness_probe(const TaskPool& pool, double alpha, const SmoothnessConstants& c,
                                  std::size_t n_starts, const Box& box, double tol,
                                  const UniquenessOptions& opts) {
  require_region(box, pool.dim());
  require_minimizer(c, pool.dim());
  UniquenessReport r;
  r.K = (1.0 + std::sqrt(c.L / c.mu)) * c.sigma + opts.K_margin * std::max(1.0, c.sigma);
  r.v_level = (r.K - c.sigma) * (r.K - c.sigma) / (2.0 * c.L);
  r.alpha_bound = alpha_bound_strong_convexity(c, r.K, WindowCap::quarter_over_L);
  r.hypothesis_holds = alpha <= r.alpha_bound;
  r.runs = n_starts;

  std::mt19937_64 rng(opts.seed);
  std::vector<Vector> starts(n_starts);
  for (auto& w : starts) {
    w.resize(static_cast<Eigen::Index>(box.dim()));
    for (std::size_t j = 0; j < box.dim(); ++j) {
      std::uniform_real_distribution<double> U(box.lo[j], box.hi[j]);
      w[static_cast<Eigen::Index>(j)] = U(rng);
    }
  }

  std::vector<Vector> ends(n_starts);
  std::vector<char> ok(n_starts, 0);
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(n_starts);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      const TaskPool own = pool.clone();
      MamlOdeField field(own, alpha, Exec::serial);
      IntegrateOptions io;
      io.stop.eps = opts.eps;
      io.stop.max_time = opts.max_time;
      io.stop.max_iters = static_cast<std::size_t>(std::ceil(opts.max_time / opts.beta));
      io.record_every = std::numeric_limits<std::size_t>::max();
      const Trajectory t = rk4_integrate(field, starts[k], opts.beta, pool_monitor(own, alpha), io);
      ends[k] = t.back().w;
      ok[k] = t.termination == Termination::converged;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t a = 0; a < n_starts; ++a) {
    if (ok[a]) ++r.converged;
    for (std::size_t b = a + 1; b < n_starts; ++b) {
      r.max_pairwise_distance = std::max(r.max_pairwise_distance, (ends[a] - ends[b]).norm());
    }
  }
  if (n_starts > 0) {
    r.terminal = ends.front();
    r.f_gap = expected_loss(pool.clone(), r.terminal) - c.f_star;
    r.terminal_in_V = r.f_gap <= r.v_level;
  }

  if (!r.hypothesis_holds) {
    r.status = CheckStatus::hypothesis_violated;
  } else if (n_starts == 0 || r.converged < n_starts) {
    r.status = CheckStatus::inconclusive;
  } else {
    r.status = r.max_pairwise_distance < tol && r.terminal_in_V ? CheckStatus::pass : CheckStatus::fail;
  }
  return r;
}

CurvatureScan scan_curvature_1d(const TaskPool& pool, double alpha, double lo, double hi,
                                double step) {
  if (pool.dim() != 1) throw Error(ErrorKind::invalid_argument, "curvature scan needs a 1-D pool");
  if (!std::isfinite(step) || !(step > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "step must be finite and positive");
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw Error(ErrorKind::invalid_argument, "grid needs finite bounds with lo <= hi");
  }
  const TaskPool own = pool.clone();
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  CurvatureScan r;
  r.w.resize(n);
  r.dF.resize(n);
  r.d2F.resize(n);
  detail::for_each_task(n, Exec::parallel, 64, [&](std::size_t k) {
    const double x = lo + static_cast<double>(k) * step;
    const Vector w = Vector::Constant(1, x);
    r.w[k] = x;
    r.dF[k] = maml_grad(own, alpha, w, Exec::serial)[0];
    r.d2F[k] = maml_hess(own, alpha, w, Exec::serial)(0, 0);
  });
  for (std::size_t k = 0; k < n; ++k) {
    if (r.d2F[k] < r.min_d2F) {
      r.min_d2F = r.d2F[k];
      r.argmin_d2F = r.w[k];
    }
    if (k + 1 < n && (r.dF[k] < 0.0) != (r.dF[k + 1] < 0.0)) {
      r.dF_sign_changes.emplace_back(r.w[k], r.w[k + 1]);
    }
  }
  int last = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double slope = r.dF[k + 1] - r.dF[k];
    const int sign = slope > 0.0 ? 1 : (slope < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (last != 0 && sign != last) ++r.slope_sign_changes;
    last = sign;
  }
  return r;
}

std::optional<double> first_time_below(const Trajectory& traj, double eps) {
  for (const auto& s : traj.samples) {
    if (s.gradF_norm <= eps) return s.t;
  }
  return std::nullopt;
}

}  // namespace mamlode
