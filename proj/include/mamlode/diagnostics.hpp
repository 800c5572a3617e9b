#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mamlode/flow.hpp"
#include "mamlode/task_model.hpp"

namespace mamlode {

/// Axis-aligned box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;

  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
  Vector center() const { return 0.5 * (lo + hi); }
  bool contains(const Vector& w) const;
};

Box cube(std::size_t dim, double lo, double hi);

/// Smallest box holding the points, widened on each side by margin × width
/// (margin × max(1, |center|) for a zero-width side).
Box box_hull(const std::vector<Vector>& points, double margin = 0.1);
Box box_hull(const Trajectory& traj, double margin = 0.1);

/// Smoothness (L), strong convexity (μ), Hessian Lipschitz (κ) and gradient
/// variance (σ) constants of a pool, certified on `region`.
struct SmoothnessConstants {
  double L = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  Box region;
  double f_star = 0.0;
  Vector f_minimizer;
  /// True when every constant came from a closed form rather than probing.
  bool exact = false;
};

struct ConstantsOptions {
  std::size_t samples = 10000;      // Halton probes for curvature and variance
  std::size_t kappa_pairs = 5000;   // random pairs for the Hessian Lipschitz ratio
  std::uint64_t seed = 20240601;
  /// Points added to the variance supremum (e.g. the trajectory being checked).
  std::vector<Vector> extra_points;
  /// Quadratic pools enumerate all box vertices for σ up to this dimension and
  /// fall back to a certified upper bound above it.
  std::size_t max_exact_vertex_dim = 24;
};

/// Estimates the constants without judging them.
SmoothnessConstants probe_constants(const TaskPool& pool, const Box& region,
                                    const ConstantsOptions& opts = {});

/// probe_constants, throwing Error(not_strongly_convex) when μ <= 0.
SmoothnessConstants estimate_constants(const TaskPool& pool, const Box& region,
                                       const ConstantsOptions& opts = {});

// --- step-size bounds ---------------------------------------------------------

enum class ConvergenceBoundForm {
  /// Replaces the three polynomial terms by the exact root of ζ(α) = μ/2,
  /// the condition those terms are meant to guarantee.
  exact_root,
  /// The six-term minimum in its expanded polynomial form. Its last term,
  /// √(1/15)·μ/L², admits α with ζ(α) < μ/2.
  as_printed,
};

struct NamedTerm {
  std::string name;
  double value;
};

/// Terms of the step-size bound under which the MAML ODE converges linearly.
/// Zero denominators give +∞.
std::vector<NamedTerm> alpha_bound_maml_ode_terms(
    const SmoothnessConstants& c, ConvergenceBoundForm form = ConvergenceBoundForm::exact_root);
double alpha_bound_maml_ode(const SmoothnessConstants& c,
                            ConvergenceBoundForm form = ConvergenceBoundForm::exact_root);

/// min{1/(2L), μ/(36κε₀ + 28κσ), μ^{3/2}/(16√L κσ + 24κ√μ σ)}.
double alpha_bound_bi_maml_ode(const SmoothnessConstants& c, double eps0);

enum class WindowCap { half_over_L, quarter_over_L };

/// min{cap, μ/(8κ(2K + σ))} with cap = 1/(2L), or 1/(4L) for the
/// unique-minimum statement.
double alpha_bound_strong_convexity(const SmoothnessConstants& c, double K,
                                    WindowCap cap = WindowCap::half_over_L);

/// ζ(α) = μ - (5/4)L²α(L³α² + 2L²α + 2).
double lyapunov_rate(const SmoothnessConstants& c, double alpha);

/// Upper bound on d/dt ½‖∇f‖² along the MAML ODE: -ζ(α)‖∇f‖² + σ²/2.
double lyapunov_rhs(const SmoothnessConstants& c, double alpha, double gradf_norm_sq);

/// Bound on ∇fᵀ∇²f E[B_i ∇f_i]: (5/4)L²α(L³α² + 2L²α + 2)‖∇f‖² + σ²/2.
double correction_term_bound(const SmoothnessConstants& c, double alpha, double gradf_norm_sq);

/// Closed-form solution of ẏ = -ζy + γ, an upper envelope of ‖∇f(w(t))‖².
class Envelope {
 public:
  Envelope(double zeta, double gamma, double y0);

  double zeta() const noexcept { return zeta_; }
  double gamma() const noexcept { return gamma_; }
  /// NaN for the constant envelope.
  double c0() const noexcept { return c0_; }
  double y0() const noexcept { return y0_; }
  bool constant() const noexcept { return constant_; }
  double asymptote() const noexcept { return gamma_ / zeta_; }

  double operator()(double t) const;

 private:
  double zeta_, gamma_, y0_, c0_;
  bool constant_;
};

struct EnvelopeParams {
  double zeta;
  double gamma;
  double c0;
  double iota;  // ζ - μ/2
};

/// Throws Error(hypothesis_violated, "step size too large for envelope") when
/// ζ <= 0. When ζ y0 <= γ the envelope is the constant max(y0, γ/ζ).
Envelope envelope(const SmoothnessConstants& c, double alpha, double y0);
EnvelopeParams envelope_params(const SmoothnessConstants& c, double alpha, double y0);

/// ‖∇F‖ bound from ‖∇f‖ <= G: (1 + 2αL + α²L²)G + (2αL + α²L²)σ.
double grad_norm_transfer_fwd(double G, const SmoothnessConstants& c, double alpha);

/// ‖∇f‖ bound from ‖∇F‖: (‖∇F‖ + 2αLσ)/(1 - 2αL). Requires α < 1/(4L).
double grad_norm_transfer_bwd(double Fnorm, const SmoothnessConstants& c, double alpha);

/// Continuous time after which the MAML ODE has ‖∇F‖ <= ε, from the explicit
/// two-phase proof constants. nullopt when σ = 0 or ι = ζ - μ/2 <= 0.
std::optional<double> time_bound_maml_ode(const SmoothnessConstants& c, double alpha,
                                          double gradf0_norm, double eps);

/// (2/μ) log(‖∇f(w₀)‖²/ε₀²) + (16/μ) log((9ε₀ + 5σ)/(4ε)), each term floored
/// at zero.
double time_bound_bi_maml_ode(const SmoothnessConstants& c, double alpha, double eps0,
                              double gradf0_norm, double eps);

// --- checks ---------------------------------------------------------------------

enum class CheckStatus { pass, fail, hypothesis_violated, inconclusive };
const char* to_string(CheckStatus s);

struct LyapunovReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  /// max over samples of (d/dt ½‖∇f‖² - rhs)/(1 + ‖∇f‖²); negative means slack.
  double max_excess = -std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
};

/// Central-difference time derivative of ½‖∇f(w(t))‖² at interior samples
/// against lyapunov_rhs. A sample violates when its normalized excess is above
/// tol. Throws Error(invalid_argument) for fewer than three samples.
LyapunovReport check_lyapunov(const Trajectory& traj, const SmoothnessConstants& c, double alpha,
                              double tol = 1e-6);

struct PointwiseReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  /// Smallest (bound - value)/(1 + |bound|); negative iff a violation.
  double min_margin = std::numeric_limits<double>::infinity();
};

/// ‖∇f(w(t))‖² <= y(t)(1 + rel_tol) at every sample, y from the first sample.
PointwiseReport check_envelope(const Trajectory& traj, const SmoothnessConstants& c, double alpha,
                               double rel_tol = 1e-6);

/// ‖∇F‖ <= fwd(‖∇f‖) at every sample, and when α < 1/(4L) also
/// ‖∇f‖ <= bwd(‖∇F‖).
struct TransferReport {
  PointwiseReport forward;
  PointwiseReport backward;
  bool backward_applicable = false;
};
TransferReport check_norm_transfer(const Trajectory& traj, const SmoothnessConstants& c,
                                   double alpha);

/// ∇fᵀ∇²f(∇f - ∇F) <= correction_term_bound at every sample.
PointwiseReport check_correction_bound(const TaskPool& pool, const Trajectory& traj,
                                       const SmoothnessConstants& c, double alpha);

struct ProbeOptions {
  std::uint64_t seed = 12345;
  std::size_t max_attempts = 200000;
};

struct HessWindowReport {
  CheckStatus status = CheckStatus::inconclusive;
  std::size_t probes = 0;
  std::size_t violations = 0;
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = -std::numeric_limits<double>::infinity();
  double lower = 0.0;  // μ/8 - tol
  double upper = 0.0;  // 9L/8 + tol
  bool hypothesis_holds = false;
  double alpha_bound = 0.0;
};

enum class WindowRegion {
  /// {‖∇F‖ <= K}; hypothesis α <= min{1/(2L), μ/(8κ(2K + σ))}.
  maml_gradient,
  /// {‖∇f‖ <= K}; hypothesis α <= min{1/(2L), μ/(8κK)}.
  expected_gradient,
};

/// Rejection-samples the region inside a ball around the minimizer of f that
/// contains it (radius (2K + σ)/μ, or K/μ for the expected-gradient region),
/// and checks the eigenvalues of Hess F against [μ/8, 9L/8] with tolerance
/// 1e-6·L.
HessWindowReport hess_window_check(const TaskPool& pool, double alpha,
                                   const SmoothnessConstants& c, double K, std::size_t n_probes,
                                   const ProbeOptions& opts = {},
                                   WindowRegion region = WindowRegion::maml_gradient);

struct RegionMembership {
  bool in_U = false;
  bool in_V = false;
};

/// in_U: ‖∇F(w)‖ <= K; in_V: f(w) - f* <= v_level.
RegionMembership region_membership(const TaskPool& pool, const SmoothnessConstants& c,
                                   double alpha, const Vector& w, double K, double v_level);

struct InclusionReport {
  CheckStatus status = CheckStatus::inconclusive;
  std::size_t samples = 0;
  std::size_t in_U = 0;            // samples inside U(K)
  std::size_t u_not_in_v = 0;      // U(K) ⊄ V((2K+σ)²/(2μ)) witnesses
  std::size_t in_V = 0;            // samples inside V((K'-σ)²/(2L))
  std::size_t v_not_in_u = 0;      // V((K'-σ)²/(2L)) ⊄ U(K') witnesses
  double K = 0.0;
  double K_prime = 0.0;
};

/// Sample-based check of U(K) ⊆ V((2K+σ)²/(2μ)) and
/// V((K'-σ)²/(2L)) ⊆ U(K') with K' = (1 + √(L/μ))σ + margin. Hypothesis
/// α < 1/(4L).
InclusionReport check_region_inclusions(const TaskPool& pool, double alpha,
                                        const SmoothnessConstants& c, double K,
                                        std::size_t n_samples, const ProbeOptions& opts = {});

struct UniquenessOptions {
  double beta = 1e-2;      // RK4 step
  double eps = 1e-8;       // ‖∇F‖ at which a run counts as converged
  double max_time = 1e5;
  double K_margin = 1e-3;  // K = (1 + √(L/μ))σ + K_margin·max(1, σ)
  std::uint64_t seed = 99;
};

struct UniquenessReport {
  CheckStatus status = CheckStatus::inconclusive;
  std::size_t runs = 0;
  std::size_t converged = 0;
  double max_pairwise_distance = 0.0;
  Vector terminal;  // first run's endpoint
  double K = 0.0;
  double v_level = 0.0;   // (K - σ)²/(2L)
  double f_gap = 0.0;     // f(terminal) - f*
  bool terminal_in_V = false;
  bool hypothesis_holds = false;
  double alpha_bound = 0.0;
};

/// Runs the MAML ODE (RK4) from n_starts uniform points of `box` and checks
/// that every run reaches the same critical point, inside V((K-σ)²/(2L)).
/// Runs execute in parallel on private pool copies.
UniquenessReport uniqueness_probe(const TaskPool& pool, double alpha, const SmoothnessConstants& c,
                                  std::size_t n_starts, const Box& box, double tol,
                                  const UniquenessOptions& opts = {});

struct CurvatureScan {
  std::vector<double> w;
  std::vector<double> dF;   // F'(w)
  std::vector<double> d2F;  // F''(w)
  double min_d2F = std::numeric_limits<double>::infinity();
  double argmin_d2F = 0.0;
  /// Grid intervals [w_k, w_{k+1}] on which F' changes sign.
  std::vector<std::pair<double, double>> dF_sign_changes;
  /// Sign changes of the finite-difference slope of F'; three or more means
  /// F' is not monotone in a way a convex F cannot produce.
  std::size_t slope_sign_changes = 0;
};

/// Scans F' and F'' of a one-dimensional pool on the grid lo, lo + step, ...,
/// hi. Throws Error(invalid_argument) for step <= 0, hi < lo or d != 1.
CurvatureScan scan_curvature_1d(const TaskPool& pool, double alpha, double lo, double hi,
                                double step);

/// First sample time at which ‖∇F‖ <= eps; nullopt if never.
std::optional<double> first_time_below(const Trajectory& traj, double eps);

/// Radical-inverse (Halton) point `index` (1-based recommended) mapped into box.
Vector halton_point(std::size_t index, const Box& box);

}  // namespace mamlode
