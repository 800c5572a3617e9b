#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "mamlode/task_model.hpp"

namespace mamlode {

enum class FieldKind { maml_ode, fo_maml, expected_loss_flow, bi_maml_ode, custom };

const char* to_string(FieldKind k);

/// Right-hand side of ẇ = field(w).
///
/// begin_step is called exactly once per accepted integration step, at the
/// step's start point, before any stage evaluation. Stateful fields (the
/// biphasic latch) update there, so every stage of one step sees the same
/// branch.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual FieldKind kind() const = 0;
  virtual Vector eval(const Vector& w) const = 0;
  virtual void begin_step(const Vector& /*w*/, double /*t*/) {}
  virtual Phase phase() const { return Phase::maml; }
  /// Inner step size of the MAML loss behind the field; NaN when not
  /// applicable.
  virtual double alpha() const;
  /// Evaluation work charged by this field so far.
  virtual EvalCounts counts() const { return {}; }
};

/// ẇ = -∇F(w).
class MamlOdeField final : public VectorField {
 public:
  MamlOdeField(TaskPool pool, double alpha, Exec exec = Exec::parallel);
  FieldKind kind() const override { return FieldKind::maml_ode; }
  Vector eval(const Vector& w) const override;
  double alpha() const override { return alpha_; }
  EvalCounts counts() const override { return pool_.counts(); }

 private:
  TaskPool pool_;
  double alpha_;
  Exec exec_;
};

/// ẇ = -E[∇f_i(w - α∇f_i(w))], the first-order approximation.
class FoMamlField final : public VectorField {
 public:
  FoMamlField(TaskPool pool, double alpha, Exec exec = Exec::parallel);
  FieldKind kind() const override { return FieldKind::fo_maml; }
  Vector eval(const Vector& w) const override;
  double alpha() const override { return alpha_; }
  EvalCounts counts() const override { return pool_.counts(); }

 private:
  TaskPool pool_;
  double alpha_;
  Exec exec_;
};

/// ẇ = -∇f(w).
class ExpectedLossField final : public VectorField {
 public:
  explicit ExpectedLossField(TaskPool pool, Exec exec = Exec::parallel);
  FieldKind kind() const override { return FieldKind::expected_loss_flow; }
  Vector eval(const Vector& w) const override;
  Phase phase() const override { return Phase::expected_loss; }
  EvalCounts counts() const override { return pool_.counts(); }

 private:
  TaskPool pool_;
  Exec exec_;
};

enum class BiphasicOrder {
  /// Descend f while ‖∇f‖ > ε₀, then latch permanently onto F.
  expected_loss_first,
  /// Literal branch: descend f when ‖∇f‖ <= ε₀, F otherwise, re-tested every
  /// step and never latched. Kept for comparison only.
  as_printed,
};

/// Two-phase field: -∇f until ‖∇f(w)‖ <= ε₀ first holds at a step start, then
/// -∇F for good. The f-phase never touches a Hessian.
class BiMamlField final : public VectorField {
 public:
  BiMamlField(TaskPool pool, double alpha, double eps0,
              BiphasicOrder order = BiphasicOrder::expected_loss_first,
              Exec exec = Exec::parallel);
  FieldKind kind() const override { return FieldKind::bi_maml_ode; }
  Vector eval(const Vector& w) const override;
  void begin_step(const Vector& w, double t) override;
  Phase phase() const override { return phase_; }
  double alpha() const override { return alpha_; }
  EvalCounts counts() const override { return pool_.counts(); }

  bool latched() const noexcept { return switch_time_.has_value(); }
  /// Time of the step start at which the latch closed.
  std::optional<double> switch_time() const noexcept { return switch_time_; }

 private:
  TaskPool pool_;
  double alpha_;
  double eps0_;
  BiphasicOrder order_;
  Exec exec_;
  Phase phase_ = Phase::expected_loss;
  std::optional<double> switch_time_;
};

/// Wraps an arbitrary callable; used for closed-form test fields.
class FunctionField final : public VectorField {
 public:
  explicit FunctionField(std::function<Vector(const Vector&)> fn) : fn_(std::move(fn)) {}
  FieldKind kind() const override { return FieldKind::custom; }
  Vector eval(const Vector& w) const override { return fn_(w); }

 private:
  std::function<Vector(const Vector&)> fn_;
};

std::unique_ptr<VectorField> maml_ode_field(const TaskPool& pool, double alpha);
std::unique_ptr<BiMamlField> bi_maml_field(const TaskPool& pool, double alpha, double eps0,
                                           BiphasicOrder order = BiphasicOrder::expected_loss_first);

struct SampleStats {
  double F_val = 0.0;
  double gradF_norm = 0.0;
  double gradf_norm = 0.0;
};

/// Computes the recorded diagnostics at an iterate. Monitors evaluate on their
/// own copy of the pool, so they never show up in a field's counters.
using Monitor = std::function<SampleStats(const Vector&)>;

Monitor pool_monitor(const TaskPool& pool, double alpha);
/// For fields without a pool: gradF_norm = ‖field(w)‖, F_val = gradf_norm = 0.
Monitor field_norm_monitor(const VectorField& field);

enum class StopOn { gradF, gradf };

struct StopRule {
  double eps = 1e-6;
  StopOn on = StopOn::gradF;
  double max_time = 1e9;
  std::size_t max_iters = 100000;
};

struct IntegrateOptions {
  StopRule stop;
  /// Keep every n-th sample; the first and last are always kept.
  std::size_t record_every = 1;
};

/// Divergence guard shared by all loops: any non-finite entry or ‖w‖∞ > 1e12.
bool diverged(const Vector& w);
inline constexpr double kDivergenceBound = 1e12;

/// w_{k+1} = w_k + β field(w_k), t_k = kβ.
Trajectory euler_integrate(VectorField& field, const Vector& w0, double beta,
                           const Monitor& monitor, const IntegrateOptions& opts);

/// Classical fourth-order Runge–Kutta with fixed step β.
Trajectory rk4_integrate(VectorField& field, const Vector& w0, double beta,
                         const Monitor& monitor, const IntegrateOptions& opts);

Trajectory integrate(Integrator method, VectorField& field, const Vector& w0, double beta,
                     const Monitor& monitor, const IntegrateOptions& opts);

}  // namespace mamlode
