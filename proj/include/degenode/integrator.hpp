#pragma once

// Adaptive integration of the momentum and regularized formulations with an
// augmented dissipation integral, trajectory recording and energy-balance
// accounting.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <vector>

#include "degenode/dopri.hpp"
#include "degenode/dynamics.hpp"
#include "degenode/model.hpp"

namespace degenode {

struct Tolerances {
  double rel_tol = 1e-8;
  double abs_tol = 1e-250;
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-12;
  /// Largest step taken while |p| < degeneracy_threshold * (momentum scale of E).
  double degeneracy_step_cap = 1e-3;
  /// Relative to the momentum scale ((l+2)E/(l+1))^{(l+1)/(l+2)}.
  double degeneracy_threshold = 1e-8;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(max_step > 0.0) || !(min_step > 0.0) ||
        !(degeneracy_step_cap > 0.0) || !(degeneracy_threshold >= 0.0) || !(min_step <= max_step))
      throw Error(ErrorCode::InvalidArgument, "invalid tolerances");
  }
};

/// Output selection: every accepted step and/or interpolated output times.
struct SampleSpec {
  std::vector<double> times;
  bool record_steps = true;
};

/// `points_per_decade` log-spaced times in [t_start, t_end], both ends included.
inline std::vector<double> log_times(double t_start, double t_end, int points_per_decade) {
  if (!(t_start > 0.0) || !(t_end > t_start) || points_per_decade < 1)
    throw Error(ErrorCode::InvalidArgument, "log_times needs 0 < t_start < t_end and points_per_decade >= 1");
  const double decades = std::log10(t_end / t_start);
  const auto n = static_cast<int>(std::ceil(decades * points_per_decade));
  std::vector<double> out;
  out.reserve(n + 1);
  for (int i = 0; i <= n; ++i) out.push_back(t_start * std::pow(10.0, decades * i / n));
  out.back() = t_end;
  return out;
}

inline std::vector<double> uniform_times(double t0, double t1, int points) {
  if (points < 2 || !(t1 > t0)) throw Error(ErrorCode::InvalidArgument, "uniform_times needs points >= 2, t1 > t0");
  std::vector<double> out(points);
  for (int i = 0; i < points; ++i) out[i] = t0 + (t1 - t0) * i / (points - 1);
  out.back() = t1;
  return out;
}

enum class Formulation { Momentum, Regularized };
enum class RunStatus { Completed, AnomalousExtinction };

constexpr const char* to_string(RunStatus s) {
  return s == RunStatus::Completed ? "completed" : "anomalous_extinction";
}

struct Sample {
  State state;
  EnergyRecord record;
  double dissipated = 0.0;  // integral of (g(u'),u') from the start
  std::optional<double> regularized_energy;
};

struct Trajectory {
  ModelParams params;
  Operator op;
  Damping damping = Damping::linear_unit();
  Formulation formulation = Formulation::Momentum;
  double eps = 0.0;
  std::vector<Sample> samples;
  RunStatus status = RunStatus::Completed;
  /// Set when l >= 1 and the momentum came within the degeneracy threshold
  /// after the start; uniqueness is not guaranteed through such points.
  bool degenerate_passage = false;
  ode::StepStats stats;

  [[nodiscard]] bool empty() const { return samples.empty(); }
  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] int dimension() const { return samples.empty() ? 0 : static_cast<int>(samples.front().state.u.size()); }
  [[nodiscard]] std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(samples.size());
    for (const auto& s : samples) t.push_back(s.state.t);
    return t;
  }
  [[nodiscard]] std::vector<double> energies() const {
    std::vector<double> e;
    e.reserve(samples.size());
    for (const auto& s : samples) e.push_back(s.record.energy);
    return e;
  }
  [[nodiscard]] std::vector<double> dense_dissipation_integral() const {
    std::vector<double> d;
    d.reserve(samples.size());
    for (const auto& s : samples) d.push_back(s.dissipated);
    return d;
  }
};

namespace detail {

/// Length scales implied by an energy level: the largest |u| and |u'| (or |p|)
/// compatible with E.
struct EnergyScales {
  double position = 0.0;
  double velocity = 0.0;
  double momentum = 0.0;
};

inline EnergyScales energy_scales(const ModelParams& prm, const Operator& op, double e) {
  EnergyScales s;
  if (!(e > 0.0)) return s;
  s.position = std::pow((prm.beta + 2.0) * e, 1.0 / (prm.beta + 2.0)) / std::sqrt(op.lambda_min());
  s.velocity = std::pow((prm.l + 2.0) / (prm.l + 1.0) * e, 1.0 / (prm.l + 2.0));
  s.momentum = std::pow(s.velocity, prm.l + 1.0);
  return s;
}

// Components below this fraction of their energy scale are controlled in
// absolute terms relative to the scale, so zero crossings stay cheap.
inline constexpr double kScaleFloor = 1e-3;

inline double weighted_rms(const Vector& err, const Vector& y0, const Vector& y1, int n, const EnergyScales& sc,
                           double dissipated_scale, const Tolerances& tol) {
  double acc = 0.0;
  const auto total = err.size();
  for (Eigen::Index i = 0; i < total; ++i) {
    double block;
    if (i < n) {
      block = kScaleFloor * sc.position;
    } else if (i < 2 * n) {
      block = kScaleFloor * sc.momentum;
    } else {
      block = dissipated_scale;
    }
    const double sk = tol.abs_tol + tol.rel_tol * std::max({std::abs(y0(i)), std::abs(y1(i)), block});
    const double r = err(i) / sk;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(total));
}

/// y = [u, p, D] with p = |u'|^l u' and D the accumulated dissipation.
class MomentumSystem {
 public:
  MomentumSystem(const ModelParams& prm, const Operator& op, const Damping& g, const Tolerances& tol)
      : prm_(prm), op_(op), g_(g), tol_(tol), n_(op.n()), force_(op.n()), p_(op.n()), du_(op.n()) {}

  void rhs(double /*t*/, const Vector& y, Vector& dy) const {
    p_ = y.segment(n_, n_);
    du_ = phi_inverse(p_, prm_.l);
    stiffness_force(prm_, op_, y.head(n_), force_);
    dy.head(n_) = du_;
    if (g_.kind() == DampingKind::PowerLaw) {
      const double nv = du_.norm();
      const double gf = nv == 0.0 ? 0.0 : g_.c() * norm_pow(nv, g_.alpha());
      dy.segment(n_, n_) = -force_ - gf * du_;
      dy(2 * n_) = gf * nv * nv;
    } else {
      const Vector gv = g_.apply(du_);
      dy.segment(n_, n_) = -force_ - gv;
      dy(2 * n_) = gv.dot(du_);
    }
  }

  [[nodiscard]] double energy_of(const Vector& y) const {
    const double np = y.segment(n_, n_).norm();
    const double nv = np == 0.0 ? 0.0 : std::pow(np, 1.0 / (prm_.l + 1.0));
    const double a2 = y.head(n_).dot(op_.matrix() * y.head(n_));
    return energy_from_norms(prm_, nv, std::sqrt(std::max(0.0, a2)));
  }

  [[nodiscard]] double error_norm(const Vector& err, const Vector& y0, const Vector& y1) const {
    const double e = std::max(energy_of(y0), energy_of(y1));
    return weighted_rms(err, y0, y1, n_, energy_scales(prm_, op_, e), e, tol_);
  }

  [[nodiscard]] bool degenerate(const Vector& y) const {
    const double e = energy_of(y);
    if (!(e > 0.0)) return false;
    return y.segment(n_, n_).norm() < tol_.degeneracy_threshold * energy_scales(prm_, op_, e).momentum;
  }

  [[nodiscard]] double step_cap(double /*t*/, const Vector& y) const {
    return degenerate(y) ? tol_.degeneracy_step_cap : std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] int n() const { return n_; }

 private:
  const ModelParams& prm_;
  const Operator& op_;
  const Damping& g_;
  const Tolerances& tol_;
  int n_;
  mutable Vector force_, p_, du_;
};

/// y = [u, v, D] for the eps-regularized second-order system.
class RegularizedSystem {
 public:
  RegularizedSystem(const ModelParams& prm, const Operator& op, const Damping& g, const Tolerances& tol, double eps)
      : prm_(prm), op_(op), g_(g), tol_(tol), eps_(eps), n_(op.n()), force_(op.n()), v_(op.n()) {}

  void rhs(double /*t*/, const Vector& y, Vector& dy) const {
    v_ = y.segment(n_, n_);
    stiffness_force(prm_, op_, y.head(n_), force_);
    const Vector gv = g_.apply(v_);
    const double v2 = v_.squaredNorm();
    const double power_in = force_.dot(v_) + gv.dot(v_);
    const double cross = prm_.l * power_in / (eps_ + (prm_.l + 1.0) * v2);
    dy.head(n_) = v_;
    dy.segment(n_, n_) = (cross * v_ - force_ - gv) / std::pow(eps_ + v2, prm_.m);
    dy(2 * n_) = gv.dot(v_);
  }

  [[nodiscard]] double energy_of(const Vector& y) const {
    const double a2 = y.head(n_).dot(op_.matrix() * y.head(n_));
    return energy_from_norms(prm_, y.segment(n_, n_).norm(), std::sqrt(std::max(0.0, a2)));
  }

  [[nodiscard]] double error_norm(const Vector& err, const Vector& y0, const Vector& y1) const {
    const double e = std::max(energy_of(y0), energy_of(y1));
    EnergyScales sc = energy_scales(prm_, op_, e);
    sc.momentum = sc.velocity;
    return weighted_rms(err, y0, y1, n_, sc, e, tol_);
  }

  [[nodiscard]] double step_cap(double, const Vector&) const { return std::numeric_limits<double>::infinity(); }

 private:
  const ModelParams& prm_;
  const Operator& op_;
  const Damping& g_;
  const Tolerances& tol_;
  double eps_;
  int n_;
  mutable Vector force_, v_;
};

inline std::vector<double> output_times(const SampleSpec& spec, double t0, double t_end) {
  std::vector<double> t;
  for (double x : spec.times)
    if (x > t0 && x <= t_end) t.push_back(x);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

inline ode::StepControl step_control(const Tolerances& tol) {
  ode::StepControl ctl;
  ctl.max_step = tol.max_step;
  ctl.min_step = tol.min_step;
  return ctl;
}

// Energies below this value on a trajectory that started with positive
// energy indicate a numerical collapse to the rest state.
inline constexpr double kExtinctionFloor = 1e-300;

}  // namespace detail

/// Integrates the momentum formulation from `initial` to `t_end`.
inline Trajectory integrate(const ModelParams& prm, const Operator& op, const Damping& g, const State& initial,
                            double t_end, const Tolerances& tol, const SampleSpec& spec = {}) {
  check_state(op, initial);
  tol.validate();
  if (!(t_end > initial.t)) throw Error(ErrorCode::InvalidArgument, "t_end must exceed the initial time");

  Trajectory traj;
  traj.params = prm;
  traj.op = op;
  traj.damping = g;
  traj.formulation = Formulation::Momentum;

  detail::MomentumSystem sys(traj.params, traj.op, traj.damping, tol);
  const int n = op.n();
  auto make_sample = [&](double t, const Vector& y) {
    Sample s;
    s.state = State{t, y.head(n), y.segment(n, n)};
    s.record = energy_record(traj.params, traj.op, traj.damping, s.state);
    s.dissipated = y(2 * n);
    return s;
  };

  Vector y(2 * n + 1);
  y << initial.u, initial.p, 0.0;
  traj.samples.push_back(make_sample(initial.t, y));
  const double e0 = traj.samples.front().record.energy;

  if (e0 == 0.0) {
    // rest state: the zero solution is the unique solution through it
    for (double t : detail::output_times(spec, initial.t, t_end)) traj.samples.push_back(make_sample(t, y));
    if (traj.samples.back().state.t < t_end) traj.samples.push_back(make_sample(t_end, y));
    return traj;
  }

  const std::vector<double> outs = detail::output_times(spec, initial.t, t_end);
  std::size_t next_out = 0;

  auto observer = [&](const ode::DenseStep& step) -> bool {
    while (next_out < outs.size() && outs[next_out] < step.t1) {
      traj.samples.push_back(make_sample(outs[next_out], step.at(outs[next_out])));
      ++next_out;
    }
    const bool hit = next_out < outs.size() && outs[next_out] == step.t1;
    if (hit) ++next_out;
    if (spec.record_steps || hit || step.t1 >= t_end) traj.samples.push_back(make_sample(step.t1, *step.y1));
    if (prm.l >= 1.0 && sys.degenerate(*step.y1)) traj.degenerate_passage = true;
    if (sys.energy_of(*step.y1) < detail::kExtinctionFloor) {
      traj.status = RunStatus::AnomalousExtinction;
      return false;
    }
    return true;
  };

  ode::dopri5(sys, y, initial.t, t_end, detail::step_control(tol), observer, &traj.stats);
  return traj;
}

/// Integrates the eps-regularized system from (u0, u1) at t0.
inline Trajectory integrate_regularized(const ModelParams& prm, const Operator& op, const Damping& g, const Vector& u0,
                                        const Vector& u1, double eps, double t0, double t_end, const Tolerances& tol,
                                        const SampleSpec& spec = {}) {
  if (!(eps > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "eps must be > 0");
  check_dimension(op, u0, "u0");
  check_dimension(op, u1, "u1");
  tol.validate();
  if (!(t_end > t0)) throw Error(ErrorCode::InvalidArgument, "t_end must exceed the initial time");

  Trajectory traj;
  traj.params = prm;
  traj.op = op;
  traj.damping = g;
  traj.formulation = Formulation::Regularized;
  traj.eps = eps;

  detail::RegularizedSystem sys(traj.params, traj.op, traj.damping, tol, eps);
  const int n = op.n();
  auto make_sample = [&](double t, const Vector& y) {
    Sample s;
    const Vector v = y.segment(n, n);
    s.state = State::from_velocity(t, y.head(n), v, traj.params.l);
    s.record = energy_record(traj.params, traj.op, traj.damping, s.state);
    s.dissipated = y(2 * n);
    s.regularized_energy = energy_regularized(traj.params, traj.op, s.state.u, v, eps);
    return s;
  };

  Vector y(2 * n + 1);
  y << u0, u1, 0.0;
  traj.samples.push_back(make_sample(t0, y));
  if (traj.samples.front().record.energy == 0.0) {
    for (double t : detail::output_times(spec, t0, t_end)) traj.samples.push_back(make_sample(t, y));
    if (traj.samples.back().state.t < t_end) traj.samples.push_back(make_sample(t_end, y));
    return traj;
  }

  const std::vector<double> outs = detail::output_times(spec, t0, t_end);
  std::size_t next_out = 0;
  auto observer = [&](const ode::DenseStep& step) {
    while (next_out < outs.size() && outs[next_out] < step.t1) {
      traj.samples.push_back(make_sample(outs[next_out], step.at(outs[next_out])));
      ++next_out;
    }
    const bool hit = next_out < outs.size() && outs[next_out] == step.t1;
    if (hit) ++next_out;
    if (spec.record_steps || hit || step.t1 >= t_end) traj.samples.push_back(make_sample(step.t1, *step.y1));
  };
  ode::dopri5(sys, y, t0, t_end, detail::step_control(tol), observer, &traj.stats);
  return traj;
}

/// max_k |E(t_k) - E(t_0) + int_{t_0}^{t_k} (g(u'),u') dt| / E(t_0). The
/// regularized energy is used for regularized trajectories.
inline double energy_identity_residual(const Trajectory& traj) {
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  auto energy_at = [&](const Sample& s) {
    return traj.formulation == Formulation::Regularized && s.regularized_energy ? *s.regularized_energy
                                                                               : s.record.energy;
  };
  const double e0 = energy_at(traj.samples.front());
  const double d0 = traj.samples.front().dissipated;
  const double scale = std::max(std::abs(e0), detail::kExtinctionFloor);
  double worst = 0.0;
  for (const auto& s : traj.samples) worst = std::max(worst, std::abs(energy_at(s) - e0 + (s.dissipated - d0)) / scale);
  return worst;
}

struct FamilyMember {
  double eps = 0.0;
  Trajectory trajectory;
  double gap = 0.0;  // sup over the common grid of |u_eps - u|
};

struct FamilyResult {
  Trajectory reference;
  std::vector<FamilyMember> members;
  std::vector<double> grid;
};

/// Integrates the regularized system for each eps and measures the sup-norm
/// distance of u_eps to the momentum-formulation solution on a common grid.
/// Members are integrated concurrently.
inline FamilyResult integrate_regularized_family(const ModelParams& prm, const Operator& op, const Damping& g,
                                                 const Vector& u0, const Vector& u1, double t_end,
                                                 const std::vector<double>& eps_list, const Tolerances& tol,
                                                 int grid_points = 2001) {
  if (eps_list.empty()) throw Error(ErrorCode::InvalidArgument, "eps list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "eps values must be > 0");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "eps values must be strictly decreasing");
  }
  FamilyResult out;
  out.grid = uniform_times(0.0, t_end, grid_points);
  SampleSpec spec{out.grid, false};

  std::vector<std::future<Trajectory>> jobs;
  jobs.reserve(eps_list.size());
  for (double eps : eps_list)
    jobs.push_back(std::async(std::launch::async,
                              [&, eps] { return integrate_regularized(prm, op, g, u0, u1, eps, 0.0, t_end, tol, spec); }));
  out.reference = integrate(prm, op, g, State::from_velocity(0.0, u0, u1, prm.l), t_end, tol, spec);

  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    FamilyMember m;
    m.eps = eps_list[i];
    m.trajectory = jobs[i].get();
    const auto& a = m.trajectory.samples;
    const auto& b = out.reference.samples;
    if (a.size() != b.size())
      throw Error(ErrorCode::InvalidArgument, "family member and reference sampled on different grids");
    for (std::size_t k = 0; k < a.size(); ++k) m.gap = std::max(m.gap, (a[k].state.u - b[k].state.u).norm());
    out.members.push_back(std::move(m));
  }
  return out;
}

}  // namespace degenode
