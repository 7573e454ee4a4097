#pragma once

// Post-processing of trajectories: power-law fits of the energy, the tail
// lower-bound product, the slow envelope and the slow/fast classifier.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degenode/integrator.hpp"
#include "degenode/model.hpp"

namespace degenode {

struct DecayFit {
  double exponent = 0.0;  // q in E ~ C t^{-q}
  double log10_prefactor = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;
};

struct FitWindow {
  double t_lo = 0.0;
  double t_hi = 0.0;
};

namespace detail {

inline constexpr int kFitPointsPerDecade = 20;
inline constexpr int kFitMinPoints = 10;

/// Linear interpolation of log y against log t at log-time `lt`; `idx` is a
/// monotone cursor into the sample arrays.
inline double log_interp(std::span<const double> t, std::span<const double> y, double lt, std::size_t& idx) {
  while (idx + 2 < t.size() && std::log(t[idx + 1]) < lt) ++idx;
  const double ta = t[idx], tb = t[idx + 1];
  const double ya = y[idx], yb = y[idx + 1];
  if (!(ya > 0.0) || !(yb > 0.0))
    throw Error(ErrorCode::NonPositiveEnergy, "energy is not positive near t = " + std::to_string(ta));
  if (ta <= 0.0) return std::log(yb);
  const double la = std::log(ta), lb = std::log(tb);
  if (lb == la) return std::log(yb);
  const double w = std::clamp((lt - la) / (lb - la), 0.0, 1.0);
  return (1.0 - w) * std::log(ya) + w * std::log(yb);
}

}  // namespace detail

/// Least-squares slope of log E against log t over log-uniformly resampled
/// points of the window. `t` must be increasing.
inline DecayFit fit_decay_exponent(std::span<const double> t, std::span<const double> e, FitWindow window) {
  if (t.size() != e.size()) throw Error(ErrorCode::DimensionMismatch, "time and energy series differ in length");
  if (t.size() < 2) throw Error(ErrorCode::EmptyTrajectory, "need at least two samples to fit");
  if (!(window.t_lo > 0.0) || !(window.t_hi > window.t_lo))
    throw Error(ErrorCode::WindowTooShort, "fit window must satisfy 0 < t_lo < t_hi");
  const double decades = std::log10(window.t_hi / window.t_lo);
  if (decades < 1.0 - 1e-12)
    throw Error(ErrorCode::WindowTooShort, "fit window spans " + std::to_string(decades) + " decades, need >= 1");
  const double slack = 1e-12 * window.t_hi;
  if (window.t_lo < t.front() - slack || window.t_hi > t.back() + slack)
    throw Error(ErrorCode::WindowTooShort, "fit window [" + std::to_string(window.t_lo) + ", " +
                                               std::to_string(window.t_hi) + "] exceeds the sampled range");

  const int n = std::max(detail::kFitMinPoints, static_cast<int>(std::ceil(decades * detail::kFitPointsPerDecade)) + 1);
  const double l0 = std::log(window.t_lo), l1 = std::log(window.t_hi);
  std::vector<double> xs(n), ys(n);
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    const double lt = std::clamp(l0 + (l1 - l0) * i / (n - 1), std::log(std::max(t.front(), window.t_lo)),
                                 std::log(std::min(t.back(), window.t_hi)));
    xs[i] = lt;
    ys[i] = detail::log_interp(t, e, lt, idx);
  }
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  DecayFit fit;
  fit.exponent = -slope;
  fit.log10_prefactor = (my - slope * mx) / std::log(10.0);
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  fit.t_lo = window.t_lo;
  fit.t_hi = window.t_hi;
  fit.n_points = n;
  return fit;
}

inline DecayFit fit_decay_exponent(const Trajectory& traj, FitWindow window) {
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  const auto t = traj.times();
  const auto e = traj.energies();
  return fit_decay_exponent(std::span<const double>(t), std::span<const double>(e), window);
}

/// Minimum of t^q E(t) over the tail and over its last two decades.
struct LiminfReport {
  double exponent = 0.0;
  double tail_min = 0.0;
  double last_decade_min = 0.0;
  std::optional<double> previous_decade_min;
  /// log10 of the minima, finite even when the products over/underflow.
  double log10_tail_min = -std::numeric_limits<double>::infinity();
  double log10_last_decade_min = -std::numeric_limits<double>::infinity();
};

inline LiminfReport liminf_bound_check(std::span<const double> t, std::span<const double> e, double exponent,
                                       double tail_start) {
  if (t.size() != e.size()) throw Error(ErrorCode::DimensionMismatch, "time and energy series differ in length");
  if (t.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  const double t_end = t.back();
  if (!(tail_start > 0.0) || !(tail_start < t_end))
    throw Error(ErrorCode::WindowTooShort, "tail start must lie in (0, t_end)");
  const double ninf = -std::numeric_limits<double>::infinity();
  double lt_min = std::numeric_limits<double>::infinity();
  double llast = lt_min, lprev = lt_min;
  bool has_prev = false;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < tail_start) continue;
    const double lp = e[k] > 0.0 ? exponent * std::log10(t[k]) + std::log10(e[k]) : ninf;
    lt_min = std::min(lt_min, lp);
    if (t[k] >= t_end / 10.0) {
      llast = std::min(llast, lp);
    } else if (t[k] >= t_end / 100.0) {
      lprev = std::min(lprev, lp);
      has_prev = true;
    }
  }
  if (std::isinf(lt_min) && lt_min > 0) throw Error(ErrorCode::WindowTooShort, "no samples in the tail");
  LiminfReport r;
  r.exponent = exponent;
  r.log10_tail_min = lt_min;
  r.log10_last_decade_min = llast;
  r.tail_min = std::pow(10.0, lt_min);
  r.last_decade_min = std::pow(10.0, llast);
  if (has_prev) r.previous_decade_min = std::pow(10.0, lprev);
  return r;
}

/// Tail product with the fast exponent (l+2)/(alpha-l), which is positive
/// for every nontrivial solution.
inline LiminfReport liminf_bound_check(const Trajectory& traj, const ModelParams& prm, double tail_start) {
  if (!prm.fast_exponent) throw Error(ErrorCode::AlphaNotGreaterThanL, "tail product needs alpha > l");
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  const auto t = traj.times();
  const auto e = traj.energies();
  return liminf_bound_check(std::span<const double>(t), std::span<const double>(e), *prm.fast_exponent, tail_start);
}

/// min over samples of |u(t)| (1+t)^{(alpha+1)/(beta-alpha)}.
inline double slow_envelope_check(std::span<const double> t, std::span<const double> u_norm, const ModelParams& prm) {
  if (prm.regime != Regime::SlowFastCoexist)
    throw Error(ErrorCode::RegimeMismatch, "slow envelope is defined in the coexistence regime only");
  if (t.size() != u_norm.size()) throw Error(ErrorCode::DimensionMismatch, "time and norm series differ in length");
  if (t.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  const double q = prm.slow_envelope_exponent();
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) m = std::min(m, u_norm[k] * std::pow(1.0 + t[k], q));
  return m;
}

inline std::vector<double> position_norms(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& s : traj.samples) out.push_back(s.state.u.norm());
  return out;
}

inline double slow_envelope_check(const Trajectory& traj, const ModelParams& prm) {
  const auto t = traj.times();
  const auto u = position_norms(traj);
  return slow_envelope_check(std::span<const double>(t), std::span<const double>(u), prm);
}

enum class Verdict { Fast, Slow, Undetermined };

constexpr const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Fast: return "Fast";
    case Verdict::Slow: return "Slow";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "Undetermined";
}

struct ClassifyOptions {
  double tail_fraction = 0.01;   // tail = [tail_fraction * t_end, t_end]
  double min_tail_start = 1.0;   // the tail never starts before this time
  double min_tail_decades = 2.0;
  double growth_factor = 2.0;    // K growth between the last two decades
  double envelope_floor = 0.5;   // allowed drop of the envelope minimum between decades
  double fast_exponent_match = 0.10;
};

struct ClassificationEvidence {
  double k_tail_max = 0.0;
  double k_tail_min = 0.0;
  double h_tail_max = 0.0;
  double envelope_margin = 0.0;  // min envelope over the last decade / previous decade
  double k_growth = 0.0;         // max K over the last decade / previous decade
  std::optional<double> tail_exponent;
  bool slow = false;
  bool fast = false;
};

struct Classification {
  Verdict verdict = Verdict::Undetermined;
  ClassificationEvidence evidence;
  double tail_start = 0.0;
  double tail_end = 0.0;
};

/// Trend-based surrogate for the slow/fast alternative. Slow evidence: K has
/// no growth trend over the last two decades and the slow envelope does not
/// collapse. Fast evidence: K grows by more than `growth_factor` per decade,
/// or the tail energy exponent matches the fast exponent. The verdict is
/// Undetermined unless exactly one kind of evidence holds.
inline Classification classify_slow_fast(const Trajectory& traj, const ModelParams& prm,
                                         const ClassifyOptions& opt = {}) {
  if (prm.regime != Regime::SlowFastCoexist)
    throw Error(ErrorCode::RegimeMismatch, "classification applies in the coexistence regime only");
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  if (!(opt.tail_fraction > 0.0 && opt.tail_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "tail_fraction must lie in (0, 1)");
  const double t_end = traj.samples.back().state.t;
  const double tail_start = std::max(opt.tail_fraction * t_end, opt.min_tail_start);
  if (!(t_end > tail_start) || std::log10(t_end / tail_start) < opt.min_tail_decades - 1e-12)
    throw Error(ErrorCode::WindowTooShort, "tail [" + std::to_string(tail_start) + ", " + std::to_string(t_end) +
                                               "] is shorter than " + std::to_string(opt.min_tail_decades) +
                                               " decades");

  const double q = prm.slow_envelope_exponent();
  const double last_lo = t_end / 10.0, prev_lo = t_end / 100.0;
  double k_last = 0.0, k_prev = 0.0;
  double env_last = std::numeric_limits<double>::infinity(), env_prev = env_last;
  Classification c;
  c.tail_start = tail_start;
  c.tail_end = t_end;
  auto& ev = c.evidence;
  ev.k_tail_min = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    const double t = s.state.t;
    if (t < tail_start) continue;
    const double k = s.record.k_ratio.value_or(std::numeric_limits<double>::infinity());
    const double h = s.record.h_ratio.value_or(std::numeric_limits<double>::infinity());
    ev.k_tail_max = std::max(ev.k_tail_max, k);
    ev.k_tail_min = std::min(ev.k_tail_min, k);
    ev.h_tail_max = std::max(ev.h_tail_max, h);
    const double env = s.state.u.norm() * std::pow(1.0 + t, q);
    if (t >= last_lo) {
      k_last = std::max(k_last, k);
      env_last = std::min(env_last, env);
    } else if (t >= prev_lo) {
      k_prev = std::max(k_prev, k);
      env_prev = std::min(env_prev, env);
    }
  }
  ev.k_growth = k_prev > 0.0 ? k_last / k_prev : (k_last > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  ev.envelope_margin = env_prev > 0.0 && std::isfinite(env_prev) ? env_last / env_prev : 0.0;

  try {
    ev.tail_exponent = fit_decay_exponent(traj, FitWindow{tail_start, t_end}).exponent;
  } catch (const Error&) {
    ev.tail_exponent.reset();
  }

  ev.slow = ev.k_growth <= opt.growth_factor && ev.envelope_margin >= opt.envelope_floor;
  const bool exponent_match = ev.tail_exponent && prm.fast_exponent &&
                              std::abs(*ev.tail_exponent - *prm.fast_exponent) <=
                                  opt.fast_exponent_match * *prm.fast_exponent;
  ev.fast = ev.k_growth > opt.growth_factor || exponent_match;

  if (ev.slow && !ev.fast) {
    c.verdict = Verdict::Slow;
  } else if (ev.fast && !ev.slow) {
    c.verdict = Verdict::Fast;
  } else {
    c.verdict = Verdict::Undetermined;
  }
  return c;
}

}  // namespace degenode
