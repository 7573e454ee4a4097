#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with PI step-size control
// and the classical fourth-order continuous extension (Hairer, Norsett,
// Wanner; DOPRI5). The system type supplies the right-hand side, the error
// norm and an optional step cap, so the engine stays independent of the
// model it integrates.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <type_traits>

#include <Eigen/Dense>

#include "degenode/error.hpp"

namespace degenode::ode {

using Vector = Eigen::VectorXd;

/// A system integrable by dopri5(). `rhs` writes y' into `dy`; `error_norm`
/// returns a weighted RMS of `err` (1 means "exactly at tolerance") given the
/// states at both ends of the step; `step_cap` bounds the next step size.
template <class S>
concept OdeSystem = requires(const S& s, double t, const Vector& y, Vector& dy) {
  { s.rhs(t, y, dy) } -> std::same_as<void>;
  { s.error_norm(y, y, y) } -> std::convertible_to<double>;
  { s.step_cap(t, y) } -> std::convertible_to<double>;
};

struct StepControl {
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-14;
  double initial_step = 0.0;  // 0 selects automatically
  std::size_t max_steps = 50'000'000;
  double safety = 0.9;
  double fac_min = 0.2;   // smallest step ratio
  double fac_max = 10.0;  // largest step ratio
  double pi_beta = 0.04;  // PI stabilization
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

/// Accepted step with its continuous extension.
class DenseStep {
 public:
  double t0 = 0.0;
  double t1 = 0.0;
  const Vector* y0 = nullptr;
  const Vector* y1 = nullptr;
  const Vector* r1 = nullptr;
  const Vector* r2 = nullptr;
  const Vector* r3 = nullptr;
  const Vector* r4 = nullptr;

  [[nodiscard]] Vector at(double t) const {
    const double h = t1 - t0;
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    return *y0 + th * (*r1 + th1 * (*r2 + th * (*r3 + th1 * *r4)));
  }
};

namespace tableau {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                        a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                        e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace tableau

namespace detail {

template <OdeSystem S>
double initial_step(const S& sys, double t, const Vector& y, const Vector& f0, double direction_span,
                    const StepControl& ctl, StepStats& stats) {
  const double d0 = sys.error_norm(y, y, y);
  const double d1 = sys.error_norm(f0, y, y);
  double h = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
  h = std::min({h, direction_span, ctl.max_step});
  Vector y1 = y + h * f0;
  Vector f1(y.size());
  sys.rhs(t + h, y1, f1);
  ++stats.rhs_evals;
  const double d2 = sys.error_norm(f1 - f0, y, y) / h;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
  return std::min({100.0 * h, h1, direction_span, ctl.max_step});
}

}  // namespace detail

/// Integrates y' = f(t, y) from (t0, y) to t_end. `observer(const DenseStep&)`
/// is called after every accepted step; it may return `false` to stop early.
/// Returns the time actually reached; `y` holds the final state.
template <OdeSystem S, class Observer>
double dopri5(const S& sys, Vector& y, double t0, double t_end, const StepControl& ctl, Observer&& observer,
              StepStats* stats_out = nullptr) {
  using namespace tableau;
  StepStats stats;
  const auto n = y.size();
  if (!(t_end > t0)) throw Error(ErrorCode::InvalidArgument, "t_end must exceed the start time");
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteState, "initial state is not finite");

  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  Vector r1(n), r2(n), r3(n), r4(n), yold(n);

  double t = t0;
  sys.rhs(t, y, k1);
  ++stats.rhs_evals;
  if (!k1.allFinite()) throw Error(ErrorCode::NonFiniteState, "right-hand side is not finite at the start");

  double h = ctl.initial_step > 0.0 ? ctl.initial_step : detail::initial_step(sys, t, y, k1, t_end - t0, ctl, stats);
  double fac_old = 1e-4;
  bool last_rejected = false;
  const double expo1 = 0.2 - ctl.pi_beta * 0.75;

  while (t < t_end) {
    if (stats.accepted + stats.rejected >= ctl.max_steps)
      throw Error(ErrorCode::StepSizeUnderflow, "maximum number of steps exceeded at t = " + std::to_string(t));

    h = std::min({h, ctl.max_step, sys.step_cap(t, y)});
    bool last = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    if (h < ctl.min_step && !last)
      throw Error(ErrorCode::StepSizeUnderflow, "step size " + std::to_string(h) + " below minimum at t = " + std::to_string(t));

    ytmp = y + h * a21 * k1;
    sys.rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    sys.rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    sys.rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    sys.rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double t_new = last ? t_end : t + h;
    sys.rhs(t_new, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    sys.rhs(t_new, ynew, k7);
    stats.rhs_evals += 6;

    double err_norm;
    if (!ynew.allFinite() || !k7.allFinite()) {
      err_norm = std::numeric_limits<double>::infinity();
    } else {
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err_norm = sys.error_norm(err, y, ynew);
      if (!std::isfinite(err_norm)) err_norm = std::numeric_limits<double>::infinity();
    }

    if (err_norm <= 1.0) {
      ++stats.accepted;
      // continuous extension coefficients
      r1 = ynew - y;
      r2 = h * k1 - r1;
      r3 = r1 - h * k7 - r2;
      r4 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      yold = y;
      y = ynew;
      const double t_old = t;
      t = t_new;
      k1 = k7;

      DenseStep step{t_old, t, &yold, &y, &r1, &r2, &r3, &r4};
      bool keep_going = true;
      if constexpr (std::is_same_v<decltype(observer(step)), bool>) {
        keep_going = observer(step);
      } else {
        observer(step);
      }
      if (!keep_going) break;

      const double fac11 = std::pow(std::max(err_norm, 1e-300), expo1);
      double fac = fac11 / std::pow(fac_old, ctl.pi_beta);
      fac = std::clamp(fac / ctl.safety, 1.0 / ctl.fac_max, 1.0 / ctl.fac_min);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      fac_old = std::max(err_norm, 1e-4);
      last_rejected = false;
      if (!last) h = h_new;
    } else {
      ++stats.rejected;
      last_rejected = true;
      if (!std::isfinite(err_norm)) {
        h *= 0.1;
      } else {
        const double fac11 = std::pow(err_norm, expo1);
        h /= std::min(1.0 / ctl.fac_min, fac11 / ctl.safety);
      }
      if (h < ctl.min_step) {
        if (!std::isfinite(err_norm))
          throw Error(ErrorCode::NonFiniteState, "state became non-finite near t = " + std::to_string(t));
        throw Error(ErrorCode::StepSizeUnderflow,
                    "tolerance not met at minimum step size near t = " + std::to_string(t));
      }
    }
  }
  if (stats_out) *stats_out = stats;
  return t;
}

}  // namespace degenode::ode
