#pragma once

// Constructors for special solution families: eigenmode data, the scalar
// reference problem, slow-set samples, fast solutions located by shooting,
// and the standard battery used for the dichotomy and energy checks.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "degenode/analysis.hpp"
#include "degenode/integrator.hpp"
#include "degenode/model.hpp"
#include "degenode/verification.hpp"

namespace degenode {

struct EigenmodeSpec {
  double eigenvalue = 1.0;
  Vector eigenvector;
  double v0 = 0.0;
  double v1 = 0.0;
};

struct InitialData {
  Vector u0;
  Vector u1;  // velocity
};

inline EigenmodeSpec eigenmode_spec(const Operator& op, int eigen_index, double v0, double v1) {
  if (eigen_index < 0 || eigen_index >= op.n())
    throw Error(ErrorCode::InvalidArgument, "eigen_index " + std::to_string(eigen_index) + " out of range");
  return EigenmodeSpec{op.eigenvalues()(eigen_index), op.eigenvectors().col(eigen_index), v0, v1};
}

/// (v0 phi, v1 phi) for an eigenpair (lambda, phi) of A.
inline InitialData eigenmode_initial_data(const Operator& op, const EigenmodeSpec& spec) {
  check_dimension(op, spec.eigenvector, "eigenvector");
  if (std::abs(spec.eigenvector.norm() - 1.0) > 1e-12)
    throw Error(ErrorCode::NotAnEigenpair, "eigenvector is not a unit vector");
  const double res = (op.matrix() * spec.eigenvector - spec.eigenvalue * spec.eigenvector).norm();
  if (res > 1e-10 * std::max(1.0, std::abs(spec.eigenvalue)))
    throw Error(ErrorCode::NotAnEigenpair, "A phi - lambda phi has norm " + std::to_string(res));
  return InitialData{spec.v0 * spec.eigenvector, spec.v1 * spec.eigenvector};
}

/// One-dimensional instance (|v'|^l v')' + C1 |v|^beta v + C2 |v'|^alpha v' = 0.
struct ScalarProblem {
  ModelParams params;
  Operator op;
  Damping damping = Damping::linear_unit();
};

inline ScalarProblem scalar_problem(double l, double c1, double c2, double alpha, double beta) {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "C1 and C2 must be > 0");
  ScalarProblem sp;
  sp.params = validate_parameters(l, beta, alpha, c2);
  Vector a(1);
  a(0) = std::pow(c1, 2.0 / (beta + 2.0));
  sp.op = diagonal_operator(a);
  sp.damping = Damping::power_law(c2, alpha);
  return sp;
}

inline Trajectory scalar_reference_solve(double l, double c1, double c2, double alpha, double beta, double v0,
                                         double v1, double t_end, const Tolerances& tol, const SampleSpec& spec = {}) {
  const ScalarProblem sp = scalar_problem(l, c1, c2, alpha, beta);
  Vector u0(1), u1(1);
  u0(0) = v0;
  u1(0) = v1;
  return integrate(sp.params, sp.op, sp.damping, State::from_velocity(0.0, u0, u1, l), t_end, tol, spec);
}

struct SlowSetSample {
  InitialData data;
  SlowSetParams sigmas;
};

/// Draws (u0, u1) with sigma0 < eps0 and sigma1 < eps1: u0 in a random
/// direction with |A^{1/2}u0| in [eps0/4, eps0/2], u1 in a random direction
/// with sigma1 below eps1/2. With `enforce_hypotheses` the call rejects
/// parameters outside l < 1, l < alpha, coexistence regime.
inline SlowSetSample sample_slow_set(const ModelParams& prm, const Operator& op, double eps0, double eps1,
                                     std::mt19937_64& rng, bool enforce_hypotheses = true) {
  if (!(eps0 > 0.0) || !(eps1 > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "eps0 and eps1 must be > 0");
  if (enforce_hypotheses && (!(prm.l < 1.0) || !(prm.l < prm.alpha) || prm.regime != Regime::SlowFastCoexist))
    throw Error(ErrorCode::HypothesesViolated, "slow set requires l < 1, l < alpha and the coexistence regime");
  const int n = op.n();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  auto direction = [&] {
    Vector d(n);
    do {
      for (int i = 0; i < n; ++i) d(i) = normal(rng);
    } while (d.norm() == 0.0);
    return Vector(d / d.norm());
  };

  const Vector w = direction();
  const double s = 0.25 + 0.25 * unif(rng);
  Vector u0 = (eps0 * s / a_half_norm(op, w)) * w;
  const double a = a_half_norm(op, u0);
  const double sigma1_target = 0.5 * eps1 * unif(rng);
  const double gamma = prm.gamma_slowfast;
  Vector u1 = std::sqrt(sigma1_target * std::pow(a, 2.0 * gamma)) * direction();

  SlowSetParams sig = slow_set_sigmas(prm, op, u0, u1, eps0, eps1);
  while (!sig.member() && u1.norm() > 0.0) {
    u1 *= 0.5;
    sig = slow_set_sigmas(prm, op, u0, u1, eps0, eps1);
  }
  if (!sig.member()) throw Error(ErrorCode::HypothesesViolated, "could not draw a slow-set member");
  return SlowSetSample{InitialData{std::move(u0), std::move(u1)}, sig};
}

struct FastShot {
  double v1 = 0.0;
  double bracket_width = 0.0;
  double horizon = 0.0;
  int iterations = 0;
};

/// Locates v1 such that (v0 phi, v1 phi) lies on the fast separatrix, by
/// bisection on the sign of (u(horizon), phi). The search scans outward from
/// v1 = 0 by doubling until the sign flips, then bisects to machine precision.
inline FastShot shoot_fast_velocity(const ModelParams& prm, const Operator& op, const Damping& g, const Vector& phi,
                                    double v0, double horizon, const Tolerances& tol, int max_doublings = 40) {
  check_dimension(op, phi, "phi");
  if (v0 == 0.0) throw Error(ErrorCode::ZeroInitialPosition, "shooting needs v0 != 0");
  SampleSpec none{{}, false};
  auto side = [&](double v1) {
    const State s = State::from_velocity(0.0, v0 * phi, v1 * phi, prm.l);
    const Trajectory tr = integrate(prm, op, g, s, horizon, tol, none);
    const double x = tr.samples.back().state.u.dot(phi);
    return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0);
  };

  FastShot shot;
  shot.horizon = horizon;
  const int s0 = side(0.0);
  double lo = 0.0, hi = 0.0;
  int s_lo = s0;
  bool found = s0 == 0;
  const double scale = std::abs(v0);
  for (int k = 0; k < max_doublings && !found; ++k) {
    const double step = scale * std::ldexp(1.0, k - 10);
    for (double cand : {-step, step}) {
      if (side(cand) != s0) {
        lo = 0.0;
        hi = cand;
        found = true;
        break;
      }
    }
  }
  if (!found) throw Error(ErrorCode::InvalidArgument, "no sign change found while shooting for a fast solution");
  if (s0 == 0) {
    shot.v1 = 0.0;
    return shot;
  }
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const int sm = side(mid);
    ++shot.iterations;
    if (sm == 0) {
      lo = hi = mid;
      break;
    }
    if (sm == s_lo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  shot.v1 = 0.5 * (lo + hi);
  shot.bracket_width = std::abs(hi - lo);
  return shot;
}

enum class BatteryKind { SlowSet, Fast, Random };

constexpr const char* to_string(BatteryKind k) {
  switch (k) {
    case BatteryKind::SlowSet: return "slow_set";
    case BatteryKind::Fast: return "fast";
    case BatteryKind::Random: return "random";
  }
  return "random";
}

/// A fully specified run in the coexistence regime.
struct BatteryCase {
  std::string name;
  BatteryKind kind = BatteryKind::Random;
  ModelParams params;
  Operator op;
  Damping damping = Damping::linear_unit();
  InitialData data;
  double t_end = 0.0;
  FitWindow fit_window;
};

struct BatteryOptions {
  std::uint64_t seed = 7;
  Tolerances tol{};
};

namespace detail {

struct BatteryFamily {
  double l, beta, alpha;
  int slow_samples;
  int fast_runs;
  int random_runs;
  double slow_t_end;
  FitWindow slow_window;
  double fast_t_end;
  FitWindow fast_window;
};

}  // namespace detail

/// The standard battery: slow-set samples, fast solutions built by shooting
/// along eigenvectors, and random data, for three parameter points in the
/// coexistence regime with l < 1 and l < alpha.
inline std::vector<BatteryCase> standard_battery(const BatteryOptions& opt = {}) {
  const std::vector<detail::BatteryFamily> families{
      {0.0, 2.0, 0.25, 4, 2, 2, 1e7, {1e5, 1e7}, 1e4, {1e2, 1e4}},
      {0.5, 1.0, 0.6, 4, 0, 2, 1e5, {1e3, 1e5}, 0.0, {}},
      {0.2, 2.0, 0.4, 3, 2, 2, 1e7, {1e5, 1e7}, 1e3, {1e1, 1e3}},
  };
  std::mt19937_64 rng(opt.seed);
  Vector diag(2);
  diag << 1.0, 4.0;
  const Operator a_diag = diagonal_operator(diag);

  std::vector<BatteryCase> out;
  for (const auto& fam : families) {
    const ModelParams prm = validate_parameters(fam.l, fam.beta, fam.alpha, 1.0);
    const Damping g = Damping::from_params(prm);
    const std::string tag = "l" + std::to_string(fam.l).substr(0, 3) + "_b" + std::to_string(fam.beta).substr(0, 3) +
                            "_a" + std::to_string(fam.alpha).substr(0, 4);
    for (int k = 0; k < fam.slow_samples; ++k) {
      const Operator op = k % 2 == 0 ? a_diag : build_operator(detail::random_spd(rng, 3, 0.5, 4.0));
      const SlowSetSample smp = sample_slow_set(prm, op, 1e-2, 1e-2, rng);
      out.push_back({tag + "_slow" + std::to_string(k), BatteryKind::SlowSet, prm, op, g, smp.data, fam.slow_t_end,
                     fam.slow_window});
    }
    for (int k = 0; k < fam.fast_runs; ++k) {
      const EigenmodeSpec spec = eigenmode_spec(a_diag, k % a_diag.n(), 1.0, 0.0);
      const FastShot shot = shoot_fast_velocity(prm, a_diag, g, spec.eigenvector, 1.0, 10.0 * fam.fast_t_end, opt.tol);
      const InitialData data = eigenmode_initial_data(a_diag, EigenmodeSpec{spec.eigenvalue, spec.eigenvector, 1.0, shot.v1});
      out.push_back({tag + "_fast" + std::to_string(k), BatteryKind::Fast, prm, a_diag, g, data, fam.fast_t_end,
                     fam.fast_window});
    }
    for (int k = 0; k < fam.random_runs; ++k) {
      const Operator op = k % 2 == 0 ? a_diag : build_operator(detail::random_spd(rng, 3, 0.5, 4.0));
      InitialData data{detail::random_in_ball(rng, op.n(), 1.0), detail::random_in_ball(rng, op.n(), 1.0)};
      out.push_back({tag + "_random" + std::to_string(k), BatteryKind::Random, prm, op, g, std::move(data),
                     fam.slow_t_end, fam.slow_window});
    }
  }
  return out;
}

inline Trajectory run_battery_case(const BatteryCase& bc, const Tolerances& tol, int points_per_decade = 40) {
  SampleSpec spec{log_times(1e-2, bc.t_end, points_per_decade), false};
  return integrate(bc.params, bc.op, bc.damping, State::from_velocity(0.0, bc.data.u0, bc.data.u1, bc.params.l),
                   bc.t_end, tol, spec);
}

}  // namespace degenode
