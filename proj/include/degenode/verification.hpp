#pragma once

// Randomized and deterministic checks of the structural inequalities and
// identities behind the model: monotonicity of v -> f(|v|)v, the Lipschitz
// bound of the stiffness map, the chain rule for |v|^l v and the radial
// Wronskian identity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "degenode/integrator.hpp"
#include "degenode/model.hpp"

namespace degenode {

struct InequalityResult {
  std::string name;
  long samples = 0;
  long violations = 0;
  /// min over samples of (lhs - rhs) / max(|lhs|, |rhs|) in the "lhs >= rhs" orientation.
  double worst_margin = std::numeric_limits<double>::infinity();
};

struct LipschitzScale {
  double radius = 0.0;
  double max_ratio = 0.0;
};

struct InequalityReport {
  std::vector<InequalityResult> results;
  std::vector<LipschitzScale> lipschitz;
  double lipschitz_bound = 0.0;  // (beta+1) lambda_max
  bool lipschitz_bounded = false;

  [[nodiscard]] long total_violations() const {
    long v = 0;
    for (const auto& r : results) v += r.violations;
    return v;
  }
  [[nodiscard]] bool passed() const { return total_violations() == 0 && lipschitz_bounded; }
};

struct InequalityOptions {
  std::uint64_t seed = 42;
  long n_samples = 100000;
  double p = 1.0;           // f(s) = s^p with c = 1
  int dimension = 3;
  double radius = 1.0;      // pairs drawn from the ball B_R
  double beta = 2.0;        // stiffness exponent for the Lipschitz bound
  double tolerance = 1e-9;  // relative
  std::vector<double> lipschitz_radii{0.1, 1.0, 10.0};
};

namespace detail {

class Tally {
 public:
  Tally(std::string name, double tol) : tol_(tol) { r_.name = std::move(name); }

  /// Records one instance of lhs >= rhs.
  void check(double lhs, double rhs) {
    ++r_.samples;
    const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
    const double margin = (lhs - rhs) / scale;
    r_.worst_margin = std::min(r_.worst_margin, margin);
    if (margin < -tol_) ++r_.violations;
  }
  [[nodiscard]] const InequalityResult& result() const { return r_; }

 private:
  InequalityResult r_;
  double tol_;
};

inline Vector random_in_ball(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vector d(n);
  for (int i = 0; i < n; ++i) d(i) = normal(rng);
  const double nd = d.norm();
  if (nd == 0.0) return Vector::Zero(n);
  return d * (radius * std::pow(unif(rng), 1.0 / n) / nd);
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double lo, double hi) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  Vector lam(n);
  for (int i = 0; i < n; ++i) lam(i) = unif(rng);
  return q * lam.asDiagonal() * q.transpose();
}

/// A few structured pairs, then random ones: equal points, one at the
/// origin, antipodal and nearly coincident points.
inline std::pair<Vector, Vector> draw_pair(std::mt19937_64& rng, long k, int n, double radius) {
  Vector u = random_in_ball(rng, n, radius);
  switch (k % 8) {
    case 0: return {u, u};
    case 1: return {u, Vector::Zero(n)};
    case 2: return {u, -u};
    case 3: return {u, u + 1e-6 * radius * random_in_ball(rng, n, 1.0)};
    default: return {u, random_in_ball(rng, n, radius)};
  }
}

}  // namespace detail

/// Counts violations of the monotonicity family for f(s) = s^p (c = 1)
/// over random pairs in B_R, and the Lipschitz-type ratio of
/// w -> |A^{1/2}w|^beta A w across radii.
inline InequalityReport inequality_suite(const InequalityOptions& opt) {
  if (opt.n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (!(opt.p > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "p must be > 0");
  if (opt.dimension < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  if (!(opt.radius > 0.0) || !(opt.beta > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "radius and beta must be > 0");

  std::mt19937_64 rng(opt.seed);
  const int n = opt.dimension;
  const double p = opt.p;
  const double delta = 1.0 / std::pow(2.0, std::max(p, 1.0));
  const double c_holder = std::pow(delta, -1.0 / (p + 1.0));
  auto f = [p](double s) { return std::pow(s, p); };

  detail::Tally weighted("weighted_monotonicity", opt.tolerance);
  detail::Tally monotone("power_monotonicity", opt.tolerance);
  detail::Tally coercive("power_coercivity", opt.tolerance);
  detail::Tally uniform("uniform_monotonicity", opt.tolerance);
  detail::Tally holder("inverse_holder", opt.tolerance);
  std::uniform_real_distribution<double> weight(0.0, 2.0);

  for (long k = 0; k < opt.n_samples; ++k) {
    auto [u, v] = detail::draw_pair(rng, k, n, opt.radius);
    const double nu = u.norm(), nv = v.norm();
    const Vector d = u - v;
    const double nd = d.norm();

    double a = weight(rng), b = weight(rng);
    if ((a - b) * (nu - nv) < 0.0) std::swap(a, b);
    weighted.check((a * u - b * v).dot(d), 0.5 * (a + b) * nd * nd);

    const Vector fd = f(nu) * u - f(nv) * v;
    const double inner = fd.dot(d);
    const double spread = std::pow(nu, p) + std::pow(nv, p);
    monotone.check(inner, 0.5 * spread * nd * nd);
    coercive.check(fd.norm(), 0.5 * spread * nd);
    uniform.check(inner, delta * std::pow(nd, p + 2.0));
    holder.check(c_holder * std::pow(fd.norm(), 1.0 / (p + 1.0)), nd);
  }

  InequalityReport rep;
  rep.results = {weighted.result(), monotone.result(), coercive.result(), uniform.result(), holder.result()};

  const Matrix a = detail::random_spd(rng, n, 0.5, 4.0);
  const Operator op = build_operator(a);
  rep.lipschitz_bound = (opt.beta + 1.0) * op.lambda_max();
  auto stiff = [&](const Vector& w) {
    const double an = std::sqrt(std::max(0.0, w.dot(op.matrix() * w)));
    return Vector(norm_pow(an, opt.beta) * (op.matrix() * w));
  };
  rep.lipschitz_bounded = true;
  const long per_scale = std::max<long>(1, opt.n_samples / 10);
  for (double r : opt.lipschitz_radii) {
    LipschitzScale sc{r, 0.0};
    for (long k = 0; k < per_scale; ++k) {
      auto [w, v] = detail::draw_pair(rng, k, n, r);
      const double nd = (w - v).norm();
      if (nd == 0.0) continue;
      const double m = std::max(a_half_norm(op, w), a_half_norm(op, v));
      if (m == 0.0) continue;
      const double ratio = (stiff(w) - stiff(v)).norm() / (std::pow(m, opt.beta) * nd);
      sc.max_ratio = std::max(sc.max_ratio, ratio);
    }
    if (!(sc.max_ratio <= rep.lipschitz_bound * (1.0 + opt.tolerance))) rep.lipschitz_bounded = false;
    rep.lipschitz.push_back(sc);
  }
  return rep;
}

/// A smooth path v(t) on [t0, t1] with the times where it vanishes.
struct PathSpec {
  std::function<Vector(double)> v;
  double t0 = 0.0;
  double t1 = 1.0;
  int n_grid = 201;
  double h = 1e-3;                   // finite-difference step
  std::vector<double> zeros;         // isolated zeros of v
  double regular_threshold = 1e-2;   // |v| at or above this counts as regular
};

/// v(t) = sum_k coeffs[k] t^k with vector coefficients.
inline std::function<Vector(double)> polynomial_path(std::vector<Vector> coeffs) {
  if (coeffs.empty()) throw Error(ErrorCode::InvalidArgument, "polynomial path needs coefficients");
  return [c = std::move(coeffs)](double t) {
    Vector acc = c.back();
    for (auto it = c.rbegin() + 1; it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
  };
}

struct ChainRuleReport {
  double max_defect_regular = 0.0;
  double max_defect_at_zeros = 0.0;
  double max_defect_all = 0.0;
  int regular_points = 0;
};

/// Compares ((|v|^l v)', v) with d/dt ((l+1)/(l+2) |v|^{l+2}), both by
/// central differences with step h.
inline ChainRuleReport chain_rule_check(double l, const PathSpec& path) {
  if (!(l >= 0.0)) throw Error(ErrorCode::NonPositiveParameter, "l must be >= 0");
  if (!path.v || path.n_grid < 2 || !(path.t1 > path.t0) || !(path.h > 0.0))
    throw Error(ErrorCode::InvalidArgument, "invalid path: need v, n_grid >= 2, t1 > t0 and h > 0");
  const double h = path.h;
  const double kin = (l + 1.0) / (l + 2.0);
  auto defect = [&](double t) {
    const Vector lhs_diff = (phi(path.v(t + h), l) - phi(path.v(t - h), l)) / (2.0 * h);
    const double lhs = lhs_diff.dot(path.v(t));
    const double rhs = kin * (std::pow(path.v(t + h).norm(), l + 2.0) - std::pow(path.v(t - h).norm(), l + 2.0)) / (2.0 * h);
    return std::abs(lhs - rhs);
  };
  ChainRuleReport rep;
  for (int i = 0; i < path.n_grid; ++i) {
    const double t = path.t0 + (path.t1 - path.t0) * i / (path.n_grid - 1);
    const double d = defect(t);
    rep.max_defect_all = std::max(rep.max_defect_all, d);
    if (path.v(t).norm() >= path.regular_threshold) {
      rep.max_defect_regular = std::max(rep.max_defect_regular, d);
      ++rep.regular_points;
    }
  }
  for (double z : path.zeros) {
    const double d = defect(z);
    rep.max_defect_at_zeros = std::max(rep.max_defect_at_zeros, d);
    rep.max_defect_all = std::max(rep.max_defect_all, d);
  }
  return rep;
}

struct WronskianPair {
  int i = 0;
  int j = 0;
  double w0 = 0.0;
  double max_defect = 0.0;  // max_t |w(t) - w(t0) exp(-(t - t0))|
  double tail_cosine = 0.0;
};

struct WronskianReport {
  std::vector<WronskianPair> pairs;
  [[nodiscard]] double max_defect() const {
    double m = 0.0;
    for (const auto& p : pairs) m = std::max(m, p.max_defect);
    return m;
  }
  [[nodiscard]] double min_abs_tail_cosine() const {
    double m = 1.0;
    for (const auto& p : pairs) m = std::min(m, std::abs(p.tail_cosine));
    return m;
  }
};

/// Pairwise Wronskians w = y'z - yz' of a trajectory of u'' + u' + |u|^beta u = 0.
/// `tail_fraction` selects the final part of the time span for the cosine
/// between the normalized component histories.
inline WronskianReport wronskian_radial_check(const Trajectory& traj, double tail_fraction = 0.1) {
  if (traj.damping.kind() != DampingKind::LinearUnit || !traj.op.is_identity() || traj.params.l != 0.0 ||
      traj.formulation != Formulation::Momentum)
    throw Error(ErrorCode::WrongModel, "Wronskian identity needs linear unit damping, A = I and l = 0");
  if (traj.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
  const int n = traj.dimension();
  const double t0 = traj.samples.front().state.t;
  const double t_end = traj.samples.back().state.t;
  const double tail_lo = t_end - tail_fraction * (t_end - t0);

  WronskianReport rep;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      WronskianPair pr{i, j};
      const auto& s0 = traj.samples.front().state;
      pr.w0 = s0.p(i) * s0.u(j) - s0.u(i) * s0.p(j);
      double yy = 0.0, zz = 0.0, yz = 0.0;
      for (const auto& s : traj.samples) {
        const auto& st = s.state;
        const double w = st.p(i) * st.u(j) - st.u(i) * st.p(j);
        pr.max_defect = std::max(pr.max_defect, std::abs(w - pr.w0 * std::exp(-(st.t - t0))));
        const double nu = st.u.norm();
        if (st.t >= tail_lo && nu > 0.0) {
          const double y = st.u(i) / nu, z = st.u(j) / nu;
          yy += y * y;
          zz += z * z;
          yz += y * z;
        }
      }
      pr.tail_cosine = yy > 0.0 && zz > 0.0 ? yz / std::sqrt(yy * zz) : 1.0;
      rep.pairs.push_back(pr);
    }
  }
  return rep;
}

}  // namespace degenode
