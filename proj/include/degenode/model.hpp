#pragma once

// Parameters, operator, damping law and the energy-type functionals of
//   (|u'|^l u')' + |A^{1/2}u|^beta A u + g(u') = 0   in R^N.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "degenode/error.hpp"

namespace degenode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Regime { FastOnly, SlowFastCoexist };

constexpr const char* to_string(Regime r) {
  return r == Regime::FastOnly ? "FastOnly" : "SlowFastCoexist";
}

/// Exponents, damping coefficient and every exponent derived from them.
/// Build through validate_parameters(); the derived fields are not
/// recomputed if the primary ones are edited afterwards.
struct ModelParams {
  double l = 0.0;
  double beta = 1.0;
  double alpha = 1.0;
  double c = 1.0;

  double m = 0.0;          // l / 2
  double threshold = 0.0;  // (beta(1+l)+l)/(beta+2)
  std::optional<double> fast_exponent;  // (l+2)/(alpha-l), alpha > l
  std::optional<double> slow_exponent;  // (alpha+1)(beta+2)/(beta-alpha), alpha < beta
  double gamma_slowfast = 0.0;  // (beta+1)/(alpha+1)
  double gamma_hat = 0.0;       // (beta+2)/(l+2)
  double gamma0 = 0.0;
  Regime regime = Regime::FastOnly;

  std::vector<std::string> warnings;

  /// Exponent of the slow lower envelope |u(t)| >= M (1+t)^{-q}.
  [[nodiscard]] double slow_envelope_exponent() const { return (alpha + 1.0) / (beta - alpha); }
};

inline ModelParams validate_parameters(double l, double beta, double alpha, double c) {
  if (!(l >= 0.0) || !std::isfinite(l))
    throw Error(ErrorCode::NonPositiveParameter, "l must be >= 0");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw Error(ErrorCode::NonPositiveParameter, "beta must be > 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::NonPositiveParameter, "alpha must be > 0");
  if (!(c > 0.0) || !std::isfinite(c))
    throw Error(ErrorCode::NonPositiveParameter, "c must be > 0");

  ModelParams p;
  p.l = l;
  p.beta = beta;
  p.alpha = alpha;
  p.c = c;
  p.m = l / 2.0;
  p.threshold = (beta * (1.0 + l) + l) / (beta + 2.0);
  if (alpha > l) p.fast_exponent = (l + 2.0) / (alpha - l);
  if (alpha < beta) p.slow_exponent = (alpha + 1.0) * (beta + 2.0) / (beta - alpha);
  p.gamma_slowfast = (beta + 1.0) / (alpha + 1.0);
  p.gamma_hat = (beta + 2.0) / (l + 2.0);
  p.gamma0 = std::max({(beta - l) / (2.0 * (l + 2.0)),
                       (beta + 2.0) * (alpha - l) / (2.0 * (l + 2.0)),
                       (beta - alpha) / (2.0 * (alpha + 1.0))});
  p.regime = alpha < p.threshold ? Regime::SlowFastCoexist : Regime::FastOnly;

  if (!(l < 1.0)) p.warnings.emplace_back("l >= 1: slow-set and slow/fast alternative results do not apply");
  if (!(l < alpha)) p.warnings.emplace_back("l >= alpha: no fast decay exponent; slow/fast results do not apply");
  return p;
}

/// Symmetric positive-definite operator A with its spectral data.
class Operator {
 public:
  Operator() = default;

  [[nodiscard]] int n() const { return static_cast<int>(matrix_.rows()); }
  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] double lambda_min() const { return eigenvalues_(0); }
  [[nodiscard]] double lambda_max() const { return eigenvalues_(eigenvalues_.size() - 1); }
  /// Ascending eigenvalues with matching orthonormal eigenvector columns.
  [[nodiscard]] const Vector& eigenvalues() const { return eigenvalues_; }
  [[nodiscard]] const Matrix& eigenvectors() const { return eigenvectors_; }
  [[nodiscard]] bool is_identity() const { return matrix_.isIdentity(0.0); }

  friend Operator build_operator(const Matrix& matrix);

 private:
  Matrix matrix_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

inline Operator build_operator(const Matrix& matrix) {
  if (matrix.rows() == 0 || matrix.rows() != matrix.cols())
    throw Error(ErrorCode::DimensionMismatch, "operator matrix must be square and non-empty");
  if (!matrix.allFinite()) throw Error(ErrorCode::InvalidArgument, "operator matrix has non-finite entries");
  const double scale = std::max(matrix.norm(), std::numeric_limits<double>::min());
  const double asym = (matrix - matrix.transpose()).norm() / scale;
  if (asym > 1e-8)
    throw Error(ErrorCode::NotSymmetric, "relative asymmetry " + std::to_string(asym) + " exceeds 1e-8");

  Operator op;
  op.matrix_ = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(op.matrix_);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, "eigensolver failed");
  op.eigenvalues_ = eig.eigenvalues();
  op.eigenvectors_ = eig.eigenvectors();
  if (!(op.eigenvalues_(0) > 0.0))
    throw Error(ErrorCode::NotCoercive, "smallest eigenvalue " + std::to_string(op.eigenvalues_(0)) + " <= 0");
  return op;
}

inline Operator identity_operator(int n) { return build_operator(Matrix::Identity(n, n)); }

inline Operator diagonal_operator(const Vector& diag) { return build_operator(diag.asDiagonal().toDenseMatrix()); }

inline void check_dimension(const Operator& op, const Vector& v, const char* what) {
  if (v.size() != op.n())
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has dimension " + std::to_string(v.size()) +
                                                  ", operator has " + std::to_string(op.n()));
}

/// |A^{1/2} u| = sqrt((Au, u)).
inline double a_half_norm(const Operator& op, const Vector& u) {
  check_dimension(op, u, "u");
  return std::sqrt(std::max(0.0, u.dot(op.matrix() * u)));
}

/// |x|^e with the convention 0^0 = 1, 0^e = 0 for e > 0.
inline double norm_pow(double norm, double e) { return e == 0.0 ? 1.0 : std::pow(norm, e); }

/// v -> |v|^l v, with phi(0) = 0 for every l >= 0.
inline Vector phi(const Vector& v, double l) {
  const double nv = v.norm();
  if (nv == 0.0) return Vector::Zero(v.size());
  return norm_pow(nv, l) * v;
}

/// Inverse of phi: p -> |p|^{-l/(l+1)} p, with 0 -> 0.
inline Vector phi_inverse(const Vector& p, double l) {
  const double np = p.norm();
  if (np == 0.0) return Vector::Zero(p.size());
  return std::pow(np, -l / (l + 1.0)) * p;
}

enum class DampingKind { PowerLaw, LinearUnit, Custom };

/// Nonlinear damping g. PowerLaw is g(v) = c|v|^alpha v, LinearUnit is
/// g(v) = v; Custom wraps a user closure, which must satisfy g(0) = 0.
class Damping {
 public:
  using Closure = std::function<Vector(const Vector&)>;

  static Damping power_law(double c, double alpha) {
    if (!(c > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "damping coefficient must be > 0");
    if (!(alpha >= 0.0)) throw Error(ErrorCode::NonPositiveParameter, "damping exponent must be >= 0");
    return Damping(DampingKind::PowerLaw, c, alpha, {});
  }
  static Damping linear_unit() { return Damping(DampingKind::LinearUnit, 1.0, 0.0, {}); }
  static Damping custom(Closure g) { return Damping(DampingKind::Custom, 0.0, 0.0, std::move(g)); }
  static Damping from_params(const ModelParams& p) { return power_law(p.c, p.alpha); }

  [[nodiscard]] DampingKind kind() const { return kind_; }
  [[nodiscard]] double c() const { return c_; }
  [[nodiscard]] double alpha() const { return alpha_; }

  [[nodiscard]] Vector apply(const Vector& v) const {
    switch (kind_) {
      case DampingKind::PowerLaw: {
        const double nv = v.norm();
        if (nv == 0.0) return Vector::Zero(v.size());
        return c_ * norm_pow(nv, alpha_) * v;
      }
      case DampingKind::LinearUnit: return v;
      case DampingKind::Custom: return closure_(v);
    }
    return v;
  }

  /// (g(v), v).
  [[nodiscard]] double dissipation(const Vector& v) const {
    switch (kind_) {
      case DampingKind::PowerLaw: {
        const double nv = v.norm();
        return nv == 0.0 ? 0.0 : c_ * std::pow(nv, alpha_ + 2.0);
      }
      case DampingKind::LinearUnit: return v.squaredNorm();
      case DampingKind::Custom: return closure_(v).dot(v);
    }
    return 0.0;
  }

 private:
  Damping(DampingKind k, double c, double a, Closure g) : kind_(k), c_(c), alpha_(a), closure_(std::move(g)) {}

  DampingKind kind_ = DampingKind::PowerLaw;
  double c_ = 1.0;
  double alpha_ = 1.0;
  Closure closure_;
};

/// (t, u, p) with p = |u'|^l u'.
struct State {
  double t = 0.0;
  Vector u;
  Vector p;

  static State from_velocity(double t, Vector u, const Vector& velocity, double l) {
    Vector p = phi(velocity, l);
    return State{t, std::move(u), std::move(p)};
  }
  [[nodiscard]] Vector velocity(double l) const { return phi_inverse(p, l); }
};

struct EnergyRecord {
  double t = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;
  std::optional<double> h_ratio;
  std::optional<double> k_ratio;
};

struct SlowSetParams {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double eps0 = 1e-2;
  double eps1 = 1e-2;

  [[nodiscard]] bool member() const { return sigma0 < eps0 && sigma1 < eps1; }
};

inline void check_state(const Operator& op, const State& s) {
  check_dimension(op, s.u, "u");
  check_dimension(op, s.p, "p");
}

/// E = (l+1)/(l+2)|u'|^{l+2} + |A^{1/2}u|^{beta+2}/(beta+2); |u'|^{l+2} = |p|^{(l+2)/(l+1)}.
inline double energy_from_norms(const ModelParams& prm, double velocity_norm, double a_half) {
  const double kinetic = velocity_norm == 0.0 ? 0.0 : (prm.l + 1.0) / (prm.l + 2.0) * std::pow(velocity_norm, prm.l + 2.0);
  const double potential = a_half == 0.0 ? 0.0 : std::pow(a_half, prm.beta + 2.0) / (prm.beta + 2.0);
  return kinetic + potential;
}

inline double energy(const ModelParams& prm, const Operator& op, const State& s) {
  check_state(op, s);
  const double np = s.p.norm();
  const double nv = np == 0.0 ? 0.0 : std::pow(np, 1.0 / (prm.l + 1.0));
  return energy_from_norms(prm, nv, a_half_norm(op, s.u));
}

/// E_eps = (l+1)/(l+2)(eps+|v|^2)^{m+1} - eps(eps+|v|^2)^m + |A^{1/2}u|^{beta+2}/(beta+2).
/// May be slightly negative for small |v|.
inline double energy_regularized(const ModelParams& prm, const Operator& op, const Vector& u, const Vector& v, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "eps must be > 0");
  check_dimension(op, u, "u");
  check_dimension(op, v, "v");
  const double s = eps + v.squaredNorm();
  const double potential = std::pow(a_half_norm(op, u), prm.beta + 2.0) / (prm.beta + 2.0);
  return (prm.l + 1.0) / (prm.l + 2.0) * std::pow(s, prm.m + 1.0) - eps * std::pow(s, prm.m) + potential;
}

inline double energy_regularized(const ModelParams& prm, const Operator& op, const State& s, double eps) {
  return energy_regularized(prm, op, s.u, s.velocity(prm.l), eps);
}

struct PerturbedEnergy {
  double value = 0.0;
  bool gamma_below_gamma0 = false;
};

/// E + eps (|u|^{2 gamma} u, p). Used as a monotonicity diagnostic; a gamma
/// below gamma0 is flagged but still evaluated.
inline PerturbedEnergy perturbed_energy(const ModelParams& prm, const Operator& op, const State& s, double eps, double gamma) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be >= 0");
  PerturbedEnergy out;
  out.gamma_below_gamma0 = gamma < prm.gamma0;
  const double nu = s.u.norm();
  const double coupling = nu == 0.0 ? 0.0 : std::pow(nu, 2.0 * gamma) * s.u.dot(s.p);
  out.value = energy(prm, op, s) + eps * coupling;
  return out;
}

namespace detail {
inline std::optional<double> ratio(const ModelParams& prm, const Operator& op, const State& s, double gamma) {
  check_state(op, s);
  const double a = a_half_norm(op, s.u);
  if (a == 0.0) return std::nullopt;
  const double np = s.p.norm();
  const double v2 = np == 0.0 ? 0.0 : std::pow(np, 2.0 / (prm.l + 1.0));
  return v2 / std::pow(a, 2.0 * gamma);
}
}  // namespace detail

/// H = |u'|^2 / |A^{1/2}u|^{2 gamma}, gamma = (beta+1)/(alpha+1); empty when u = 0.
inline std::optional<double> h_ratio(const ModelParams& prm, const Operator& op, const State& s) {
  return detail::ratio(prm, op, s, prm.gamma_slowfast);
}

/// K = |u'|^2 / |A^{1/2}u|^{2 gamma_hat}, gamma_hat = (beta+2)/(l+2); empty when u = 0.
inline std::optional<double> k_ratio(const ModelParams& prm, const Operator& op, const State& s) {
  return detail::ratio(prm, op, s, prm.gamma_hat);
}

/// sigma0 and sigma1 of the slow-set construction for initial data (u0, u1).
inline SlowSetParams slow_set_sigmas(const ModelParams& prm, const Operator& op, const Vector& u0, const Vector& u1,
                                     double eps0 = 1e-2, double eps1 = 1e-2) {
  check_dimension(op, u0, "u0");
  check_dimension(op, u1, "u1");
  const double a = a_half_norm(op, u0);
  if (a == 0.0) throw Error(ErrorCode::ZeroInitialPosition, "sigma1 requires u0 != 0");
  const double n1 = u1.norm();
  const double kin = n1 == 0.0 ? 0.0 : (prm.beta + 2.0) * (prm.l + 1.0) / (prm.l + 2.0) * std::pow(n1, prm.l + 2.0);
  SlowSetParams s;
  s.sigma0 = std::pow(kin + std::pow(a, prm.beta + 2.0), 1.0 / (prm.beta + 2.0));
  const double gamma = (prm.beta - prm.alpha) / (prm.alpha + 1.0) + 1.0;
  s.sigma1 = n1 * n1 / std::pow(a, 2.0 * gamma);
  s.eps0 = eps0;
  s.eps1 = eps1;
  return s;
}

inline EnergyRecord energy_record(const ModelParams& prm, const Operator& op, const Damping& g, const State& s) {
  EnergyRecord r;
  r.t = s.t;
  r.energy = energy(prm, op, s);
  r.dissipation = g.dissipation(s.velocity(prm.l));
  r.h_ratio = h_ratio(prm, op, s);
  r.k_ratio = k_ratio(prm, op, s);
  return r;
}

}  // namespace degenode
