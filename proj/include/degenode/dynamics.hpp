#pragma once

// Right-hand sides of the first-order systems.
//
// Momentum form, state (u, p) with p = |u'|^l u':
//   u' = phi^{-1}(p),   p' = -|A^{1/2}u|^beta A u - g(u').
// This is continuous everywhere (Holder at p = 0) and is the form used for
// production runs.
//
// Regularized form, state (u, v) with v = u', eps > 0:
//   (eps+|v|^2)^m v' = l [|A^{1/2}u|^beta (Au,v) + (g(v),v)] / (eps+(l+1)|v|^2) v
//                      - |A^{1/2}u|^beta A u - g(v).

#include <cmath>

#include "degenode/model.hpp"

namespace degenode {

struct StateDerivative {
  Vector du;
  Vector dp;
};

struct RegularizedState {
  Vector u;
  Vector v;
  double eps = 0.0;
};

struct RegularizedDerivative {
  Vector du;
  Vector dv;
};

namespace detail {

/// Stiffness force |A^{1/2}u|^beta A u, written into `out`.
inline void stiffness_force(const ModelParams& prm, const Operator& op, const Vector& u, Vector& out) {
  out.noalias() = op.matrix() * u;
  const double a2 = u.dot(out);
  if (a2 <= 0.0) {
    out.setZero();
    return;
  }
  out *= std::pow(a2, 0.5 * prm.beta);
}

}  // namespace detail

inline StateDerivative rhs_momentum(const ModelParams& prm, const Operator& op, const Damping& g, const State& s) {
  check_state(op, s);
  StateDerivative d;
  d.du = phi_inverse(s.p, prm.l);
  d.dp.resize(s.u.size());
  detail::stiffness_force(prm, op, s.u, d.dp);
  d.dp = -d.dp - g.apply(d.du);
  return d;
}

inline RegularizedDerivative rhs_regularized(const ModelParams& prm, const Operator& op, const Damping& g,
                                             const RegularizedState& rs) {
  if (!(rs.eps > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "eps must be > 0");
  check_dimension(op, rs.u, "u");
  check_dimension(op, rs.v, "v");
  const double eps = rs.eps;
  Vector force(rs.u.size());
  detail::stiffness_force(prm, op, rs.u, force);
  const Vector gv = g.apply(rs.v);
  const double v2 = rs.v.squaredNorm();
  const double power_in = force.dot(rs.v) + gv.dot(rs.v);
  const double cross = prm.l * power_in / (eps + (prm.l + 1.0) * v2);
  RegularizedDerivative d;
  d.du = rs.v;
  d.dv = (cross * rs.v - force - gv) / std::pow(eps + v2, prm.m);
  return d;
}

/// (g(u'), u'): the rate at which energy is dissipated.
inline double dissipation_rate(const Damping& g, const Vector& du) { return g.dissipation(du); }

}  // namespace degenode
