#pragma once

// Property suites driven by the `verify` command.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "degenode/integrator.hpp"
#include "degenode/scenarios.hpp"
#include "degenode/verification.hpp"

namespace degenode {

struct SuiteResult {
  std::string name;
  long violations = 0;
  std::vector<std::string> lines;

  [[nodiscard]] bool passed() const { return violations == 0; }
};

namespace suite_detail {

inline std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline void expect(SuiteResult& r, bool ok, const std::string& line) {
  r.lines.push_back((ok ? "ok    " : "FAIL  ") + line);
  if (!ok) ++r.violations;
}

}  // namespace suite_detail

inline SuiteResult inequality_suite_run(long samples, std::uint64_t seed) {
  using suite_detail::expect;
  using suite_detail::fmt;
  SuiteResult res{"inequalities", 0, {}};
  for (double p : {0.5, 1.0, 2.0}) {
    InequalityOptions opt;
    opt.seed = seed;
    opt.n_samples = samples;
    opt.p = p;
    const InequalityReport rep = inequality_suite(opt);
    for (const auto& r : rep.results)
      expect(res, r.violations == 0,
             fmt("p=%g ", p) + r.name + ": " + std::to_string(r.violations) + "/" + std::to_string(r.samples) +
                 " violations, worst margin " + fmt("%.3e", r.worst_margin));
    std::string scales;
    for (const auto& s : rep.lipschitz) scales += fmt(" R=%g:", s.radius) + fmt("%.4f", s.max_ratio);
    expect(res, rep.lipschitz_bounded,
           fmt("p=%g lipschitz ratio bounded by ", p) + fmt("%.4f", rep.lipschitz_bound) + " at" + scales);
  }
  return res;
}

inline SuiteResult chain_rule_suite_run() {
  using suite_detail::expect;
  using suite_detail::fmt;
  SuiteResult res{"chain_rule", 0, {}};

  auto parabola = [](double h) {
    PathSpec ps;
    ps.v = [](double t) { return Vector((Vector(2) << t * t, t).finished()); };
    ps.t0 = -1.0;
    ps.t1 = 1.0;
    ps.h = h;
    ps.zeros = {0.0};
    ps.regular_threshold = 0.1;
    return ps;
  };
  const ChainRuleReport coarse = chain_rule_check(0.5, parabola(1e-2));
  const ChainRuleReport fine = chain_rule_check(0.5, parabola(1e-3));
  const double ratio = coarse.max_defect_regular / fine.max_defect_regular;
  expect(res, ratio > 50.0 && ratio < 200.0,
         "regular-point defect ratio for h 1e-2 -> 1e-3: " + fmt("%.2f", ratio) + " (second order gives 100)");

  PathSpec circle;
  circle.v = [](double t) { return Vector((Vector(2) << std::cos(t), std::sin(t)).finished()); };
  circle.t0 = 0.0;
  circle.t1 = 6.0;
  const double dc = chain_rule_check(2.0, circle).max_defect_all;
  expect(res, dc < 1e-10, "unit circle, l=2: defect " + fmt("%.3e", dc));

  auto skew = [](double h) {
    PathSpec ps;
    ps.v = [](double t) { return Vector((Vector(2) << t + t * t, 0.0).finished()); };
    ps.t0 = -0.5;
    ps.t1 = 0.5;
    ps.h = h;
    ps.zeros = {0.0};
    return ps;
  };
  double previous = 0.0;
  bool shrinking = true;
  std::string trail;
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double dz = chain_rule_check(1.0, skew(h)).max_defect_at_zeros;
    if (h < 1e-1 && !(dz < previous)) shrinking = false;
    previous = dz;
    trail += fmt(" %.2e", dz);
  }
  expect(res, shrinking && previous < 1e-9, "defect at the zero of t+t^2, l=1, h=1e-1..1e-4:" + trail);
  return res;
}

inline SuiteResult wronskian_suite_run(std::uint64_t seed) {
  using suite_detail::expect;
  using suite_detail::fmt;
  SuiteResult res{"wronskian", 0, {}};
  const ModelParams prm = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const Operator op = identity_operator(3);
  const Damping g = Damping::linear_unit();
  Tolerances tol;
  tol.rel_tol = 1e-10;

  std::mt19937_64 rng(seed);
  const Vector u0 = detail::random_in_ball(rng, 3, 1.0);
  const Vector u1 = detail::random_in_ball(rng, 3, 1.0);
  const Trajectory tr = integrate(prm, op, g, State::from_velocity(0.0, u0, u1, 0.0), 10.0, tol,
                                  SampleSpec{uniform_times(0.0, 10.0, 1001), true});
  const WronskianReport rep = wronskian_radial_check(tr);
  for (const auto& p : rep.pairs)
    expect(res, p.max_defect < 1e-6,
           "pair (" + std::to_string(p.i + 1) + "," + std::to_string(p.j + 1) + "): w0 " + fmt("%.6f", p.w0) +
               ", max |w - w0 exp(-t)| " + fmt("%.3e", p.max_defect));

  Vector b = detail::random_in_ball(rng, 3, 1.0);
  b /= b.norm();
  const FastShot shot = shoot_fast_velocity(prm, op, g, b, 1.0, 30.0, tol);
  const Trajectory fast = integrate(prm, op, g, State::from_velocity(0.0, b, shot.v1 * b, 0.0), 20.0, tol,
                                    SampleSpec{uniform_times(0.0, 20.0, 2001), false});
  const WronskianReport frep = wronskian_radial_check(fast);
  expect(res, frep.min_abs_tail_cosine() > 1.0 - 1e-3,
         "fast solution (v1 = " + fmt("%.15f", shot.v1) + "): min tail |cosine| " + fmt("%.12f", frep.min_abs_tail_cosine()));
  return res;
}

inline SuiteResult epsilon_family_suite_run() {
  using suite_detail::expect;
  using suite_detail::fmt;
  SuiteResult res{"epsilon_family", 0, {}};
  Tolerances tol;
  tol.rel_tol = 1e-10;
  Vector diag(2);
  diag << 1.0, 4.0;
  const Operator op = diagonal_operator(diag);

  const ModelParams prm = validate_parameters(0.5, 1.0, 0.6, 1.0);
  const InitialData d = eigenmode_initial_data(op, eigenmode_spec(op, 1, 1.0, 0.0));
  const FamilyResult fam = integrate_regularized_family(prm, op, Damping::from_params(prm), d.u0, d.u1, 10.0,
                                                        {1e-1, 1e-2, 1e-3}, tol);
  bool decreasing = true;
  std::string gaps;
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    gaps += fmt(" eps=%g:", fam.members[i].eps) + fmt("%.4e", fam.members[i].gap);
    if (i > 0 && !(fam.members[i].gap < fam.members[i - 1].gap)) decreasing = false;
  }
  expect(res, decreasing, "l=0.5 eigenmode gaps strictly decreasing:" + gaps);

  const ModelParams p0 = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const FamilyResult fam0 = integrate_regularized_family(p0, op, Damping::from_params(p0), d.u0, d.u1, 10.0, {1e-2}, tol);
  expect(res, fam0.members[0].gap < 1e-3, "l=0 gap at eps=1e-2: " + fmt("%.3e", fam0.members[0].gap));
  return res;
}

}  // namespace degenode
