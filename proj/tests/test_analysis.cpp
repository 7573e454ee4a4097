#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "degenode/analysis.hpp"
#include "degenode/scenarios.hpp"

using namespace degenode;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> power_series(const std::vector<double>& t, double c, double q) {
  std::vector<double> e;
  for (double x : t) e.push_back(c * std::pow(x, -q));
  return e;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

Tolerances tight() {
  Tolerances tol;
  tol.rel_tol = 1e-10;
  return tol;
}

}  // namespace

TEST_CASE("exact power law is recovered") {
  const auto t = log_times(10.0, 1e4, 25);
  const auto e = power_series(t, 1.0, 2.0);
  const DecayFit fit = fit_decay_exponent(t, e, FitWindow{10.0, 1e4});
  CHECK_THAT(fit.exponent, WithinAbs(2.0, 1e-10));
  CHECK_THAT(fit.r_squared, WithinAbs(1.0, 1e-12));
  CHECK(fit.n_points >= 10);
  CHECK(fit.t_lo < fit.t_hi);
}

TEST_CASE("power law exponent does not depend on the window") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto t = log_times(1e-2, 1e6, 13);
  for (int k = 0; k < 200; ++k) {
    const double q = 0.1 + 12.0 * unif(rng);
    const double c = std::pow(10.0, 4.0 * unif(rng) - 2.0);
    const auto e = power_series(t, c, q);
    const double lo = std::pow(10.0, -2.0 + 6.0 * unif(rng) * 0.8);
    const double hi = std::min(1e6, lo * std::pow(10.0, 1.0 + 3.0 * unif(rng)));
    if (hi / lo < 10.0) continue;
    const DecayFit fit = fit_decay_exponent(t, e, FitWindow{lo, hi});
    CHECK_THAT(fit.exponent, WithinAbs(q, 1e-10));
    CHECK_THAT(fit.log10_prefactor, WithinAbs(std::log10(c), 1e-8));
  }
}

TEST_CASE("perturbed power law stays near its exponent") {
  const double q = 2.8571;
  const auto t = log_times(1.0, 1e6, 40);
  std::vector<double> e;
  for (double x : t) e.push_back(3.0 * std::pow(x, -q) * (1.0 + 0.01 * std::sin(std::log(x))));
  for (FitWindow w : {FitWindow{1e1, 1e3}, FitWindow{1e2, 1e5}, FitWindow{1.0, 1e6}})
    CHECK_THAT(fit_decay_exponent(t, e, w).exponent, WithinAbs(q, 0.03));
}

TEST_CASE("fit errors") {
  const auto t = log_times(1.0, 1e4, 10);
  auto e = power_series(t, 1.0, 2.0);
  CHECK(code_of([&] { fit_decay_exponent(t, e, FitWindow{10.0, 50.0}); }) == ErrorCode::WindowTooShort);
  CHECK(code_of([&] { fit_decay_exponent(t, e, FitWindow{0.1, 100.0}); }) == ErrorCode::WindowTooShort);
  CHECK(code_of([&] { fit_decay_exponent(t, e, FitWindow{100.0, 1e5}); }) == ErrorCode::WindowTooShort);
  e[20] = 0.0;
  CHECK(code_of([&] { fit_decay_exponent(t, e, FitWindow{1.0, 1e4}); }) == ErrorCode::NonPositiveEnergy);
}

TEST_CASE("liminf product of an exact fast law") {
  const auto t = log_times(1.0, 1e4, 20);
  const auto e = power_series(t, 1.0, 8.0);
  const LiminfReport r = liminf_bound_check(t, e, 8.0, 10.0);
  CHECK_THAT(r.tail_min, WithinRel(1.0, 1e-10));
  CHECK_THAT(r.last_decade_min, WithinRel(1.0, 1e-10));
  REQUIRE(r.previous_decade_min.has_value());
  CHECK_THAT(*r.previous_decade_min, WithinRel(1.0, 1e-10));

  const ModelParams fast_only = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const ModelParams no_fast = validate_parameters(1.0, 2.0, 0.5, 1.0);
  const Trajectory tr =
      integrate(fast_only, identity_operator(1), Damping::from_params(fast_only),
                State{0, Vector::Constant(1, 1.0), Vector::Zero(1)}, 10.0, Tolerances{});
  CHECK(code_of([&] { liminf_bound_check(tr, no_fast, 1.0); }) == ErrorCode::AlphaNotGreaterThanL);
  CHECK(code_of([&] { liminf_bound_check(t, e, 8.0, 1e5); }) == ErrorCode::WindowTooShort);
}

TEST_CASE("slow envelope of the exact envelope is one") {
  const ModelParams p = validate_parameters(0.0, 2.0, 0.25, 1.0);
  const double q = p.slow_envelope_exponent();
  CHECK_THAT(q, WithinRel(1.25 / 1.75, 1e-14));
  const auto t = log_times(1e-2, 1e6, 10);
  std::vector<double> u;
  for (double x : t) u.push_back(std::pow(1.0 + x, -q));
  CHECK_THAT(slow_envelope_check(t, u, p), WithinRel(1.0, 1e-12));

  const ModelParams fast_only = validate_parameters(0.0, 2.0, 1.0, 1.0);
  CHECK(code_of([&] { slow_envelope_check(t, u, fast_only); }) == ErrorCode::RegimeMismatch);
}

TEST_CASE("slow and fast runs are told apart") {
  const ModelParams p = validate_parameters(0.0, 2.0, 0.25, 1.0);
  REQUIRE(p.regime == Regime::SlowFastCoexist);
  const Damping g = Damping::from_params(p);
  const Tolerances tol = tight();

  // slow-set sample
  std::mt19937_64 rng(5);
  Vector diag(2);
  diag << 1.0, 4.0;
  const Operator op = diagonal_operator(diag);
  const SlowSetSample smp = sample_slow_set(p, op, 1e-2, 1e-2, rng);
  const Trajectory slow = integrate(p, op, g, State::from_velocity(0, smp.data.u0, smp.data.u1, 0.0), 1e7, tol,
                                    SampleSpec{log_times(1e-2, 1e7, 40), false});
  const Classification cs = classify_slow_fast(slow, p);
  CHECK(cs.verdict == Verdict::Slow);
  CHECK_FALSE((cs.evidence.slow && cs.evidence.fast));
  const DecayFit fs = fit_decay_exponent(slow, FitWindow{1e5, 1e7});
  CHECK_THAT(fs.exponent, WithinRel(*p.slow_exponent, 0.10));
  const LiminfReport ls = liminf_bound_check(slow, p, 1e3);
  REQUIRE(ls.previous_decade_min.has_value());
  CHECK(ls.last_decade_min > 2.0 * *ls.previous_decade_min);  // t^8 E grows for slow decay
  CHECK(slow_envelope_check(slow, p) > 0.0);

  // scalar fast solution located by shooting
  const ScalarProblem sp = scalar_problem(0.0, 1.0, 1.0, 0.25, 2.0);
  const Vector phi = Vector::Constant(1, 1.0);
  const FastShot shot = shoot_fast_velocity(sp.params, sp.op, sp.damping, phi, 1.0, 1e5, tol);
  const Trajectory fast = scalar_reference_solve(0.0, 1.0, 1.0, 0.25, 2.0, 1.0, shot.v1, 1e4, tol,
                                                 SampleSpec{log_times(1e-2, 1e4, 40), false});
  const Classification cf = classify_slow_fast(fast, p);
  CHECK(cf.verdict == Verdict::Fast);
  CHECK(cf.evidence.k_growth > 2.0);
  const LiminfReport lf = liminf_bound_check(fast, p, 1e2);
  CHECK(lf.last_decade_min > 0.0);
  REQUIRE(lf.previous_decade_min.has_value());
  CHECK(lf.last_decade_min < 2.0 * *lf.previous_decade_min);
  CHECK(lf.last_decade_min > 0.5 * *lf.previous_decade_min);
  // fast decay collapses the slow envelope
  const auto tf = fast.times();
  const auto uf = position_norms(fast);
  const std::size_t half = tf.size() / 2;
  const double env_mid = slow_envelope_check(std::span<const double>(tf).first(half), std::span<const double>(uf).first(half), p);
  CHECK(slow_envelope_check(fast, p) < 0.1 * env_mid);
}

TEST_CASE("classification input errors") {
  const ModelParams p = validate_parameters(0.0, 2.0, 0.25, 1.0);
  const Damping g = Damping::from_params(p);
  const Trajectory short_run =
      integrate(p, identity_operator(1), g, State{0, Vector::Constant(1, 0.1), Vector::Zero(1)}, 1.0, Tolerances{});
  CHECK(code_of([&] { classify_slow_fast(short_run, p); }) == ErrorCode::WindowTooShort);
  const ModelParams fast_only = validate_parameters(0.0, 2.0, 1.0, 1.0);
  CHECK(code_of([&] { classify_slow_fast(short_run, fast_only); }) == ErrorCode::RegimeMismatch);
  CHECK(code_of([&] { classify_slow_fast(Trajectory{}, p); }) == ErrorCode::EmptyTrajectory);
  CHECK(std::string(to_string(Verdict::Undetermined)) == "Undetermined");
}
