#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "degenode/integrator.hpp"

using namespace degenode;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct Decay {
  void rhs(double, const Vector& y, Vector& dy) const { dy = -y; }
  double error_norm(const Vector& err, const Vector& y0, const Vector& y1) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      const double sk = 1e-12 + 1e-9 * std::max(std::abs(y0(i)), std::abs(y1(i)));
      acc += (err(i) / sk) * (err(i) / sk);
    }
    return std::sqrt(acc / err.size());
  }
  double step_cap(double, const Vector&) const { return std::numeric_limits<double>::infinity(); }
};

struct Rotation {
  void rhs(double, const Vector& y, Vector& dy) const {
    dy.resize(2);
    dy << -y(1), y(0);
  }
  double error_norm(const Vector& err, const Vector&, const Vector&) const { return err.norm() / 1e-10; }
  double step_cap(double, const Vector&) const { return 0.5; }
};

/// Classical fourth-order Runge-Kutta for u'' = -|u|^2 u - |u'| u' (N = 1).
std::vector<double> rk4_oracle(double u0, double v0, double h, int steps, int every) {
  auto f = [](double u, double v, double& du, double& dv) {
    du = v;
    dv = -u * u * u - std::abs(v) * v;
  };
  std::vector<double> out{u0};
  double u = u0, v = v0;
  for (int k = 1; k <= steps; ++k) {
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    f(u, v, k1u, k1v);
    f(u + 0.5 * h * k1u, v + 0.5 * h * k1v, k2u, k2v);
    f(u + 0.5 * h * k2u, v + 0.5 * h * k2v, k3u, k3v);
    f(u + h * k3u, v + h * k3v, k4u, k4v);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if (k % every == 0) out.push_back(u);
  }
  return out;
}

Trajectory unit_run(double rel_tol, double t_end, const SampleSpec& spec = {}) {
  const ModelParams p = validate_parameters(0.0, 2.0, 1.0, 1.0);
  Tolerances tol;
  tol.rel_tol = rel_tol;
  return integrate(p, identity_operator(1), Damping::from_params(p), State{0, vec({1}), vec({0})}, t_end, tol, spec);
}

}  // namespace

TEST_CASE("dopri5 on a linear decay") {
  Vector y = vec({1.0, -2.0});
  ode::StepStats stats;
  int calls = 0;
  const double t = ode::dopri5(Decay{}, y, 0.0, 5.0, ode::StepControl{}, [&](const ode::DenseStep&) { ++calls; }, &stats);
  CHECK(t == 5.0);
  CHECK_THAT(y(0), WithinRel(std::exp(-5.0), 1e-8));
  CHECK_THAT(y(1), WithinRel(-2.0 * std::exp(-5.0), 1e-8));
  CHECK(stats.accepted == static_cast<std::size_t>(calls));
  CHECK(stats.rhs_evals >= 6 * stats.accepted);
}

TEST_CASE("dopri5 dense output is accurate inside steps and honours the step cap") {
  Vector y = vec({1.0, 0.0});
  double worst = 0.0;
  double largest_step = 0.0;
  ode::dopri5(Rotation{}, y, 0.0, 10.0, ode::StepControl{}, [&](const ode::DenseStep& s) {
    largest_step = std::max(largest_step, s.t1 - s.t0);
    for (double th : {0.1, 0.37, 0.5, 0.81}) {
      const double t = s.t0 + th * (s.t1 - s.t0);
      const Vector yt = s.at(t);
      worst = std::max(worst, std::hypot(yt(0) - std::cos(t), yt(1) - std::sin(t)));
    }
  });
  CHECK(worst < 1e-8);
  CHECK(largest_step <= 0.5);
}

TEST_CASE("dopri5 observer can stop the run") {
  Vector y = vec({1.0});
  const double t = ode::dopri5(Decay{}, y, 0.0, 10.0, ode::StepControl{}, [](const ode::DenseStep& s) { return s.t1 < 1.0; });
  CHECK(t >= 1.0);
  CHECK(t < 10.0);
}

TEST_CASE("equilibrium stays at rest") {
  const ModelParams p = validate_parameters(0.5, 2.0, 1.0, 1.0);
  const Trajectory tr = integrate(p, identity_operator(2), Damping::from_params(p), State{0, Vector::Zero(2), Vector::Zero(2)},
                                  10.0, Tolerances{}, SampleSpec{{1, 2, 5}, true});
  REQUIRE(tr.size() == 5);
  for (const auto& s : tr.samples) CHECK(s.record.energy == 0.0);
  CHECK(energy_identity_residual(tr) == 0.0);
}

TEST_CASE("unit configuration dissipates energy") {
  const Trajectory tr = unit_run(1e-10, 100.0);
  const double e0 = tr.samples.front().record.energy;
  const double e1 = tr.samples.back().record.energy;
  CHECK(e1 > 0.0);
  CHECK(e1 < e0);
  CHECK(tr.samples.back().state.t == 100.0);
  for (std::size_t k = 1; k < tr.size(); ++k) {
    CHECK(tr.samples[k].state.t > tr.samples[k - 1].state.t);
    CHECK(tr.samples[k].record.energy <= tr.samples[k - 1].record.energy + 10 * 1e-10 * e0);
  }
}

TEST_CASE("adaptive solution agrees with a fixed-step fourth-order oracle") {
  const std::vector<double> oracle = rk4_oracle(1.0, 0.0, 1e-5, 1000000, 10000);  // u at t = 0, 0.1, ..., 10
  std::vector<double> times;
  for (int k = 1; k <= 100; ++k) times.push_back(0.1 * k);
  for (double rel_tol : {1e-6, 1e-8, 1e-10}) {
    const Trajectory tr = unit_run(rel_tol, 10.0, SampleSpec{times, false});
    REQUIRE(tr.size() == oracle.size());
    double gap = 0.0;
    for (std::size_t k = 0; k < oracle.size(); ++k) gap = std::max(gap, std::abs(tr.samples[k].state.u(0) - oracle[k]));
    INFO("rel_tol " << rel_tol << " gap " << gap);
    CHECK(gap <= 10 * rel_tol);
  }
}

TEST_CASE("energy identity residual converges with the tolerance") {
  std::vector<double> res;
  for (double rel_tol : {1e-4, 1e-6, 1e-8, 1e-10}) res.push_back(energy_identity_residual(unit_run(rel_tol, 100.0)));
  CHECK(res.back() < 1e-7);
  for (std::size_t k = 1; k < res.size(); ++k) {
    INFO("residuals " << res[k - 1] << " -> " << res[k]);
    CHECK(res[k] <= 2.0 * res[k - 1]);
  }
  CHECK(res.back() < res.front());
  CHECK_THROWS_AS(energy_identity_residual(Trajectory{}), Error);
}

TEST_CASE("random trajectories are dissipative and balance energy") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Tolerances tol;
  tol.rel_tol = 1e-9;
  for (int k = 0; k < 12; ++k) {
    const double l = 0.9 * unif(rng), beta = 0.5 + 2.5 * unif(rng), alpha = 0.1 + 2.0 * unif(rng);
    const ModelParams p = validate_parameters(l, beta, alpha, 0.5 + unif(rng));
    const Operator op = diagonal_operator(vec({1.0, 1.0 + 3.0 * unif(rng), 0.5}));
    Vector u(3), v(3);
    for (int i = 0; i < 3; ++i) {
      u(i) = normal(rng);
      v(i) = normal(rng);
    }
    const Trajectory tr = integrate(p, op, Damping::from_params(p), State::from_velocity(0, u, v, l), 50.0, tol);
    const double e0 = tr.samples.front().record.energy;
    INFO("l=" << l << " beta=" << beta << " alpha=" << alpha);
    for (std::size_t j = 1; j < tr.size(); ++j)
      CHECK(tr.samples[j].record.energy <= tr.samples[j - 1].record.energy + 10 * tol.rel_tol * e0);
    CHECK(energy_identity_residual(tr) < 1e-6);
  }
}

TEST_CASE("sample recording") {
  const Trajectory tr = unit_run(1e-8, 10.0, SampleSpec{{10.0, 0.5, 2.0, 2.0, 20.0, -1.0}, false});
  REQUIRE(tr.size() == 4);
  CHECK(tr.samples[1].state.t == 0.5);
  CHECK(tr.samples[2].state.t == 2.0);
  CHECK(tr.samples[3].state.t == 10.0);
  const Trajectory all = unit_run(1e-8, 10.0);
  CHECK(all.size() == all.stats.accepted + 1);
}

TEST_CASE("log and uniform time grids") {
  const auto t = log_times(1e-2, 1e2, 10);
  CHECK(t.size() == 41);
  CHECK(t.front() == 1e-2);
  CHECK(t.back() == 1e2);
  CHECK_THAT(t[10], WithinRel(1e-1, 1e-12));
  CHECK_THROWS_AS(log_times(0.0, 1.0, 10), Error);
  const auto u = uniform_times(0.0, 1.0, 5);
  CHECK(u == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("integration errors") {
  const ModelParams p = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const Operator id1 = identity_operator(1);
  Tolerances tight;
  tight.rel_tol = 1e-12;
  tight.min_step = 1.0;
  tight.max_step = 10.0;
  try {
    integrate(p, id1, Damping::from_params(p), State{0, vec({1}), vec({0})}, 100.0, tight);
    FAIL("expected StepSizeUnderflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepSizeUnderflow);
  }
  const Damping bad = Damping::custom([](const Vector& v) { return Vector(v * std::numeric_limits<double>::quiet_NaN()); });
  try {
    integrate(p, id1, bad, State{0, vec({1}), vec({1})}, 1.0, Tolerances{});
    FAIL("expected NonFiniteState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
  }
  CHECK_THROWS_AS(integrate(p, id1, Damping::from_params(p), State{1, vec({1}), vec({0})}, 1.0, Tolerances{}), Error);
  Tolerances invalid;
  invalid.rel_tol = -1.0;
  CHECK_THROWS_AS(integrate(p, id1, Damping::from_params(p), State{0, vec({1}), vec({0})}, 1.0, invalid), Error);
}

TEST_CASE("energy below the machine floor is flagged as anomalous extinction") {
  // nearly linear damping drives a tiny kinetic energy under 1e-300 in finite time
  const ModelParams p = validate_parameters(0.0, 2.0, 0.01, 100.0);
  const Trajectory tr = integrate(p, identity_operator(1), Damping::from_params(p), State{0, vec({0}), vec({1e-145})},
                                  100.0, Tolerances{});
  CHECK(tr.status == RunStatus::AnomalousExtinction);
  CHECK(tr.samples.back().state.t < 100.0);
  CHECK(tr.samples.back().record.energy < 1e-300);
}

TEST_CASE("degenerate passages with l >= 1 are flagged and step-capped") {
  const ModelParams p = validate_parameters(1.5, 2.0, 2.0, 1.0);
  Tolerances tol;
  tol.degeneracy_threshold = 1e-2;
  tol.degeneracy_step_cap = 1e-3;
  const Trajectory tr = integrate(p, identity_operator(1), Damping::from_params(p), State{0, vec({1}), vec({0})}, 5.0, tol);
  CHECK(tr.degenerate_passage);
  // the first step starts from p = 0 and is capped
  REQUIRE(tr.size() > 2);
  CHECK(tr.samples[1].state.t <= 1e-3 * (1 + 1e-12));

  const ModelParams q = validate_parameters(0.5, 2.0, 2.0, 1.0);
  const Trajectory tq = integrate(q, identity_operator(1), Damping::from_params(q), State{0, vec({1}), vec({0})}, 5.0, tol);
  CHECK_FALSE(tq.degenerate_passage);
}

TEST_CASE("regularized family converges to the momentum solution") {
  const ModelParams p = validate_parameters(0.5, 1.0, 0.6, 1.0);
  const Operator op = diagonal_operator(vec({1, 4}));
  const Damping g = Damping::from_params(p);
  Tolerances tol;
  tol.rel_tol = 1e-10;
  const FamilyResult fam = integrate_regularized_family(p, op, g, vec({0, 1}), vec({0, 0}), 10.0, {1e-1, 1e-2, 1e-3}, tol);
  REQUIRE(fam.members.size() == 3);
  CHECK(fam.members[2].gap < fam.members[0].gap);
  for (const auto& m : fam.members) CHECK(energy_identity_residual(m.trajectory) < 1e-6);

  const ModelParams p0 = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const FamilyResult f0 = integrate_regularized_family(p0, op, Damping::from_params(p0), vec({0.3, 1}), vec({0.2, 0}), 10.0,
                                                       {1e-2}, tol);
  CHECK(f0.members[0].gap < 1e-3);

  const FamilyResult fz = integrate_regularized_family(p, op, g, Vector::Zero(2), Vector::Zero(2), 10.0, {1e-1, 1e-2}, tol);
  for (const auto& m : fz.members) CHECK(m.gap == 0.0);

  CHECK_THROWS_AS(integrate_regularized_family(p, op, g, vec({0, 1}), vec({0, 0}), 1.0, {1e-2, 1e-1}, tol), Error);
  try {
    integrate_regularized_family(p, op, g, vec({0, 1}), vec({0, 0}), 1.0, {1e-1, -1e-2}, tol);
    FAIL("expected NonPositiveEpsilon");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveEpsilon);
  }
}

TEST_CASE("regularized runs conserve their own energy balance") {
  const ModelParams p = validate_parameters(1.0, 2.0, 1.0, 1.0);
  Tolerances tol;
  tol.rel_tol = 1e-10;
  const Trajectory tr = integrate_regularized(p, identity_operator(2), Damping::from_params(p), vec({1, 0}), vec({0, 0.5}),
                                              0.05, 0.0, 20.0, tol);
  CHECK(tr.formulation == Formulation::Regularized);
  CHECK(tr.samples.front().regularized_energy.has_value());
  CHECK(energy_identity_residual(tr) < 1e-7);
}
