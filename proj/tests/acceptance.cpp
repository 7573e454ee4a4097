// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cmath>
#include <cstdio>
#include <future>
#include <random>
#include <string>
#include <vector>

#include "degenode/degenode.hpp"

using namespace degenode;

namespace {

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Tolerances rel(double r) {
  Tolerances tol;
  tol.rel_tol = r;
  return tol;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct BatteryRun {
  BatteryCase bc;
  Trajectory fine;
  double res_fine = 0.0;
  double res_coarse = 0.0;
};

std::vector<BatteryRun> run_battery() {
  const auto cases = standard_battery(BatteryOptions{7, rel(1e-10)});
  std::vector<std::future<BatteryRun>> jobs;
  for (const auto& bc : cases) {
    jobs.push_back(std::async(std::launch::async, [bc] {
      BatteryRun r{bc, run_battery_case(bc, rel(1e-10)), 0.0, 0.0};
      r.res_fine = energy_identity_residual(r.fine);
      r.res_coarse = energy_identity_residual(run_battery_case(bc, rel(1e-8)));
      return r;
    }));
  }
  std::vector<BatteryRun> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

void energy_identity(const std::vector<BatteryRun>& runs) {
  double worst = 0.0, min_ratio = std::numeric_limits<double>::infinity();
  bool ok = !runs.empty();
  for (const auto& r : runs) {
    worst = std::max(worst, r.res_fine);
    const double ratio = r.res_fine > 0.0 ? r.res_coarse / r.res_fine : std::numeric_limits<double>::infinity();
    min_ratio = std::min(min_ratio, ratio);
    if (!(r.res_fine < 1e-7) || !(ratio >= 10.0)) ok = false;
  }
  report(1, "energy identity", ok,
         std::to_string(runs.size()) + " battery runs, max residual " + fmt("%.3e", worst) + " at rel_tol 1e-10 (< 1e-7)" +
             ", min shrink from 1e-8 " + fmt("%.1fx", min_ratio) + " (>= 10x)");
}

void fast_regime_decay() {
  const ModelParams p = validate_parameters(0.0, 2.0, 1.0, 1.0);
  const Operator op = identity_operator(2);
  const InitialData d = eigenmode_initial_data(op, eigenmode_spec(op, 0, 1.0, 0.0));
  const Trajectory tr = integrate(p, op, Damping::from_params(p), State::from_velocity(0, d.u0, d.u1, 0.0), 1e4, rel(1e-10),
                                  SampleSpec{log_times(1e-2, 1e4, 40), false});
  const DecayFit fit = fit_decay_exponent(tr, FitWindow{1e2, 1e4});
  const bool ok = std::abs(fit.exponent - 2.0) <= 0.05 * 2.0;
  report(2, "fast-regime decay", ok,
         "l=0 beta=2 alpha=1 A=I2 eigenmode, window [1e2,1e4]: exponent " + fmt("%.5f", fit.exponent) +
             " (predicted 2 +- 5%), r^2 " + fmt("%.6f", fit.r_squared));
}

/// Slow-set run on diag(1,4) with envelope minima over the last two decades.
struct SlowCheck {
  double exponent = 0.0;
  double env_last = 0.0;
  double env_prev = 0.0;
  Verdict verdict = Verdict::Undetermined;
};

SlowCheck slow_run(double l, double beta, double alpha, double t_end, FitWindow w, std::uint64_t seed) {
  const ModelParams p = validate_parameters(l, beta, alpha, 1.0);
  const Operator op = diagonal_operator(vec({1.0, 4.0}));
  std::mt19937_64 rng(seed);
  const SlowSetSample smp = sample_slow_set(p, op, 1e-2, 1e-2, rng);
  const Trajectory tr = integrate(p, op, Damping::from_params(p), State::from_velocity(0, smp.data.u0, smp.data.u1, l), t_end,
                                  rel(1e-10), SampleSpec{log_times(1e-2, t_end, 40), false});
  SlowCheck c;
  c.exponent = fit_decay_exponent(tr, w).exponent;
  const auto t = tr.times();
  const auto u = position_norms(tr);
  std::vector<double> tl, ul, tp, up;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] >= t_end / 10) {
      tl.push_back(t[k]);
      ul.push_back(u[k]);
    } else if (t[k] >= t_end / 100) {
      tp.push_back(t[k]);
      up.push_back(u[k]);
    }
  }
  c.env_last = slow_envelope_check(tl, ul, p);
  c.env_prev = slow_envelope_check(tp, up, p);
  c.verdict = classify_slow_fast(tr, p).verdict;
  return c;
}

void slow_regime_decay() {
  const double target = 20.0 / 7.0;
  const SlowCheck c = slow_run(0.0, 2.0, 0.25, 1e7, FitWindow{1e5, 1e7}, 1);
  const bool plateau = c.env_last > 0.0 && c.env_last >= 0.5 * c.env_prev;
  const bool ok = std::abs(c.exponent - target) <= 0.10 * target && plateau;
  report(3, "slow-regime decay", ok,
         "l=0 beta=2 alpha=0.25 slow-set sample, window [1e5,1e7]: exponent " + fmt("%.5f", c.exponent) +
             " (predicted 20/7 = 2.85714 +- 10%), envelope min " + fmt("%.4e", c.env_prev) + " -> " +
             fmt("%.4e", c.env_last) + " over the last two decades, verdict " + to_string(c.verdict));
}

void second_slow_point() {
  const ModelParams p = validate_parameters(0.5, 1.0, 0.6, 1.0);
  const SlowCheck c = slow_run(0.5, 1.0, 0.6, 1e5, FitWindow{1e3, 1e5}, 1);
  const double slow = *p.slow_exponent, fast = *p.fast_exponent;
  const bool ok = std::abs(c.exponent - slow) <= 0.10 * slow && c.exponent < 0.5 * (slow + fast);
  report(4, "second slow point", ok,
         "l=0.5 beta=1 alpha=0.6 slow-set sample, window [1e3,1e5]: exponent " + fmt("%.5f", c.exponent) + " (slow " +
             fmt("%g", slow) + " +- 10%, fast " + fmt("%g", fast) + " not approached), verdict " + to_string(c.verdict));
}

void liminf_bound(const std::vector<BatteryRun>& runs) {
  bool ok = !runs.empty();
  double smallest = std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  for (const auto& r : runs) {
    if (!r.bc.params.fast_exponent) continue;
    const LiminfReport lr = liminf_bound_check(r.fine, r.bc.params, r.bc.t_end / 100.0);
    ++checked;
    smallest = std::min(smallest, lr.log10_last_decade_min);
    if (!(lr.last_decade_min > 0.0) || !std::isfinite(lr.log10_last_decade_min)) ok = false;
  }
  report(5, "liminf lower bound", ok && checked > 0,
         std::to_string(checked) + " battery runs with alpha > l, smallest last-decade min of t^q E: 10^" +
             fmt("%.2f", smallest) + " (> 0)");
}

void epsilon_convergence() {
  const ModelParams p = validate_parameters(0.5, 1.0, 0.6, 1.0);
  const Operator op = diagonal_operator(vec({1.0, 4.0}));
  const InitialData d = eigenmode_initial_data(op, eigenmode_spec(op, 1, 1.0, 0.0));
  const FamilyResult fam = integrate_regularized_family(p, op, Damping::from_params(p), d.u0, d.u1, 10.0, {1e-1, 1e-2, 1e-3},
                                                        rel(1e-10));
  bool ok = true;
  std::string gaps;
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    gaps += fmt(" eps=%g:", fam.members[i].eps) + fmt("%.4e", fam.members[i].gap);
    if (i > 0 && !(fam.members[i].gap < fam.members[i - 1].gap)) ok = false;
  }
  report(6, "eps-regularization convergence", ok, "l=0.5 eigenmode, sup gaps on [0,10]:" + gaps);
}

void inequality_suite_check() {
  const SuiteResult r = inequality_suite_run(100000, 42);
  long samples = 0;
  std::string worst;
  for (double p : {0.5, 1.0, 2.0}) {
    InequalityOptions opt;
    opt.n_samples = 100000;
    opt.p = p;
    const InequalityReport rep = inequality_suite(opt);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : rep.results) {
      samples += x.samples;
      m = std::min(m, x.worst_margin);
    }
    worst += fmt(" p=%g:", p) + fmt("%.2e", m);
  }
  report(7, "inequality suite", r.passed(),
         std::to_string(r.violations) + " violations over " + std::to_string(samples) +
             " checks (1e5 pairs per p), worst relative margins" + worst + ", Lipschitz ratio bounded");
}

void chain_rule() {
  const SuiteResult r = chain_rule_suite_run();
  std::string detail;
  for (const auto& line : r.lines) detail += (detail.empty() ? "" : "; ") + line.substr(6);
  report(8, "chain rule", r.passed(), detail);
}

void wronskian() {
  const ModelParams p = validate_parameters(0.0, 2.0, 1.0, 1.0);
  std::mt19937_64 rng(42);
  const Vector u0 = detail::random_in_ball(rng, 3, 1.0), u1 = detail::random_in_ball(rng, 3, 1.0);
  const Trajectory tr = integrate(p, identity_operator(3), Damping::linear_unit(), State{0, u0, u1}, 10.0, rel(1e-10),
                                  SampleSpec{uniform_times(0.0, 10.0, 1001), true});
  const WronskianReport rep = wronskian_radial_check(tr);
  bool ok = rep.pairs.size() == 3;
  std::string detail;
  for (const auto& pr : rep.pairs) {
    if (!(pr.max_defect < 1e-6)) ok = false;
    detail += " (" + std::to_string(pr.i + 1) + "," + std::to_string(pr.j + 1) + "):" + fmt("%.2e", pr.max_defect);
  }
  report(9, "Wronskian identity", ok, "N=3 beta=2 random data on [0,10], max |w - w0 exp(-t)| per pair:" + detail + " (< 1e-6)");
}

void dichotomy(const std::vector<BatteryRun>& runs) {
  int total = 0, both = 0, undetermined = 0, slow_ok = 0, slow_n = 0, fast_ok = 0, fast_n = 0, failed = 0;
  for (const auto& r : runs) {
    if (r.bc.params.regime != Regime::SlowFastCoexist) continue;
    ++total;
    Classification c;
    try {
      c = classify_slow_fast(r.fine, r.bc.params);
    } catch (const Error&) {
      ++failed;
      continue;
    }
    if (c.evidence.slow && c.evidence.fast) ++both;
    if (c.verdict == Verdict::Undetermined) ++undetermined;
    if (r.bc.kind == BatteryKind::SlowSet) {
      ++slow_n;
      if (c.verdict == Verdict::Slow) ++slow_ok;
    }
    if (r.bc.kind == BatteryKind::Fast) {
      ++fast_n;
      if (c.verdict == Verdict::Fast) ++fast_ok;
    }
  }
  const bool ok = total >= 20 && both == 0 && failed == 0 && slow_ok == slow_n && fast_ok == fast_n && fast_n > 0;
  report(10, "slow-fast dichotomy", ok,
         std::to_string(total) + " coexistence runs, " + std::to_string(both) + " with both verdicts, slow-set Slow " +
             std::to_string(slow_ok) + "/" + std::to_string(slow_n) + ", shot fast Fast " + std::to_string(fast_ok) + "/" +
             std::to_string(fast_n) + ", Undetermined " + fmt("%.1f%%", total ? 100.0 * undetermined / total : 0.0));
}

void eigenmode_reduction() {
  const double theta = 0.7, beta = 2.0, alpha = 1.0, l = 0.0;
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Operator op = build_operator(r * vec({1.0, 4.0}).asDiagonal() * r.transpose());
  const ModelParams p = validate_parameters(l, beta, alpha, 1.0);
  const EigenmodeSpec spec = eigenmode_spec(op, 1, 1.0, 0.0);
  const InitialData d = eigenmode_initial_data(op, spec);
  const auto grid = uniform_times(0.0, 100.0, 10001);
  const Trajectory vr = integrate(p, op, Damping::from_params(p), State::from_velocity(0, d.u0, d.u1, l), 100.0, rel(1e-10),
                                  SampleSpec{grid, false});
  const Trajectory sr = scalar_reference_solve(l, std::pow(spec.eigenvalue, beta / 2.0 + 1.0), 1.0, alpha, beta, 1.0, 0.0, 100.0,
                                               rel(1e-10), SampleSpec{grid, false});
  double gap = 0.0, leak = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector& u = vr.samples[k].state.u;
    const double coord = u.dot(spec.eigenvector);
    gap = std::max(gap, std::abs(coord - sr.samples[k].state.u(0)));
    const double nu = u.norm();
    if (nu > 0.0) leak = std::max(leak, (u - coord * spec.eigenvector).norm() / nu);
  }
  report(11, "eigenmode reduction", gap < 1e-7 && leak < 1e-8,
         "A = R diag(1,4) R^T, lambda=4, l=0 beta=2 alpha=1 on [0,100]: sup gap " + fmt("%.3e", gap) +
             " (< 1e-7), relative leakage " + fmt("%.3e", leak) + " (< 1e-8)");
}

template <class F>
void guarded(int id, const char* title, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, title, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  std::vector<BatteryRun> runs;
  try {
    runs = run_battery();
  } catch (const std::exception& e) {
    std::printf("battery failed: %s\n", e.what());
  }
  guarded(1, "energy identity", [&] { energy_identity(runs); });
  guarded(2, "fast-regime decay", fast_regime_decay);
  guarded(3, "slow-regime decay", slow_regime_decay);
  guarded(4, "second slow point", second_slow_point);
  guarded(5, "liminf lower bound", [&] { liminf_bound(runs); });
  guarded(6, "eps-regularization convergence", epsilon_convergence);
  guarded(7, "inequality suite", inequality_suite_check);
  guarded(8, "chain rule", chain_rule);
  guarded(9, "Wronskian identity", wronskian);
  guarded(10, "slow-fast dichotomy", [&] { dichotomy(runs); });
  guarded(11, "eigenmode reduction", eigenmode_reduction);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
