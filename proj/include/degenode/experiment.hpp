#pragma once

// Runs a configured experiment end to end and assembles its summary; runs
// parameter sweeps on a worker pool.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "degenode/analysis.hpp"
#include "degenode/config.hpp"
#include "degenode/integrator.hpp"
#include "degenode/io.hpp"
#include "degenode/model.hpp"
#include "degenode/scenarios.hpp"

namespace degenode {

/// Exit status for a failure code: 3 for integration failures, 1 for I/O,
/// 2 for anything wrong with the configuration.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NonFiniteState: return 3;
    case ErrorCode::IoError: return 1;
    default: return 2;
  }
}

struct PreparedRun {
  ModelParams params;
  Operator op;
  Damping damping = Damping::linear_unit();
  Vector u0;
  Vector u1;
  Json initial_info = Json::object();
};

inline PreparedRun prepare_run(const ExperimentConfig& cfg) {
  PreparedRun run;
  const auto& m = cfg.model;
  run.params = validate_parameters(m.l, m.beta, m.alpha, m.c);
  run.damping = m.damping_kind == DampingKind::LinearUnit ? Damping::linear_unit() : Damping::from_params(run.params);
  run.op = make_operator(cfg.op);
  const Tolerances& tol = cfg.integration.tol;

  if (const auto* ex = std::get_if<ExplicitInitial>(&cfg.initial)) {
    run.u0 = Eigen::Map<const Vector>(ex->u0.data(), static_cast<Eigen::Index>(ex->u0.size()));
    run.u1 = Eigen::Map<const Vector>(ex->u1.data(), static_cast<Eigen::Index>(ex->u1.size()));
    run.initial_info["kind"] = "explicit";
  } else if (const auto* em = std::get_if<EigenmodeInitial>(&cfg.initial)) {
    EigenmodeSpec spec = eigenmode_spec(run.op, em->eigen_index, em->v0, em->v1.value_or(0.0));
    run.initial_info["kind"] = "eigenmode";
    run.initial_info["eigenvalue"] = spec.eigenvalue;
    if (!em->v1) {
      const double horizon = em->fast_horizon.value_or(10.0 * cfg.integration.t_end);
      const FastShot shot = shoot_fast_velocity(run.params, run.op, run.damping, spec.eigenvector, em->v0, horizon, tol);
      spec.v1 = shot.v1;
      run.initial_info["fast_shot"] = {{"v1", shot.v1}, {"bracket_width", shot.bracket_width},
                                       {"horizon", shot.horizon}, {"iterations", shot.iterations}};
    }
    const InitialData d = eigenmode_initial_data(run.op, spec);
    run.u0 = d.u0;
    run.u1 = d.u1;
  } else {
    const auto& ss = std::get<SlowSetInitial>(cfg.initial);
    std::mt19937_64 rng(ss.seed);
    const SlowSetSample smp = sample_slow_set(run.params, run.op, ss.eps0, ss.eps1, rng, ss.strict);
    run.u0 = smp.data.u0;
    run.u1 = smp.data.u1;
    run.initial_info["kind"] = "slow_set_sample";
    run.initial_info["sigma0"] = smp.sigmas.sigma0;
    run.initial_info["sigma1"] = smp.sigmas.sigma1;
  }
  run.initial_info["u0"] = to_json(run.u0);
  run.initial_info["u1"] = to_json(run.u1);
  return run;
}

inline Json params_json(const ModelParams& p) {
  Json j;
  j["l"] = p.l;
  j["beta"] = p.beta;
  j["alpha"] = p.alpha;
  j["c"] = p.c;
  j["m"] = p.m;
  j["threshold"] = p.threshold;
  j["regime"] = to_string(p.regime);
  j["gamma_slowfast"] = p.gamma_slowfast;
  j["gamma_hat"] = p.gamma_hat;
  j["gamma0"] = p.gamma0;
  j["warnings"] = p.warnings;
  return j;
}

inline Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

struct RunResult {
  PreparedRun run;
  Trajectory trajectory;
  Json summary;
};

/// Summary statistics of a trajectory under the given analysis settings.
inline Json analyze(const Trajectory& traj, const AnalysisConfig& ac, Json& status) {
  const ModelParams& prm = traj.params;
  const double t_end = traj.samples.back().state.t;
  Json out;
  out["energy_identity_residual"] = energy_identity_residual(traj);

  const FitWindow window = ac.fit_window.value_or(FitWindow{ac.tail_fraction * t_end, t_end});
  try {
    const DecayFit fit = fit_decay_exponent(traj, window);
    out["fit"] = {{"exponent", fit.exponent},   {"r_squared", fit.r_squared}, {"t_lo", fit.t_lo},
                  {"t_hi", fit.t_hi},           {"n_points", fit.n_points},   {"log10_prefactor", fit.log10_prefactor}};
  } catch (const Error& e) {
    out["fit"] = {{"error", e.what()}};
    status = "undetermined";
  }

  if (prm.fast_exponent) {
    try {
      const LiminfReport r = liminf_bound_check(traj, prm, ac.tail_fraction * t_end);
      out["liminf"] = {{"exponent", r.exponent},
                       {"log10_tail_min", r.log10_tail_min},
                       {"log10_last_decade_min", r.log10_last_decade_min},
                       {"last_decade_min", r.last_decade_min},
                       {"previous_decade_min", optional_json(r.previous_decade_min)}};
    } catch (const Error& e) {
      out["liminf"] = {{"error", e.what()}};
    }
  }
  if (prm.regime == Regime::SlowFastCoexist) out["slow_envelope_min"] = slow_envelope_check(traj, prm);

  if (ac.classify && prm.regime != Regime::SlowFastCoexist) {
    out["classification"] = {{"skipped", "FastOnly regime: no slow branch to separate"}};
  } else if (ac.classify) {
    try {
      ClassifyOptions opt;
      opt.tail_fraction = ac.tail_fraction;
      const Classification c = classify_slow_fast(traj, prm, opt);
      const auto& ev = c.evidence;
      out["classification"] = {
          {"verdict", to_string(c.verdict)},
          {"tail", {c.tail_start, c.tail_end}},
          {"evidence",
           {{"k_tail_max", ev.k_tail_max},
            {"k_tail_min", ev.k_tail_min},
            {"h_tail_max", ev.h_tail_max},
            {"k_growth", ev.k_growth},
            {"envelope_margin", ev.envelope_margin},
            {"tail_exponent", optional_json(ev.tail_exponent)},
            {"slow", ev.slow},
            {"fast", ev.fast}}},
          {"note", "trend-based surrogate; the asymptotic constants are not quantified"}};
      if (c.verdict == Verdict::Undetermined) status = "undetermined";
    } catch (const Error& e) {
      out["classification"] = {{"error", e.what()}};
      status = "undetermined";
    }
  }
  return out;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult res;
  res.run = prepare_run(cfg);
  const auto& run = res.run;
  const auto& ic = cfg.integration;
  SampleSpec spec{ic.sample_times, ic.record_steps};
  res.trajectory = integrate(run.params, run.op, run.damping, State::from_velocity(0.0, run.u0, run.u1, run.params.l),
                             ic.t_end, ic.tol, spec);
  const Trajectory& traj = res.trajectory;

  Json status = "ok";
  Json& s = res.summary;
  s["config"] = cfg.source;
  s["model"] = params_json(run.params);
  s["predicted"] = {{"fast_exponent", optional_json(run.params.fast_exponent)},
                    {"slow_exponent", optional_json(run.params.slow_exponent)}};
  s["initial"] = run.initial_info;
  s["run"] = {{"status", to_string(traj.status)},
              {"samples", traj.size()},
              {"t_reached", traj.samples.back().state.t},
              {"accepted_steps", traj.stats.accepted},
              {"rejected_steps", traj.stats.rejected},
              {"degenerate_passage", traj.degenerate_passage},
              {"final_energy", traj.samples.back().record.energy}};
  s["analysis"] = analyze(traj, cfg.analysis, status);

  if (cfg.analysis.epsilon_family) {
    const auto& ef = *cfg.analysis.epsilon_family;
    const FamilyResult fam = integrate_regularized_family(run.params, run.op, run.damping, run.u0, run.u1,
                                                          ef.t_end.value_or(ic.t_end), ef.eps, ic.tol, ef.grid_points);
    Json rows = Json::array();
    for (const auto& m : fam.members)
      rows.push_back({{"eps", m.eps}, {"gap", m.gap}, {"energy_identity_residual", energy_identity_residual(m.trajectory)}});
    s["epsilon_family"] = rows;
  }
  if (traj.status == RunStatus::AnomalousExtinction) status = "anomalous_extinction";
  s["status"] = status;
  s["exit_status"] = 0;
  return res;
}

/// Runs a config and writes trajectory.csv and summary.json into `out_dir`.
inline RunResult simulate_to_directory(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  RunResult res = run_experiment(cfg);
  write_trajectory_csv(out_dir / "trajectory.csv", res.trajectory);
  write_json_file(out_dir / "summary.json", res.summary);
  return res;
}

struct SweepCell {
  std::size_t index = 0;
  Json config;
};

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string error;
  Json summary;
};

/// Expands {"base": config, "grid": {"l": [...], "beta": [...], "alpha": [...], "c": [...]}}
/// into cells in l-major order. Axes not listed take the base value.
inline std::vector<SweepCell> expand_sweep(const Json& j) {
  config_detail::allow_keys(j, "", {"base", "grid"});
  const Json& base = config_detail::require(j, "", "base");
  const Json& grid = config_detail::require(j, "", "grid");
  config_detail::allow_keys(grid, "grid", {"l", "beta", "alpha", "c"});
  if (!base.is_object() || !base.contains("model") || !base.at("model").is_object())
    config_detail::fail("base.model", "missing required field");

  const char* axes[] = {"l", "beta", "alpha", "c"};
  std::vector<std::vector<Json>> values;
  for (const char* ax : axes) {
    std::vector<Json> vals;
    if (grid.contains(ax)) {
      const auto v = config_detail::numbers(grid.at(ax), std::string("grid.") + ax);
      if (v.empty()) config_detail::fail(std::string("grid.") + ax, "empty axis");
      for (double x : v) vals.emplace_back(x);
    } else {
      vals.push_back(base.at("model").contains(ax) ? base.at("model").at(ax) : Json(nullptr));
    }
    values.push_back(std::move(vals));
  }
  if (grid.empty()) config_detail::fail("grid", "empty grid");

  std::vector<SweepCell> cells;
  for (const auto& l : values[0])
    for (const auto& b : values[1])
      for (const auto& a : values[2])
        for (const auto& c : values[3]) {
          Json cfg = base;
          const Json* vals[] = {&l, &b, &a, &c};
          for (int k = 0; k < 4; ++k)
            if (!vals[k]->is_null()) cfg["model"][axes[k]] = *vals[k];
          cells.push_back({cells.size(), std::move(cfg)});
        }
  return cells;
}

inline std::string cell_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cell_%04zu", index);
  return buf;
}

/// Runs every cell on `jobs` workers, writes cell_NNNN/summary.json per cell
/// and aggregate.csv in cell order. Returns the rows in cell order.
inline std::vector<SweepRow> run_sweep(const std::vector<SweepCell>& cells, const std::filesystem::path& out_dir,
                                       int jobs) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepRow& row = rows[i];
      row.cell = cells[i];
      try {
        const ExperimentConfig cfg = parse_config(cells[i].config);
        RunResult res = run_experiment(cfg);
        row.summary = std::move(res.summary);
        row.ok = true;
      } catch (const Error& e) {
        row.error = e.what();
        row.summary = {{"config", cells[i].config}, {"status", "error"}, {"error", e.what()},
                       {"exit_status", exit_code_for(e.code())}};
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ofstream agg(out_dir / "aggregate.csv");
  if (!agg) throw Error(ErrorCode::IoError, "cannot write aggregate.csv");
  agg << "cell,l,beta,alpha,c,regime,predicted_fast,predicted_slow,fitted_exponent,verdict,status\n";
  for (const auto& row : rows) {
    const std::filesystem::path dir = out_dir / cell_dir_name(row.cell.index);
    std::filesystem::create_directories(dir, ec);
    write_json_file(dir / "summary.json", row.summary);

    const Json& model = row.cell.config.at("model");
    auto num = [](const Json& v) { return v.is_number() ? format_number(v.get<double>()) : std::string(); };
    std::string regime, fast, slow, fitted, verdict;
    if (row.ok) {
      const Json& s = row.summary;
      regime = s["model"]["regime"].get<std::string>();
      fast = num(s["predicted"]["fast_exponent"]);
      slow = num(s["predicted"]["slow_exponent"]);
      if (s["analysis"]["fit"].contains("exponent")) fitted = num(s["analysis"]["fit"]["exponent"]);
      const Json& cls = s["analysis"].value("classification", Json::object());
      verdict = cls.contains("verdict") ? cls["verdict"].get<std::string>() : "";
    }
    agg << row.cell.index << ',' << num(model.value("l", Json())) << ',' << num(model.value("beta", Json())) << ','
        << num(model.value("alpha", Json())) << ',' << num(model.value("c", Json(1.0))) << ',' << regime << ','
        << fast << ',' << slow << ',' << fitted << ',' << verdict << ','
        << (row.ok ? row.summary["status"].get<std::string>() : "error") << '\n';
  }
  return rows;
}

}  // namespace degenode
