#pragma once

// Declarative experiment configuration read from a JSON document. Unknown
// keys are rejected and every error names the offending field.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "degenode/analysis.hpp"
#include "degenode/integrator.hpp"
#include "degenode/model.hpp"

namespace degenode {

using Json = nlohmann::json;

struct ModelConfig {
  double l = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double c = 1.0;
  DampingKind damping_kind = DampingKind::PowerLaw;
};

struct OperatorConfig {
  int dimension = 0;
  enum class Kind { Identity, Matrix, Diagonal } kind = Kind::Identity;
  std::vector<double> values;  // row-major matrix or diagonal
};

struct ExplicitInitial {
  std::vector<double> u0;
  std::vector<double> u1;
};

struct EigenmodeInitial {
  int eigen_index = 0;
  double v0 = 1.0;
  std::optional<double> v1;  // empty selects the fast solution by shooting
  std::optional<double> fast_horizon;
};

struct SlowSetInitial {
  double eps0 = 1e-2;
  double eps1 = 1e-2;
  std::uint64_t seed = 1;
  bool strict = true;
};

using InitialConfig = std::variant<ExplicitInitial, EigenmodeInitial, SlowSetInitial>;

struct IntegrationConfig {
  double t_end = 0.0;
  Tolerances tol{};
  std::vector<double> sample_times;
  bool record_steps = false;
};

struct EpsilonFamilyConfig {
  std::vector<double> eps;
  std::optional<double> t_end;
  int grid_points = 2001;
};

struct AnalysisConfig {
  std::optional<FitWindow> fit_window;
  double tail_fraction = 0.01;
  bool classify = false;
  std::optional<EpsilonFamilyConfig> epsilon_family;
};

struct ExperimentConfig {
  ModelConfig model;
  OperatorConfig op;
  InitialConfig initial;
  IntegrationConfig integration;
  AnalysisConfig analysis;
  Json source;  // normalized echo of the document
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, path + ": " + what);
}

inline void allow_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) fail(path.empty() ? k : path + "." + k, "unknown key");
}

inline std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

inline const Json& require(const Json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(join(path, key), "missing required field");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline double req_number(const Json& obj, const std::string& path, const char* key) {
  return number(require(obj, path, key), join(path, key));
}

inline double opt_number(const Json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

inline bool opt_bool(const Json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) fail(join(path, key), "expected a boolean");
  return obj.at(key).get<bool>();
}

inline std::vector<double> numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline int integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

inline ModelConfig parse_model(const Json& j) {
  const std::string p = "model";
  allow_keys(j, p, {"l", "beta", "alpha", "c", "damping_kind"});
  ModelConfig m;
  m.l = req_number(j, p, "l");
  m.beta = req_number(j, p, "beta");
  m.alpha = req_number(j, p, "alpha");
  m.c = opt_number(j, p, "c", 1.0);
  if (j.contains("damping_kind")) {
    const auto& k = j.at("damping_kind");
    if (k == "power_law") {
      m.damping_kind = DampingKind::PowerLaw;
    } else if (k == "linear_unit") {
      m.damping_kind = DampingKind::LinearUnit;
    } else {
      fail("model.damping_kind", "expected \"power_law\" or \"linear_unit\"");
    }
  }
  return m;
}

inline OperatorConfig parse_operator(const Json& j) {
  const std::string p = "operator";
  allow_keys(j, p, {"dimension", "matrix", "diag"});
  OperatorConfig o;
  o.dimension = integer(require(j, p, "dimension"), "operator.dimension");
  if (o.dimension < 1) fail("operator.dimension", "must be >= 1");
  const bool has_m = j.contains("matrix"), has_d = j.contains("diag");
  if (has_m && has_d) fail(p, "give either matrix or diag, not both");
  if (!has_m && !has_d) fail("operator.matrix", "missing required field (or operator.diag)");
  if (has_d) {
    o.kind = OperatorConfig::Kind::Diagonal;
    o.values = numbers(j.at("diag"), "operator.diag");
    if (static_cast<int>(o.values.size()) != o.dimension) fail("operator.diag", "length must equal dimension");
  } else if (j.at("matrix").is_string()) {
    if (j.at("matrix") != "identity") fail("operator.matrix", "expected \"identity\" or a row-major array");
    o.kind = OperatorConfig::Kind::Identity;
  } else {
    o.kind = OperatorConfig::Kind::Matrix;
    o.values = numbers(j.at("matrix"), "operator.matrix");
    if (static_cast<long>(o.values.size()) != static_cast<long>(o.dimension) * o.dimension)
      fail("operator.matrix", "expected dimension^2 entries");
  }
  return o;
}

inline InitialConfig parse_initial(const Json& j) {
  const std::string p = "initial";
  allow_keys(j, p, {"u0", "u1", "eigenmode", "slow_set_sample"});
  const int forms = (j.contains("u0") || j.contains("u1") ? 1 : 0) + (j.contains("eigenmode") ? 1 : 0) +
                    (j.contains("slow_set_sample") ? 1 : 0);
  if (forms != 1) fail(p, "give exactly one of {u0, u1}, eigenmode, slow_set_sample");
  if (j.contains("eigenmode")) {
    const auto& e = j.at("eigenmode");
    const std::string q = "initial.eigenmode";
    allow_keys(e, q, {"eigen_index", "v0", "v1", "fast_horizon"});
    EigenmodeInitial em;
    em.eigen_index = integer(require(e, q, "eigen_index"), q + ".eigen_index");
    em.v0 = req_number(e, q, "v0");
    const auto& v1 = require(e, q, "v1");
    if (v1.is_string()) {
      if (v1 != "fast") fail(q + ".v1", "expected a number or \"fast\"");
    } else {
      em.v1 = number(v1, q + ".v1");
    }
    if (e.contains("fast_horizon")) em.fast_horizon = number(e.at("fast_horizon"), q + ".fast_horizon");
    return em;
  }
  if (j.contains("slow_set_sample")) {
    const auto& s = j.at("slow_set_sample");
    const std::string q = "initial.slow_set_sample";
    allow_keys(s, q, {"eps0", "eps1", "seed", "strict"});
    SlowSetInitial ss;
    ss.eps0 = opt_number(s, q, "eps0", 1e-2);
    ss.eps1 = opt_number(s, q, "eps1", 1e-2);
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) fail(q + ".seed", "expected a non-negative integer");
      ss.seed = s.at("seed").get<std::uint64_t>();
    }
    ss.strict = opt_bool(s, q, "strict", true);
    return ss;
  }
  ExplicitInitial ex;
  ex.u0 = numbers(require(j, p, "u0"), "initial.u0");
  ex.u1 = numbers(require(j, p, "u1"), "initial.u1");
  return ex;
}

inline IntegrationConfig parse_integration(const Json& j) {
  const std::string p = "integration";
  allow_keys(j, p, {"t_end", "rel_tol", "abs_tol", "sample_times", "max_step", "min_step", "degeneracy_step_cap",
                    "degeneracy_threshold", "record_steps"});
  IntegrationConfig ic;
  ic.t_end = req_number(j, p, "t_end");
  if (!(ic.t_end > 0.0)) fail("integration.t_end", "must be > 0");
  ic.tol.rel_tol = opt_number(j, p, "rel_tol", ic.tol.rel_tol);
  ic.tol.abs_tol = opt_number(j, p, "abs_tol", ic.tol.abs_tol);
  ic.tol.max_step = opt_number(j, p, "max_step", ic.tol.max_step);
  ic.tol.min_step = opt_number(j, p, "min_step", ic.tol.min_step);
  ic.tol.degeneracy_step_cap = opt_number(j, p, "degeneracy_step_cap", ic.tol.degeneracy_step_cap);
  ic.tol.degeneracy_threshold = opt_number(j, p, "degeneracy_threshold", ic.tol.degeneracy_threshold);
  try {
    ic.tol.validate();
  } catch (const Error& e) {
    fail(p, e.what());
  }
  ic.record_steps = opt_bool(j, p, "record_steps", false);

  const double t_start_default = std::min(1e-2, ic.t_end / 10.0);
  if (!j.contains("sample_times")) {
    ic.sample_times = log_times(t_start_default, ic.t_end, 40);
  } else if (j.at("sample_times").is_array()) {
    ic.sample_times = numbers(j.at("sample_times"), "integration.sample_times");
  } else {
    const auto& st = j.at("sample_times");
    allow_keys(st, "integration.sample_times", {"log"});
    const auto& lg = require(st, "integration.sample_times", "log");
    const std::string q = "integration.sample_times.log";
    allow_keys(lg, q, {"t_start", "points_per_decade"});
    const double ts = opt_number(lg, q, "t_start", t_start_default);
    const int ppd = lg.contains("points_per_decade") ? integer(lg.at("points_per_decade"), q + ".points_per_decade") : 40;
    if (!(ts > 0.0 && ts < ic.t_end)) fail(q + ".t_start", "must lie in (0, t_end)");
    if (ppd < 1) fail(q + ".points_per_decade", "must be >= 1");
    ic.sample_times = log_times(ts, ic.t_end, ppd);
  }
  return ic;
}

inline AnalysisConfig parse_analysis(const Json& j) {
  const std::string p = "analysis";
  allow_keys(j, p, {"fit_window", "tail_fraction", "classify", "epsilon_family"});
  AnalysisConfig a;
  if (j.contains("fit_window")) {
    const auto w = numbers(j.at("fit_window"), "analysis.fit_window");
    if (w.size() != 2) fail("analysis.fit_window", "expected [t_lo, t_hi]");
    a.fit_window = FitWindow{w[0], w[1]};
  }
  a.tail_fraction = opt_number(j, p, "tail_fraction", a.tail_fraction);
  if (!(a.tail_fraction > 0.0 && a.tail_fraction < 1.0)) fail("analysis.tail_fraction", "must lie in (0, 1)");
  a.classify = opt_bool(j, p, "classify", false);
  if (j.contains("epsilon_family")) {
    const auto& e = j.at("epsilon_family");
    const std::string q = "analysis.epsilon_family";
    allow_keys(e, q, {"eps", "t_end", "grid_points"});
    EpsilonFamilyConfig ef;
    ef.eps = numbers(require(e, q, "eps"), q + ".eps");
    if (ef.eps.empty()) fail(q + ".eps", "must not be empty");
    if (e.contains("t_end")) ef.t_end = number(e.at("t_end"), q + ".t_end");
    if (e.contains("grid_points")) ef.grid_points = integer(e.at("grid_points"), q + ".grid_points");
    if (ef.grid_points < 2) fail(q + ".grid_points", "must be >= 2");
    a.epsilon_family = ef;
  }
  return a;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const Json& j) {
  using namespace config_detail;
  allow_keys(j, "", {"model", "operator", "initial", "integration", "analysis"});
  ExperimentConfig cfg;
  cfg.model = parse_model(require(j, "", "model"));
  cfg.op = parse_operator(require(j, "", "operator"));
  cfg.initial = parse_initial(require(j, "", "initial"));
  cfg.integration = parse_integration(require(j, "", "integration"));
  cfg.analysis = j.contains("analysis") ? parse_analysis(j.at("analysis")) : AnalysisConfig{};
  if (const auto* ex = std::get_if<ExplicitInitial>(&cfg.initial)) {
    if (static_cast<int>(ex->u0.size()) != cfg.op.dimension) fail("initial.u0", "length must equal operator.dimension");
    if (static_cast<int>(ex->u1.size()) != cfg.op.dimension) fail("initial.u1", "length must equal operator.dimension");
  }
  cfg.source = j;
  return cfg;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

inline Operator make_operator(const OperatorConfig& oc) {
  const int n = oc.dimension;
  switch (oc.kind) {
    case OperatorConfig::Kind::Identity: return identity_operator(n);
    case OperatorConfig::Kind::Diagonal: return diagonal_operator(Eigen::Map<const Vector>(oc.values.data(), n));
    case OperatorConfig::Kind::Matrix: {
      Matrix m(n, n);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) m(i, k) = oc.values[static_cast<std::size_t>(i) * n + k];
      return build_operator(m);
    }
  }
  return identity_operator(n);
}

}  // namespace degenode
