#pragma once

// Trajectory CSV and summary JSON serialization.
//
// CSV columns: t, u_1..u_N, p_1..p_N, E, dissipation, H, K. Numbers use 17
// significant digits and '.' as decimal separator; H and K are empty when
// u = 0.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "degenode/integrator.hpp"
#include "degenode/model.hpp"

namespace degenode {

inline std::string format_number(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string csv_header(int n) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i) h += ",u_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) h += ",p_" + std::to_string(i);
  h += ",E,dissipation,H,K";
  return h;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int n = traj.dimension();
  out << csv_header(n) << '\n';
  for (const auto& s : traj.samples) {
    std::string line = format_number(s.state.t);
    for (int i = 0; i < n; ++i) line += ',' + format_number(s.state.u(i));
    for (int i = 0; i < n; ++i) line += ',' + format_number(s.state.p(i));
    line += ',' + format_number(s.record.energy);
    line += ',' + format_number(s.record.dissipation);
    line += ',' + (s.record.h_ratio ? format_number(*s.record.h_ratio) : std::string());
    line += ',' + (s.record.k_ratio ? format_number(*s.record.k_ratio) : std::string());
    out << line << '\n';
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_trajectory_csv(out, traj);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t row) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::IoError, "bad number '" + std::string(s) + "' on data row " + std::to_string(row));
  return x;
}

}  // namespace io_detail

/// Reads a trajectory CSV back. The model context (params, operator,
/// damping) is supplied by the caller; E, dissipation, H and K are taken
/// from the file. The dissipation integral is not stored and reads as 0.
inline Trajectory read_trajectory_csv(std::istream& in, const ModelParams& prm, const Operator& op, const Damping& g) {
  Trajectory traj;
  traj.params = prm;
  traj.op = op;
  traj.damping = g;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty CSV");
  const int n = op.n();
  if (line != csv_header(n)) throw Error(ErrorCode::DimensionMismatch, "CSV header does not match dimension " + std::to_string(n));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto f = io_detail::split(line);
    if (static_cast<int>(f.size()) != 2 * n + 5)
      throw Error(ErrorCode::IoError, "wrong number of fields on data row " + std::to_string(row));
    Sample s;
    s.state.t = io_detail::parse_double(f[0], row);
    s.state.u.resize(n);
    s.state.p.resize(n);
    for (int i = 0; i < n; ++i) s.state.u(i) = io_detail::parse_double(f[1 + i], row);
    for (int i = 0; i < n; ++i) s.state.p(i) = io_detail::parse_double(f[1 + n + i], row);
    s.record.t = s.state.t;
    s.record.energy = io_detail::parse_double(f[2 * n + 1], row);
    s.record.dissipation = io_detail::parse_double(f[2 * n + 2], row);
    if (!f[2 * n + 3].empty()) s.record.h_ratio = io_detail::parse_double(f[2 * n + 3], row);
    if (!f[2 * n + 4].empty()) s.record.k_ratio = io_detail::parse_double(f[2 * n + 4], row);
    traj.samples.push_back(std::move(s));
  }
  return traj;
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path, const ModelParams& prm, const Operator& op,
                                      const Damping& g) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_trajectory_csv(in, prm, op, g);
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace degenode
