#pragma once

// CSV and JSON serialisation of trajectories and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gyrolimit/analysis.hpp"
#include "gyrolimit/identities.hpp"

namespace gyrolimit {

using Json = nlohmann::ordered_json;

/// %.17g, the round-trip format used for every CSV float.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt17(values[i]);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "io::write", "cannot open " + path.string());
  f << text;
}

inline std::string orbit_csv(const OrbitTrajectory& tr) {
  CsvWriter w({"t", "x1", "x2", "x3", "v1", "v2", "v3"});
  for (const auto& s : tr.samples) w.row({s.t, s.x[0], s.x[1], s.x[2], s.v[0], s.v[1], s.v[2]});
  return w.str();
}

inline std::string guiding_csv(const GuidingTrajectory& tr) {
  CsvWriter w({"t", "x1", "x2", "x3", "h"});
  for (const auto& s : tr.samples) w.row({s.t, s.x[0], s.x[1], s.x[2], s.h});
  return w.str();
}

inline std::string displacement_csv(const DisplacementReport& r) {
  CsvWriter w({"t", "p", "gyro", "secular", "residual"});
  for (std::size_t i = 0; i < r.times.size(); ++i)
    w.row({r.times[i], r.p_series[i], r.gyro_term[i], r.secular_term[i], r.residual[i]});
  return w.str();
}

inline std::string moment_csv(const MomentSeries& m) {
  CsvWriter w({"t", "mu", "h"});
  for (std::size_t i = 0; i < m.times.size(); ++i) w.row({m.times[i], m.mu_omega[i], m.h_omega[i]});
  return w.str();
}

inline std::string study_csv(const StudyReport& r) {
  CsvWriter w({"omega", "error"});
  for (std::size_t i = 0; i < r.omegas.size(); ++i) w.row({r.omegas[i], r.errors[i]});
  return w.str();
}

inline Json to_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

inline Json to_json(const StudyReport& r) {
  Json j;
  j["field"] = r.field;
  j["omegas"] = r.omegas;
  j["errors"] = r.errors;
  j["methods"] = r.methods;
  j["slope"] = r.slope;
  j["intercept"] = r.intercept;
  j["fit_residual"] = r.fit_residual;
  j["T"] = r.T;
  j["tol"] = r.tol;
  j["x0"] = to_json(r.x0);
  j["v0"] = to_json(r.v0);
  return j;
}

inline Json to_json(const TrajectoryMeta& m) {
  Json j;
  if (m.omega) j["omega"] = *m.omega;
  j["field"] = m.field;
  j["method"] = m.method;
  if (m.method == "boris") j["dt"] = m.dt; else j["tol"] = m.tol;
  j["accepted_steps"] = m.accepted;
  j["rejected_steps"] = m.rejected;
  j["rhs_evaluations"] = m.evaluations;
  j["max_speed_drift"] = m.max_speed_drift;
  j["max_invariant_drift"] = m.max_invariant_drift;
  j["bounce_times"] = m.bounce_times;
  return j;
}

inline Json to_json(const IdentityResidual& r) {
  Json j;
  j["name"] = r.name;
  j["residual"] = r.residual;
  j["scale"] = r.scale;
  j["scaled"] = r.scaled();
  j["point"] = to_json(r.point);
  j["vec"] = to_json(r.vec);
  return j;
}

}  // namespace gyrolimit
