#pragma once

// JSON scenarios: parsing with JSON-pointer error paths, dispatch to the
// studies, and the on-disk artifacts (CSV, report.json, summary.txt).

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gyrolimit/analysis.hpp"
#include "gyrolimit/identities.hpp"
#include "gyrolimit/io.hpp"

namespace gyrolimit {

inline const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds = {"orbit",        "guiding",    "converge",
                                                 "moment",       "displacement", "zdrift",
                                                 "identities",   "resonance",  "confine"};
  return kinds;
}

struct Scenario {
  std::string kind;
  /// the validated document, defaults not filled in
  Json doc;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, "cli::parse_scenario", path + ": " + what);
}

inline const Json& need(const Json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) schema_error(path + "/" + key, "missing");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "not finite");
  return d;
}

inline double number_at(const Json& obj, const std::string& path, const std::string& key) {
  return number(need(obj, path, key), path + "/" + key);
}

inline double number_or(const Json& obj, const std::string& path, const std::string& key,
                        double fallback) {
  return obj.contains(key) ? number(obj.at(key), path + "/" + key) : fallback;
}

inline long integer_at(const Json& obj, const std::string& path, const std::string& key) {
  const Json& v = need(obj, path, key);
  if (!v.is_number_integer()) schema_error(path + "/" + key, "expected an integer");
  return v.get<long>();
}

inline long integer_or(const Json& obj, const std::string& path, const std::string& key,
                       long fallback) {
  return obj.contains(key) ? integer_at(obj, path, key) : fallback;
}

inline Vec3 vec3(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) schema_error(path, "expected an array of 3 numbers");
  return {number(v[0], path + "/0"), number(v[1], path + "/1"), number(v[2], path + "/2")};
}

inline Vec3 vec3_at(const Json& obj, const std::string& path, const std::string& key) {
  return vec3(need(obj, path, key), path + "/" + key);
}

inline std::vector<double> number_list(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) schema_error(path, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "/" + std::to_string(i)));
  return out;
}

inline std::vector<double> sorted_list(const Json& obj, const std::string& path,
                                       const std::string& key) {
  std::vector<double> xs = number_list(need(obj, path, key), path + "/" + key);
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) schema_error(path + "/" + key, "not sorted");
  return xs;
}

inline std::pair<double, double> window_or(const Json& obj, const std::string& key,
                                           std::pair<double, double> fallback) {
  if (!obj.contains(key)) return fallback;
  std::vector<double> w = number_list(obj.at(key), "/" + key);
  if (w.size() != 2 || !(w[0] <= w[1])) schema_error("/" + key, "expected [lo, hi] with lo <= hi");
  return {w[0], w[1]};
}

inline Field parse_field(const Json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  const Json& kind = need(j, path, "kind");
  if (!kind.is_string()) schema_error(path + "/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  try {
    if (k == "uniform") return UniformField(vec3_at(j, path, "b0"));
    if (k == "bump_column") return BumpColumnField(number_at(j, path, "a0"));
    if (k == "screw_pinch")
      return ScrewPinchField(number_at(j, path, "c"), number_at(j, path, "Bz"),
                             number_or(j, path, "p_c", 0.0));
    if (k == "modulated_pinch")
      return ModulatedPinchField(number_at(j, path, "c"), number_at(j, path, "Bz"),
                                 number_at(j, path, "eps"), number_at(j, path, "k"),
                                 number_or(j, path, "p_c", 0.0));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaError) throw;
    schema_error(path, e.what());
  }
  schema_error(path + "/kind", "unknown field kind '" + k + "'");
}

inline FourierProfile parse_profile(const Json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  FourierProfile f;
  f.mean = number_at(j, path, "mean");
  if (j.contains("cos")) f.cos_coef = number_list(j.at("cos"), path + "/cos");
  if (j.contains("sin")) f.sin_coef = number_list(j.at("sin"), path + "/sin");
  return f;
}

inline BoozerData parse_boozer(const Json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  BoozerData bd;
  bd.alpha = number_at(j, path, "alpha");
  bd.beta = number_at(j, path, "beta");
  bd.a = number_at(j, path, "a");
  bd.c = number_at(j, path, "c");
  bd.M = int(integer_at(j, path, "M"));
  bd.N = int(integer_at(j, path, "N"));
  bd.f = parse_profile(need(j, path, "profile"), path + "/profile");
  bd.phi0 = number_or(j, path, "phi0", 0.0);
  bd.theta0 = number_or(j, path, "theta0", 0.0);
  try {
    bd.validate();
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return bd;
}

inline std::vector<double> parse_times(const Json& doc) {
  if (doc.contains("times")) return sorted_list(doc, "", "times");
  const Json& g = need(doc, "", "t_grid");
  const double T = number_at(g, "/t_grid", "T");
  const long n = integer_at(g, "/t_grid", "n");
  if (!(T > 0.0)) schema_error("/t_grid/T", "must be positive");
  if (n < 2) schema_error("/t_grid/n", "need at least 2 points");
  std::vector<double> t;
  for (long i = 0; i < n; ++i) t.push_back(T * i / (n - 1));
  return t;
}

inline void check_tol(const Json& doc) {
  if (!doc.contains("tol")) return;
  const double tol = number(doc.at("tol"), "/tol");
  if (!(tol > 1e-13 && tol < 1e-3)) schema_error("/tol", "must lie in (1e-13, 1e-3)");
}

inline void check_positive(const Json& doc, const std::string& key) {
  if (!(number_at(doc, "", key) > 0.0)) schema_error("/" + key, "must be positive");
}

}  // namespace detail

/// Parses and validates a scenario document. Throws ParseError for malformed
/// JSON and SchemaError naming the offending JSON pointer otherwise.
inline Scenario parse_scenario(std::string_view text) {
  using namespace detail;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "cli::parse_scenario", e.what());
  }
  if (!doc.is_object()) schema_error("", "scenario must be a JSON object");
  const Json& kind = need(doc, "", "kind");
  if (!kind.is_string()) schema_error("/kind", "expected a string");
  Scenario sc;
  sc.kind = kind.get<std::string>();
  const auto& kinds = scenario_kinds();
  if (std::find(kinds.begin(), kinds.end(), sc.kind) == kinds.end())
    schema_error("/kind", "unknown kind '" + sc.kind + "'");
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) schema_error("/output_dir", "expected a string");
    sc.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) schema_error("/seed", "expected a non-negative integer");
    sc.seed = doc["seed"].get<std::uint64_t>();
  }
  check_tol(doc);
  const std::string& k = sc.kind;

  auto field_required = [&](bool equilibrium) {
    const Field f = parse_field(need(doc, "", "field"), "/field");
    if (equilibrium && !f.has_pressure())
      schema_error("/field/kind", "this scenario needs a field with a pressure function");
  };
  auto initial_data = [&] {
    vec3_at(doc, "", "x0");
    vec3_at(doc, "", "v0");
  };

  if (k == "orbit") {
    field_required(false);
    initial_data();
    if (number_at(doc, "", "omega") == 0.0) schema_error("/omega", "must be non-zero");
    check_positive(doc, "T");
    if (doc.contains("integrator")) {
      const Json& m = doc["integrator"];
      if (!m.is_string() || (m != "dop853" && m != "boris"))
        schema_error("/integrator", "expected \"dop853\" or \"boris\"");
    }
    if (doc.contains("dt") && !(number_at(doc, "", "dt") > 0.0))
      schema_error("/dt", "must be positive");
  } else if (k == "guiding") {
    field_required(false);
    initial_data();
    check_positive(doc, "T");
  } else if (k == "converge" || k == "moment") {
    field_required(false);
    initial_data();
    const auto w = sorted_list(doc, "", "omegas");
    if (!(w.front() > 0.0)) schema_error("/omegas", "must be positive");
    check_positive(doc, "T");
    window_or(doc, "slope_window", {0, 0});
  } else if (k == "displacement") {
    field_required(true);
    initial_data();
    const auto w = sorted_list(doc, "", "omegas");
    if (!(w.front() > 0.0)) schema_error("/omegas", "must be positive");
    check_positive(doc, "T");
    if (doc.contains("domain")) {
      const Json& d = doc["domain"];
      const double lo = number_at(d, "/domain", "r_in"), hi = number_at(d, "/domain", "r_out");
      if (!(lo >= 0.0 && hi > lo)) schema_error("/domain", "need 0 <= r_in < r_out");
    }
  } else if (k == "zdrift") {
    number_at(doc, "", "a0");
    const Vec3 x0 = vec3_at(doc, "", "x0");
    if (!(x0[0] * x0[0] + x0[1] * x0[1] > 1.0)) schema_error("/x0", "need x1^2 + x2^2 > 1");
    if (number_at(doc, "", "phi_dot0") == 0.0) schema_error("/phi_dot0", "must be non-zero");
    const auto w = sorted_list(doc, "", "omegas");
    if (!(w.front() > 0.0)) schema_error("/omegas", "must be positive");
    check_positive(doc, "T");
  } else if (k == "identities") {
    if (doc.contains("fields")) {
      const Json& fs = doc["fields"];
      if (!fs.is_array() || fs.empty()) schema_error("/fields", "expected a non-empty array");
      for (std::size_t i = 0; i < fs.size(); ++i) parse_field(fs[i], "/fields/" + std::to_string(i));
    }
    if (integer_or(doc, "", "points", 1000) < 1) schema_error("/points", "must be positive");
  } else if (k == "resonance") {
    parse_boozer(need(doc, "", "boozer"), "/boozer");
    check_positive(doc, "v0_sq");
    if (!(number_at(doc, "", "mu0") >= 0.0)) schema_error("/mu0", "must be non-negative");
    const double sgn = number_or(doc, "", "h0_sign", 1.0);
    if (sgn != 1.0 && sgn != -1.0) schema_error("/h0_sign", "must be +1 or -1");
    parse_times(doc);
  } else if (k == "confine") {
    field_required(false);
    vec3_at(doc, "", "x0");
    check_positive(doc, "omega");
    check_positive(doc, "T");
    if (integer_or(doc, "", "seeds", 5) < 1) schema_error("/seeds", "must be positive");
  }
  sc.doc = std::move(doc);
  return sc;
}

struct RunOptions {
  std::optional<std::string> output_dir;
  unsigned threads = 1;
};

struct RunOutcome {
  /// 0 contract holds, 2 contract violated, 1 runtime error
  int exit_code = 0;
  std::string summary;
  Json report;
  std::filesystem::path output_dir;
};

namespace detail {

/// Collects contract checks and the summary lines for one run.
class Contract {
 public:
  void check(const std::string& name, bool ok, const std::string& detail) {
    all_ &= ok;
    lines_.push_back((ok ? "PASS " : "FAIL ") + name + ": " + detail);
    Json j;
    j["name"] = name;
    j["pass"] = ok;
    j["detail"] = detail;
    checks_.push_back(j);
  }
  bool ok() const { return all_; }
  const std::vector<std::string>& lines() const { return lines_; }
  Json json() const { return checks_; }

 private:
  bool all_ = true;
  std::vector<std::string> lines_;
  Json checks_ = Json::array();
};

inline std::string g6(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

inline std::string in_window(double v, std::pair<double, double> w) {
  return g6(v) + " in [" + g6(w.first) + ", " + g6(w.second) + "]";
}

inline bool within(double v, std::pair<double, double> w) { return v >= w.first && v <= w.second; }

struct Artifacts {
  std::map<std::string, std::string> files;
  Json results;
};

inline Json displacement_json(const DisplacementReport& r, double avg) {
  Json j;
  j["omega"] = r.omega;
  j["max_abs_residual"] = r.max_abs_residual();
  j["max_abs_gyro"] = r.max_abs_gyro();
  j["final_secular"] = r.secular_term.back();
  j["averaged_drift"] = avg;
  return j;
}

inline void run_kind(const Scenario& sc, const RunOptions& opt, Artifacts& art, Contract& ct) {
  const Json& d = sc.doc;
  const double tol = number_or(d, "", "tol", 1e-10);
  const unsigned threads = opt.threads;
  const std::string& k = sc.kind;
  Json& res = art.results;

  if (k == "orbit") {
    const Field field = parse_field(d["field"], "/field");
    const Vec3 x0 = vec3_at(d, "", "x0"), v0 = vec3_at(d, "", "v0");
    const double omega = number_at(d, "", "omega"), T = number_at(d, "", "T");
    const int samples = int(integer_or(d, "", "samples", 512));
    const bool boris = d.value("integrator", std::string("dop853")) == "boris";
    const OrbitTrajectory tr =
        boris ? integrate_boris(field, x0, v0, omega, T,
                                number_or(d, "", "dt", 2 * M_PI / (64 * std::abs(omega))), samples)
              : integrate_orbit(field, x0, v0, omega, T, tol, OrbitOptions{samples});
    art.files["trajectory_orbit.csv"] = orbit_csv(tr);
    res["meta"] = to_json(tr.meta);
    const double speed = v0.norm();
    double bound_excess = 0.0;
    for (const auto& s : tr.samples)
      bound_excess = std::max(bound_excess, (s.x - x0).norm() - speed * s.t);
    res["speed_bound_excess"] = bound_excess;
    if (boris)
      ct.check("speed_conservation", tr.meta.max_speed_drift <= 1e-12 * std::max(1.0, speed),
               g6(tr.meta.max_speed_drift) + " <= 1e-12 |v0|");
    else
      ct.check("speed_conservation", tr.meta.max_speed_drift <= 100 * tol * speed,
               g6(tr.meta.max_speed_drift) + " <= 100 tol |v0|");
    ct.check("displacement_bound", bound_excess <= 1e-9, "|x(t) - x0| <= |v0| t");
    if (const auto* u = std::get_if<UniformField>(&field.variant());
        u && u->b0().normalized().isApprox(Vec3(0, 0, 1)) && !boris) {
      double err = 0.0;
      const double w = omega * u->b0().norm();
      for (const auto& s : tr.samples) err = std::max(err, (s.x - helix_exact(x0, v0, w, s.t)).norm());
      res["helix_error"] = err;
      ct.check("helix_oracle", err <= 100 * tol * std::max(1.0, T), g6(err) + " <= 100 tol T");
    }
  } else if (k == "guiding") {
    const Field field = parse_field(d["field"], "/field");
    const Vec3 x0 = vec3_at(d, "", "x0"), v0 = vec3_at(d, "", "v0");
    const double T = number_at(d, "", "T");
    GuidingOptions go;
    go.samples = int(integer_or(d, "", "samples", 512));
    const GuidingTrajectory tr = integrate_guiding(field, x0, v0, T, tol, go);
    art.files["trajectory_guiding.csv"] = guiding_csv(tr);
    const SecondOrderResidual so = guiding_second_order_residual(field, tr);
    res["meta"] = to_json(tr.meta);
    res["mu0"] = tr.mu0;
    res["h0"] = tr.h0;
    res["second_order_residual"] = so.max_residual;
    res["second_order_scale"] = so.scale;
    ct.check("moment_invariant", tr.meta.max_invariant_drift <= 100 * tol,
             g6(tr.meta.max_invariant_drift) + " <= 100 tol");
    ct.check("second_order_form", so.max_residual <= 100 * tol * so.scale,
             g6(so.max_residual) + " <= 100 tol scale");
  } else if (k == "converge" || k == "moment") {
    const Field field = parse_field(d["field"], "/field");
    const Vec3 x0 = vec3_at(d, "", "x0"), v0 = vec3_at(d, "", "v0");
    const auto omegas = sorted_list(d, "", "omegas");
    const double T = number_at(d, "", "T");
    const bool conv = k == "converge";
    const auto window =
        window_or(d, "slope_window", conv ? std::pair{-1.15, -0.85} : std::pair{-1.25, -0.75});
    if (conv && d.value("expect_degenerate", false)) {
      try {
        convergence_study(field, x0, v0, omegas, T, tol, threads);
        ct.check("fit_degenerate", false, "expected FitDegenerate, fit succeeded");
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FitDegenerate) throw;
        res["degenerate"] = e.what();
        ct.check("fit_degenerate", true, "errors at the tolerance floor");
      }
      return;
    }
    const StudyReport rep = conv ? convergence_study(field, x0, v0, omegas, T, tol, threads)
                                 : moment_study(field, x0, v0, omegas, T, tol, threads);
    art.files[conv ? "study_errors.csv" : "study_moment_drift.csv"] = study_csv(rep);
    res["study"] = to_json(rep);
    ct.check("slope", within(rep.slope, window), in_window(rep.slope, window));
    if (conv) {
      art.files["trajectory_reference.csv"] =
          guiding_csv(integrate_guiding(field, x0, v0, T, kReferenceTol));
    } else {
      const OrbitTrajectory tr = integrate_orbit_robust(field, x0, v0, omegas.front(), T, tol);
      art.files["trajectory_moment.csv"] = moment_csv(moment_series(tr, field));
    }
  } else if (k == "displacement") {
    const Field field = parse_field(d["field"], "/field");
    const Vec3 x0 = vec3_at(d, "", "x0"), v0 = vec3_at(d, "", "v0");
    const auto omegas = sorted_list(d, "", "omegas");
    const double T = number_at(d, "", "T");
    std::optional<Annulus> dom;
    if (d.contains("domain"))
      dom = Annulus{number_at(d["domain"], "/domain", "r_in"),
                    number_at(d["domain"], "/domain", "r_out")};
    const GuidingTrajectory g = integrate_guiding(field, x0, v0, T, kReferenceTol);
    auto reps = parallel_map(omegas.size(), threads, [&](std::size_t i) {
      OrbitOptions oo;
      oo.integrand = gyro_integrand(field, g, omegas[i]);
      const OrbitTrajectory tr = integrate_orbit(field, x0, v0, omegas[i], T, tol, oo);
      return displacement_decomposition(tr, g, field, omegas[i], dom);
    });
    Json runs = Json::array();
    std::vector<double> res_max, avgs;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const double avg = averaged_pressure_drift(reps[i], T);
      runs.push_back(displacement_json(reps[i], avg));
      res_max.push_back(reps[i].max_abs_residual());
      avgs.push_back(std::abs(avg));
      art.files["trajectory_displacement_" + std::to_string(i) + ".csv"] = displacement_csv(reps[i]);
    }
    res["runs"] = runs;
    const auto& last = reps.back();
    const double ratio_floor = number_or(d, "", "min_gyro_ratio", 50.0);
    const double gr = last.max_abs_gyro() / last.max_abs_residual();
    res["gyro_to_residual"] = gr;
    ct.check("residual_below_gyro", gr >= ratio_floor, g6(gr) + " >= " + g6(ratio_floor));
    if (omegas.size() >= 2) {
      const auto window = window_or(d, "slope_window", {-2.3, -1.7});
      const double slope = fit_loglog(omegas, res_max).slope;
      res["residual_slope"] = slope;
      ct.check("residual_slope", within(slope, window), in_window(slope, window));
      if (std::abs(omegas.back() / omegas.front() - 10.0) < 1e-9 && avgs.front() > 0.0) {
        const auto aw = window_or(d, "average_ratio_window", {50.0, 200.0});
        const double ar = avgs.front() / avgs.back();
        res["averaged_drift_ratio"] = ar;
        ct.check("averaged_drift_ratio", within(ar, aw), in_window(ar, aw));
      }
    }
  } else if (k == "zdrift") {
    const auto omegas = sorted_list(d, "", "omegas");
    const double rel = number_or(d, "", "ratio_tol", 0.25);
    const auto window = window_or(d, "slope_window", {-1.15, -0.85});
    const ZDriftReport rep =
        z_drift_study(number_at(d, "", "a0"), vec3_at(d, "", "x0"), number_at(d, "", "phi_dot0"),
                      omegas, number_at(d, "", "T"), tol, number_or(d, "", "v_r", 0.0),
                      number_or(d, "", "v_z", 0.0), threads);
    art.files["study_zdrift.csv"] = study_csv(rep.study);
    res["study"] = to_json(rep.study);
    res["time_ratio"] = rep.time_ratio;
    res["omega_ratio"] = rep.omega_ratio;
    res["phi_ratio"] = rep.phi_ratio;
    ct.check("slope", within(rep.study.slope, window), in_window(rep.study.slope, window));
    const std::string r = " within " + g6(100 * rel) + "%";
    ct.check("time_ratio", ZDriftReport::within(rep.time_ratio, 2.0, rel), g6(rep.time_ratio) + " ~ 2" + r);
    ct.check("omega_ratio", ZDriftReport::within(rep.omega_ratio, 2.0, rel), g6(rep.omega_ratio) + " ~ 2" + r);
    ct.check("phi_ratio", ZDriftReport::within(rep.phi_ratio, 4.0, rel), g6(rep.phi_ratio) + " ~ 4" + r);
  } else if (k == "identities") {
    std::vector<Field> fields;
    if (d.contains("fields")) {
      for (std::size_t i = 0; i < d["fields"].size(); ++i)
        fields.push_back(parse_field(d["fields"][i], "/fields/" + std::to_string(i)));
    } else {
      fields = {UniformField(Vec3(0, 0, 1)), BumpColumnField(1.0), ScrewPinchField(1.0, 1.0)};
    }
    const int n = int(integer_or(d, "", "points", 1000));
    const double thr = number_or(d, "", "threshold", 1e-10);
    auto sweeps = parallel_map(fields.size(), threads, [&](std::size_t i) {
      return identity_sweep(fields[i], n, sc.seed + i);
    });
    Json table = Json::array();
    CsvWriter csv({"field_index", "identity_index", "max_scaled_residual"});
    for (std::size_t i = 0; i < sweeps.size(); ++i) {
      Json row;
      row["field"] = sweeps[i].field;
      row["points"] = sweeps[i].points;
      for (int id = 0; id < 4; ++id) {
        const IdentityResidual& w = sweeps[i].worst[id];
        row[w.name] = to_json(w);
        csv.row({double(i), double(id), w.scaled()});
        ct.check(sweeps[i].field + "/" + w.name, w.scaled() <= thr,
                 g6(w.scaled()) + " <= " + g6(thr));
      }
      table.push_back(row);
    }
    res["identities"] = table;
    art.files["identities.csv"] = csv.str();
  } else if (k == "resonance") {
    const BoozerData bd = parse_boozer(d["boozer"], "/boozer");
    const double v0_sq = number_at(d, "", "v0_sq"), mu0 = number_at(d, "", "mu0");
    const std::vector<double> times = parse_times(d);
    res["m"] = bd.m();
    res["c0"] = bd.c0();
    const RhoConsistency rc = rho_consistency(bd, v0_sq, mu0, times.back());
    res["rho_residual"] = rc.residual;
    ct.check("rho_consistency", rc.residual <= 1e-10, g6(rc.residual) + " <= 1e-10");
    CsvWriter csv({"t", "rho", "drift", "brute_force"});
    if (bd.m() != 0.0) {
      const Thm6Comparison cmp =
          thm6_closed_form_m_nonzero(bd, v0_sq, mu0, number_or(d, "", "h0_sign", 1.0), times);
      for (const auto& q : cmp.points) csv.row({q.t, q.rho, q.drift, q.brute_force});
      res["max_discrepancy"] = cmp.max_discrepancy;
      res["envelope"] = cmp.envelope;
      res["max_abs_drift"] = cmp.max_abs_drift;
      ct.check("closed_form_vs_quadrature", cmp.max_discrepancy <= 1e-8,
               g6(cmp.max_discrepancy) + " <= 1e-8");
      ct.check("drift_envelope", cmp.max_abs_drift <= cmp.envelope,
               g6(cmp.max_abs_drift) + " <= " + g6(cmp.envelope));
    } else {
      const Thm6ResonantReport rr = thm6_resonant_m_zero(bd, v0_sq, mu0, times);
      for (const auto& q : rr.points) csv.row({q.t, q.rho, q.drift, q.brute_force});
      res["rate"] = rr.rate;
      res["linearity_deviation"] = rr.linearity_deviation;
      res["brute_force_discrepancy"] = rr.brute_force_discrepancy;
      res["vanishes"] = rr.vanishes;
      ct.check("linear_growth", rr.linearity_deviation <= 1e-12,
               g6(rr.linearity_deviation) + " <= 1e-12");
      ct.check("brute_force", rr.brute_force_discrepancy <= 1e-8,
               g6(rr.brute_force_discrepancy) + " <= 1e-8");
      const bool flat = bd.f.derivative(bd.c0()) == 0.0;
      ct.check("vanishes_iff_flat", rr.vanishes == flat,
               std::string("drift ") + (rr.vanishes ? "vanishes" : "grows") + ", f'(c0) " +
                   (flat ? "= 0" : "!= 0"));
    }
    art.files["resonance.csv"] = csv.str();
  } else if (k == "confine") {
    const Field field = parse_field(d["field"], "/field");
    const int seeds = int(integer_or(d, "", "seeds", 5));
    const ConfinementTrend tr =
        confinement_trend(field, vec3_at(d, "", "x0"), number_at(d, "", "omega"),
                          number_at(d, "", "T"), seeds, sc.seed, number_or(d, "", "speed", 1.0),
                          tol, threads);
    Json cases = Json::array();
    CsvWriter csv({"case", "r_exit", "tau_base", "tau_doubled"});
    for (std::size_t i = 0; i < tr.cases.size(); ++i) {
      const auto& c = tr.cases[i];
      Json j;
      j["v0"] = to_json(c.v0);
      j["r_exit"] = c.r_exit;
      j["tau_base"] = c.base.tau ? Json(*c.base.tau) : Json("censored");
      j["tau_doubled"] = c.doubled.tau ? Json(*c.doubled.tau) : Json("censored");
      cases.push_back(j);
      csv.row({double(i), c.r_exit, c.tau_base(), c.tau_doubled()});
    }
    res["cases"] = cases;
    art.files["confinement.csv"] = csv.str();
    const int need_ok = std::max(1, seeds - 1);
    ct.check("non_decreasing_trend", tr.non_decreasing() >= need_ok,
             std::to_string(tr.non_decreasing()) + "/" + std::to_string(seeds) + " >= " +
                 std::to_string(need_ok));
  }
}

}  // namespace detail

/// Runs a validated scenario and writes its artifacts. Library errors are
/// reported with exit code 1 and the scenario kind attached; they are not
/// rethrown.
inline RunOutcome run(const Scenario& sc, const RunOptions& opt = {}) {
  RunOutcome out;
  out.output_dir = opt.output_dir ? *opt.output_dir : sc.output_dir;
  detail::Artifacts art;
  detail::Contract ct;
  Json report;
  report["kind"] = sc.kind;
  report["seed"] = sc.seed;
  std::ostringstream summary;
  summary << "scenario: " << sc.kind << '\n';
  try {
    detail::run_kind(sc, opt, art, ct);
    out.exit_code = ct.ok() ? 0 : 2;
    report["status"] = ct.ok() ? "pass" : "fail";
    report["checks"] = ct.json();
    report["results"] = art.results;
    for (const auto& l : ct.lines()) summary << l << '\n';
    summary << "status: " << (ct.ok() ? "PASS" : "FAIL") << '\n';
  } catch (const Error& e) {
    out.exit_code = 1;
    std::string msg = "[" + sc.kind + "] " + e.what();
    if (e.time() && msg.find("t = ") == std::string::npos)
      msg += " (t = " + detail::g6(*e.time()) + ")";
    Json err;
    err["code"] = std::string(to_string(e.code()));
    err["operation"] = e.operation();
    err["message"] = msg;
    if (e.time()) err["time"] = *e.time();
    report["status"] = "error";
    report["error"] = err;
    summary << "ERROR " << msg << '\n' << "status: ERROR\n";
  }
  out.report = report;
  out.summary = summary.str();
  std::filesystem::create_directories(out.output_dir);
  for (const auto& [name, text] : art.files) write_text(out.output_dir / name, text);
  write_text(out.output_dir / "report.json", report.dump(2) + "\n");
  write_text(out.output_dir / "summary.txt", out.summary);
  return out;
}

}  // namespace gyrolimit
