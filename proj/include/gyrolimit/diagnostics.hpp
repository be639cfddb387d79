#pragma once

// Per-trajectory quantities: velocity splitting, magnetic moment, the
// first-order pressure-displacement expansion, isodynamic defect and exit
// times from the annular domain.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "gyrolimit/integrators.hpp"
#include "gyrolimit/quadrature.hpp"

namespace gyrolimit {

struct VelocitySplit {
  double h = 0.0;
  Vec3 v_perp = Vec3::Zero();
};

inline VelocitySplit split_velocity(const Vec3& v, const Vec3& b) {
  if (std::abs(b.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::NotUnit, "diagnostics::split_velocity",
                "|b| = " + std::to_string(b.norm()));
  const double h = v.dot(b);
  return {h, v - h * b};
}

struct MomentSeries {
  std::vector<double> times;
  std::vector<double> mu_omega;
  std::vector<double> h_omega;
  double mu0_ref = 0.0;
  /// max_t |mu(t) - mu(0)|
  double max_drift = 0.0;
};

template <MagneticField F>
MomentSeries moment_series(const OrbitTrajectory& tr, const F& field) {
  MomentSeries m;
  m.times.reserve(tr.samples.size());
  for (const auto& s : tr.samples) {
    const FieldSample fs = sample(field, s.x);
    const VelocitySplit sp = split_velocity(s.v, fs.b);
    m.times.push_back(s.t);
    m.h_omega.push_back(sp.h);
    m.mu_omega.push_back(sp.v_perp.squaredNorm() / (2.0 * fs.mag));
  }
  m.mu0_ref = m.mu_omega.front();
  for (double mu : m.mu_omega) m.max_drift = std::max(m.max_drift, std::abs(mu - m.mu0_ref));
  return m;
}

/// Cylindrical shell r_in <= r <= r_out standing in for the bounded domain.
struct Annulus {
  double r_in = 0.0;
  double r_out = std::numeric_limits<double>::infinity();
  bool contains(const Vec3& x) const {
    const double r = cylindrical_radius(x);
    return r >= r_in && r <= r_out;
  }
};

struct DisplacementReport {
  std::vector<double> times;
  std::vector<double> p_series;
  std::vector<double> gyro_term;
  std::vector<double> secular_term;
  std::vector<double> residual;
  /// running integral of the gyration part of gyro_term (without its
  /// constant initial value), present when the orbit recorded it
  std::vector<double> gyro_integral;
  double omega = 0.0;
  double gyro_initial = 0.0;

  double max_abs_residual() const {
    double m = 0.0;
    for (double r : residual) m = std::max(m, std::abs(r));
    return m;
  }
  double max_abs_gyro() const {
    double m = 0.0;
    for (double g : gyro_term) m = std::max(m, std::abs(g));
    return m;
  }
};

/// (b(x) x v) . grad p(x) / (|B(x)| omega), the oscillating first-order term.
template <MagneticField F>
double gyro_part(const F& field, const Vec3& x, const Vec3& v, double omega) {
  const FieldSample s = sample(field, x);
  const PressureSample p = pressure_at(field, x);
  return s.b.cross(v).dot(p.grad) / (s.mag * omega);
}

/// Integrand for OrbitOptions::integrand so that integrate_orbit records the
/// running integral of gyro_part with x taken from the limit trajectory.
template <MagneticField F>
std::function<double(double, const Vec3&, const Vec3&)> gyro_integrand(
    const F& field, const GuidingTrajectory& guiding, double omega) {
  require(guiding.dense.has_value(), "diagnostics::gyro_integrand",
          "limit trajectory must keep its dense output");
  return [&field, &guiding, omega](double t, const Vec3&, const Vec3& v) {
    return gyro_part(field, guiding.at(t).x, v, omega);
  };
}

/// Secular integrand (|v0|^2/|B| - mu0) (B x grad p) . grad(1/|B|) at x.
template <MagneticField F>
double secular_integrand(const F& field, const Vec3& x, double v0_sq, double mu0) {
  const EquilibriumSample e = equilibrium_sample(field, x);
  return (v0_sq / e.base.mag - mu0) * e.base.B.cross(e.grad_p).dot(e.base.grad_inv_mag);
}

namespace detail {

inline double bisect_exit(const std::function<bool(double)>& outside, double a, double b,
                          double tol) {
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    if (outside(m)) b = m; else a = m;
  }
  return b;
}

}  // namespace detail

/// Thm-style decomposition p(x_w) - p0 = gyro + secular + residual on the
/// common sample grid of the orbit and the limit trajectory.
template <MagneticField F>
DisplacementReport displacement_decomposition(const OrbitTrajectory& orbit,
                                              const GuidingTrajectory& guiding, const F& field,
                                              double omega,
                                              const std::optional<Annulus>& domain = {}) {
  constexpr const char* op = "diagnostics::displacement_decomposition";
  require(orbit.samples.size() == guiding.samples.size(), op,
          "orbit and limit trajectory must share the sample grid");
  require((orbit.samples.front().x - guiding.samples.front().x).norm() < 1e-12, op,
          "trajectories must share x0");
  for (std::size_t i = 0; i < orbit.samples.size(); ++i)
    require(std::abs(orbit.samples[i].t - guiding.samples[i].t) < 1e-12, op,
            "sample times differ");

  if (domain) {
    for (std::size_t i = 0; i < orbit.samples.size(); ++i) {
      if (domain->contains(orbit.samples[i].x)) continue;
      double t_exit = orbit.samples[i].t;
      if (i > 0)
        t_exit = detail::bisect_exit(
            [&](double t) { return !domain->contains(orbit.at(t).x); },
            orbit.samples[i - 1].t, orbit.samples[i].t, 1e-9);
      throw Error(ErrorCode::DomainExit, op,
                  "orbit leaves the annulus at t = " + std::to_string(t_exit), t_exit);
    }
  }

  DisplacementReport rep;
  rep.omega = omega;
  const Vec3 x0 = orbit.samples.front().x, v0 = orbit.samples.front().v;
  const double p0 = pressure_at(field, x0).p;
  rep.gyro_initial = gyro_part(field, x0, v0, omega);
  const double v0_sq = guiding.v0_sq, mu0 = guiding.mu0;

  auto sec = [&](double s) { return secular_integrand(field, guiding.at(s).x, v0_sq, mu0); };
  double sec_acc = 0.0;
  for (std::size_t i = 0; i < orbit.samples.size(); ++i) {
    const ParticleState& o = orbit.samples[i];
    const GuidingState& g = guiding.samples[i];
    if (i > 0) sec_acc += adaptive_simpson(sec, orbit.samples[i - 1].t, o.t, 1e-10, 1);
    const double p = pressure_at(field, o.x).p;
    const double gyro = gyro_part(field, g.x, o.v, omega) - rep.gyro_initial;
    const double secular = sec_acc / omega;
    rep.times.push_back(o.t);
    rep.p_series.push_back(p);
    rep.gyro_term.push_back(gyro);
    rep.secular_term.push_back(secular);
    rep.residual.push_back(p - p0 - gyro - secular);
  }
  if (orbit.integral.size() == orbit.samples.size()) rep.gyro_integral = orbit.integral;
  return rep;
}

/// Time average over [0, T] of the gyration part of the first-order term,
/// (1/T) int_0^T (b x v_w) . grad p / (|B| w) dt. The constant initial value
/// is left out: it does not average and would mask the faster decay.
inline double averaged_pressure_drift(const DisplacementReport& rep, double T) {
  constexpr const char* op = "diagnostics::averaged_pressure_drift";
  require(T >= 0.0 && T <= rep.times.back() + 1e-12, op, "T outside the report horizon");
  require(!rep.gyro_integral.empty(), op,
          "report carries no running gyro integral (integrate the orbit with gyro_integrand)");
  if (T == 0.0) return 0.0;
  auto it = std::lower_bound(rep.times.begin(), rep.times.end(), T - 1e-12);
  const std::size_t k = std::size_t(it - rep.times.begin());
  double I;
  if (k == 0 || std::abs(rep.times[k] - T) <= 1e-12) {
    I = rep.gyro_integral[k];
  } else {
    const double w = (T - rep.times[k - 1]) / (rep.times[k] - rep.times[k - 1]);
    I = (1 - w) * rep.gyro_integral[k - 1] + w * rep.gyro_integral[k];
  }
  return I / T;
}

/// max over the points of |(B x grad p) . grad(1/|B|)|
template <MagneticField F>
double isodynamic_defect(const F& field, const std::vector<Vec3>& points) {
  double m = 0.0;
  for (const Vec3& x : points) {
    const EquilibriumSample e = equilibrium_sample(field, x);
    m = std::max(m, std::abs(e.base.B.cross(e.grad_p).dot(e.base.grad_inv_mag)));
  }
  return m;
}

struct ConfinementResult {
  /// first time with r(x_w(t)) > r_exit; empty when censored
  std::optional<double> tau;
  bool censored = false;
  double horizon = 0.0;
};

/// First exit time from r <= r_exit, bisected on the dense output (or the
/// sample interpolant) to 1e-9.
inline ConfinementResult confinement_time(const OrbitTrajectory& orbit, double r_exit) {
  require(r_exit > 0.0, "diagnostics::confinement_time", "r_exit must be positive");
  ConfinementResult res;
  res.horizon = orbit.horizon();
  auto outside = [&](double t) { return cylindrical_radius(orbit.at(t).x) > r_exit; };
  if (cylindrical_radius(orbit.samples.front().x) > r_exit) {
    res.tau = 0.0;
    return res;
  }
  auto scan = [&](double a, double b, int sub) -> std::optional<double> {
    double prev = a;
    for (int j = 1; j <= sub; ++j) {
      const double t = a + (b - a) * j / sub;
      if (outside(t)) return detail::bisect_exit(outside, prev, t, 1e-9);
      prev = t;
    }
    return std::nullopt;
  };
  if (orbit.dense) {
    for (const auto& st : orbit.dense->steps())
      if (auto t = scan(st.t0, st.t1, 8)) {
        res.tau = *t;
        return res;
      }
  } else {
    for (std::size_t i = 1; i < orbit.samples.size(); ++i)
      if (auto t = scan(orbit.samples[i - 1].t, orbit.samples[i].t, 8)) {
        res.tau = *t;
        return res;
      }
  }
  res.censored = true;
  return res;
}

}  // namespace gyrolimit
