#pragma once

// Multi-run studies: convergence of the full orbit to the limit trajectory,
// moment drift, the bump-column z-drift, and the resonant-surface
// quadrature identities on synthetic Boozer data.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gyrolimit/diagnostics.hpp"
#include "gyrolimit/fit.hpp"
#include "gyrolimit/parallel.hpp"
#include "gyrolimit/quadrature.hpp"

namespace gyrolimit {

struct StudyReport {
  std::string field;
  std::vector<double> omegas;
  std::vector<double> errors;
  /// integrator actually used per omega ("dop853" or "boris")
  std::vector<std::string> methods;
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;
  double T = 0.0;
  double tol = 0.0;
  Vec3 x0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
};

/// Reference tolerance for the limit trajectory in all studies.
inline constexpr double kReferenceTol = 1e-12;
inline constexpr int kStudyGrid = 512;

namespace detail {

inline void check_sweep(const std::vector<double>& omegas, std::size_t min_count,
                        double min_decades, const char* op) {
  require(omegas.size() >= min_count, op,
          "need at least " + std::to_string(min_count) + " omega values");
  for (std::size_t i = 1; i < omegas.size(); ++i)
    require(omegas[i] > omegas[i - 1], op, "omegas must be strictly increasing");
  require(omegas.front() > 0.0, op, "omegas must be positive");
  require(std::log10(omegas.back() / omegas.front()) >= min_decades - 1e-9, op,
          "omega sweep must span " + std::to_string(min_decades) + " decades");
}

inline void fit_into(StudyReport& rep, double floor, const char* op) {
  for (std::size_t i = 0; i < rep.errors.size(); ++i)
    if (!(rep.errors[i] >= floor))
      throw Error(ErrorCode::FitDegenerate, op,
                  "error " + std::to_string(rep.errors[i]) + " at omega = " +
                      std::to_string(rep.omegas[i]) + " is below the noise floor");
  const LogLogFit fit = fit_loglog(rep.omegas, rep.errors);
  rep.slope = fit.slope;
  rep.intercept = fit.intercept;
  rep.fit_residual = fit.residual;
}

}  // namespace detail

/// sup over a 512-point grid of |x_w(t) - x(t)| per omega, with a log-log fit.
template <MagneticField F>
StudyReport convergence_study(const F& field, const Vec3& x0, const Vec3& v0,
                              const std::vector<double>& omegas, double T, double tol,
                              unsigned threads = 1) {
  constexpr const char* op = "analysis::convergence_study";
  detail::check_sweep(omegas, 4, 2.0, op);
  const GuidingTrajectory ref = integrate_guiding(field, x0, v0, T, kReferenceTol,
                                                  GuidingOptions{kStudyGrid, false});
  StudyReport rep;
  rep.field = field.name();
  rep.omegas = omegas;
  rep.T = T;
  rep.tol = tol;
  rep.x0 = x0;
  rep.v0 = v0;
  OrbitOptions oo;
  oo.samples = kStudyGrid;
  auto runs = parallel_map(omegas.size(), threads, [&](std::size_t i) {
    const OrbitTrajectory tr = integrate_orbit_robust(field, x0, v0, omegas[i], T, tol, oo);
    double e = 0.0;
    for (std::size_t k = 0; k < tr.samples.size(); ++k)
      e = std::max(e, (tr.samples[k].x - ref.samples[k].x).norm());
    return std::pair<double, std::string>(e, tr.meta.method);
  });
  for (auto& [e, m] : runs) {
    rep.errors.push_back(e);
    rep.methods.push_back(m);
  }
  detail::fit_into(rep, 10.0 * tol, op);
  return rep;
}

/// Adiabatic moment drift max_t |mu_w(t) - mu_w(0)| per omega, with a fit.
template <MagneticField F>
StudyReport moment_study(const F& field, const Vec3& x0, const Vec3& v0,
                         const std::vector<double>& omegas, double T, double tol,
                         unsigned threads = 1) {
  constexpr const char* op = "analysis::moment_study";
  detail::check_sweep(omegas, 2, 0.0, op);
  StudyReport rep;
  rep.field = field.name();
  rep.omegas = omegas;
  rep.T = T;
  rep.tol = tol;
  rep.x0 = x0;
  rep.v0 = v0;
  OrbitOptions oo;
  oo.samples = kStudyGrid;
  auto runs = parallel_map(omegas.size(), threads, [&](std::size_t i) {
    const OrbitTrajectory tr = integrate_orbit_robust(field, x0, v0, omegas[i], T, tol, oo);
    return std::pair<double, std::string>(moment_series(tr, field).max_drift, tr.meta.method);
  });
  for (auto& [e, m] : runs) {
    rep.errors.push_back(e);
    rep.methods.push_back(m);
  }
  detail::fit_into(rep, 10.0 * tol, op);
  return rep;
}

struct HolderModeEntry {
  double omega = 0.0;
  /// sup_t |x_w(t) - x(t)|
  double position_error = 0.0;
  /// sup_t |v_w(t) - x'(t)| with x' = h b(x)
  double velocity_error = 0.0;
  /// sup_t |v_w(t) . b(x_w(t)) - h(t)|
  double parallel_error = 0.0;
  /// mean over the grid of |v_perp_w(t)|
  double perp_speed = 0.0;
};

struct HolderModeReport {
  HolderModeEntry low;
  HolderModeEntry high;
  double perp_speed_initial = 0.0;
  double position_shrink() const { return low.position_error / high.position_error; }
  double perp_persistence() const { return high.perp_speed / low.perp_speed; }
};

/// Positions converge while velocities keep their gyration: compares both
/// at two values of omega.
template <MagneticField F>
HolderModeReport holder_mode_check(const F& field, const Vec3& x0, const Vec3& v0,
                                   std::pair<double, double> omega_pair, double T,
                                   double tol = 1e-10) {
  constexpr const char* op = "analysis::holder_mode_check";
  const FieldSample s0 = sample(field, x0);
  const double vperp0 = split_velocity(v0, s0.b).v_perp.norm();
  require(vperp0 > 1e-12 * std::max(1.0, v0.norm()), op, "v0 must not be parallel to b(x0)");
  require(omega_pair.first > 0.0 && omega_pair.second > omega_pair.first, op,
          "omega pair must be increasing and positive");
  const GuidingTrajectory ref = integrate_guiding(field, x0, v0, T, kReferenceTol,
                                                  GuidingOptions{kStudyGrid, false});
  auto entry = [&](double omega) {
    OrbitOptions oo;
    oo.samples = kStudyGrid;
    const OrbitTrajectory tr = integrate_orbit_robust(field, x0, v0, omega, T, tol, oo);
    HolderModeEntry e;
    e.omega = omega;
    double acc = 0.0;
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      const auto& o = tr.samples[k];
      const auto& g = ref.samples[k];
      const FieldSample so = sample(field, o.x);
      e.position_error = std::max(e.position_error, (o.x - g.x).norm());
      e.velocity_error = std::max(e.velocity_error, (o.v - ref.xdot[k]).norm());
      const VelocitySplit sp = split_velocity(o.v, so.b);
      e.parallel_error = std::max(e.parallel_error, std::abs(sp.h - g.h));
      acc += sp.v_perp.norm();
    }
    e.perp_speed = acc / tr.samples.size();
    return e;
  };
  HolderModeReport rep;
  rep.perp_speed_initial = vperp0;
  rep.low = entry(omega_pair.first);
  rep.high = entry(omega_pair.second);
  return rep;
}

// ---------------------------------------------------------------------------

struct ZDriftRun {
  double omega = 0.0;
  double phi_dot0 = 0.0;
  double T = 0.0;
  /// max_t |x3(t) - x3(0)| on [0, T] and on [0, T/2]
  double drift = 0.0;
  double drift_half = 0.0;
  double min_radius = 0.0;
};

struct ZDriftReport {
  StudyReport study;
  std::vector<ZDriftRun> runs;
  /// drift(T) / drift(T/2), expected 2
  double time_ratio = 0.0;
  /// drift(w) / drift(2w), expected 2
  double omega_ratio = 0.0;
  /// drift(2 phi_dot0) / drift(phi_dot0), expected 4
  double phi_ratio = 0.0;

  static bool within(double value, double expected, double rel) {
    return std::abs(value / expected - 1.0) <= rel;
  }
  bool ratios_pass(double rel) const {
    return within(time_ratio, 2.0, rel) && within(omega_ratio, 2.0, rel) &&
           within(phi_ratio, 4.0, rel);
  }
};

/// Initial velocity r0 phi_dot0 e_theta + v_r e_r + v_z e_z at x0.
inline Vec3 cylindrical_velocity(const Vec3& x0, double phi_dot0, double v_r, double v_z) {
  const double r0 = cylindrical_radius(x0);
  const Vec3 er(x0[0] / r0, x0[1] / r0, 0.0);
  const Vec3 et(-er[1], er[0], 0.0);
  return r0 * phi_dot0 * et + v_r * er + v_z * Vec3(0, 0, 1);
}

/// One bump-column orbit started outside the bump support, measuring its
/// axial excursion.
inline ZDriftRun z_drift_run(const BumpColumnField& field, const Vec3& x0, double phi_dot0,
                             double v_r, double v_z, double omega, double T, double tol) {
  constexpr const char* op = "analysis::z_drift_study";
  OrbitOptions oo;
  oo.samples = kStudyGrid;
  const Vec3 v0 = cylindrical_velocity(x0, phi_dot0, v_r, v_z);
  const OrbitTrajectory tr = integrate_orbit_robust(field, x0, v0, omega, T, tol, oo);
  ZDriftRun run;
  run.omega = omega;
  run.phi_dot0 = phi_dot0;
  run.T = T;
  run.min_radius = std::numeric_limits<double>::infinity();
  for (const auto& s : tr.samples) {
    const double r = cylindrical_radius(s.x);
    run.min_radius = std::min(run.min_radius, r);
    if (r < 1.0)
      throw Error(ErrorCode::DomainViolation, op,
                  "orbit enters r < 1 at t = " + std::to_string(s.t), s.t);
    const double dz = std::abs(s.x[2] - x0[2]);
    run.drift = std::max(run.drift, dz);
    if (s.t <= 0.5 * T + 1e-12) run.drift_half = std::max(run.drift_half, dz);
  }
  return run;
}

/// Axial drift study outside the bump support: slope in omega plus the
/// three ratio tests in t, omega and phi_dot0 (the latter two at the first
/// omega of the sweep).
inline ZDriftReport z_drift_study(double a0, const Vec3& x0, double phi_dot0,
                                  const std::vector<double>& omegas, double T,
                                  double tol = 1e-10, double v_r = 0.0, double v_z = 0.0,
                                  unsigned threads = 1) {
  constexpr const char* op = "analysis::z_drift_study";
  require(x0[0] * x0[0] + x0[1] * x0[1] > 1.0, op, "x0 must satisfy x1^2 + x2^2 > 1");
  require(phi_dot0 != 0.0, op, "phi_dot0 must be non-zero");
  detail::check_sweep(omegas, 2, 0.0, op);
  const BumpColumnField field(a0);
  ZDriftReport rep;
  rep.study.field = field.name();
  rep.study.omegas = omegas;
  rep.study.T = T;
  rep.study.tol = tol;
  rep.study.x0 = x0;
  rep.study.v0 = cylindrical_velocity(x0, phi_dot0, v_r, v_z);

  // sweep members, then (2 w0, phi) and (w0, 2 phi)
  std::vector<std::pair<double, double>> cases;
  for (double w : omegas) cases.emplace_back(w, phi_dot0);
  cases.emplace_back(2.0 * omegas.front(), phi_dot0);
  cases.emplace_back(omegas.front(), 2.0 * phi_dot0);
  rep.runs = parallel_map(cases.size(), threads, [&](std::size_t i) {
    return z_drift_run(field, x0, cases[i].second, v_r, v_z, cases[i].first, T, tol);
  });
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    rep.study.errors.push_back(rep.runs[i].drift);
    rep.study.methods.push_back("dop853");
  }
  detail::fit_into(rep.study, 10.0 * tol, op);
  const ZDriftRun& base = rep.runs.front();
  rep.time_ratio = base.drift / base.drift_half;
  rep.omega_ratio = base.drift / rep.runs[omegas.size()].drift;
  rep.phi_ratio = rep.runs[omegas.size() + 1].drift / base.drift;
  return rep;
}

// ---------------------------------------------------------------------------

/// Truncated Fourier series f(s) = mean + sum_k cos_k cos(k s) + sin_k sin(k s),
/// the |B| profile along the surface angle M phi + N theta.
struct FourierProfile {
  double mean = 1.0;
  std::vector<double> cos_coef;
  std::vector<double> sin_coef;

  double operator()(double s) const {
    double v = mean;
    for (std::size_t k = 0; k < cos_coef.size(); ++k) v += cos_coef[k] * std::cos((k + 1) * s);
    for (std::size_t k = 0; k < sin_coef.size(); ++k) v += sin_coef[k] * std::sin((k + 1) * s);
    return v;
  }
  double derivative(double s) const {
    double v = 0.0;
    for (std::size_t k = 0; k < cos_coef.size(); ++k)
      v -= (k + 1) * cos_coef[k] * std::sin((k + 1) * s);
    for (std::size_t k = 0; k < sin_coef.size(); ++k)
      v += (k + 1) * sin_coef[k] * std::cos((k + 1) * s);
    return v;
  }
  /// minimum and maximum over one period, sampled finely
  std::pair<double, double> range() const {
    double lo = (*this)(0.0), hi = lo;
    for (int i = 1; i < 8192; ++i) {
      const double v = (*this)(2.0 * M_PI * i / 8192);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return {lo, hi};
  }
};

/// Surface data of a quasi-symmetric equilibrium in Boozer angles: the
/// constant coefficients of eta = alpha d_phi + beta d_theta and
/// xi = a d_phi + c d_theta, the helicity (M, N) and |B| = f(M phi + N theta).
struct BoozerData {
  double alpha = 1.0;
  double beta = 0.0;
  double a = 0.0;
  double c = 1.0;
  int M = 1;
  int N = 0;
  FourierProfile f;
  double phi0 = 0.0;
  double theta0 = 0.0;

  double m() const { return alpha * M + beta * N; }
  double c0() const { return M * phi0 + N * theta0; }
  double helicity_coupling() const { return a * M + c * N; }

  void validate() const {
    constexpr const char* op = "analysis::boozer_data";
    require(M != 0 || N != 0, op, "(M, N) must not both vanish");
    require(f.range().first > 0.0, op, "|B| profile must be positive");
    if (m() == 0.0)
      require(helicity_coupling() != 0.0, op,
              "aM + cN must be non-zero on a resonant surface");
  }
};

struct Thm6Params {
  double v0_sq = 0.0;
  double mu0 = 0.0;
};

/// F(s) = sqrt(v0^2 - 2 mu0 s)/s - sqrt(v0^2 - 2 mu0 B0)/B0
inline double thm6_F(double sigma, double v0_sq, double mu0, double B0) {
  return std::sqrt(v0_sq - 2.0 * mu0 * sigma) / sigma -
         std::sqrt(v0_sq - 2.0 * mu0 * B0) / B0;
}

/// F'(s) = (mu0 s - v0^2) / (sqrt(v0^2 - 2 mu0 s) s^2)
inline double thm6_F_prime(double sigma, double v0_sq, double mu0) {
  return (mu0 * sigma - v0_sq) / (std::sqrt(v0_sq - 2.0 * mu0 * sigma) * sigma * sigma);
}

/// int_{B0}^{sigma} F'(s) ds by adaptive Simpson. With mu0 > 0 the variable
/// w = sqrt(v0^2 - 2 mu0 s) removes the square-root endpoint singularity at
/// s = v0^2 / (2 mu0).
inline double thm6_F_quadrature(double sigma, double v0_sq, double mu0, double B0,
                                double tol = 1e-13) {
  if (mu0 == 0.0)
    return adaptive_simpson([&](double s) { return thm6_F_prime(s, v0_sq, mu0); }, B0, sigma,
                            tol);
  // s = (v0^2 - w^2) / (2 mu0), F'(s) ds = (v0^2 - mu0 s) / (mu0 s^2) dw
  auto g = [&](double w) {
    const double s = (v0_sq - w * w) / (2.0 * mu0);
    return (v0_sq - mu0 * s) / (mu0 * s * s);
  };
  const double w0 = std::sqrt(std::max(0.0, v0_sq - 2.0 * mu0 * B0));
  const double w1 = std::sqrt(std::max(0.0, v0_sq - 2.0 * mu0 * sigma));
  return adaptive_simpson(g, w0, w1, tol);
}

namespace detail {

inline void check_passing(const BoozerData& bd, const Thm6Params& p, const char* op) {
  const auto [lo, hi] = bd.f.range();
  if (!(p.v0_sq - 2.0 * p.mu0 * hi > 0.0))
    throw Error(ErrorCode::PassingViolated, op,
                "v0^2 - 2 mu0 |B| reaches " + std::to_string(p.v0_sq - 2.0 * p.mu0 * hi) +
                    " on the surface");
  (void)lo;
}

/// rho(t) for rho' = sign f(m rho + c0) sqrt(v0^2 - 2 mu0 f(m rho + c0)), rho(0) = 0,
/// on the given (non-negative, increasing) times.
inline std::vector<double> solve_rho(const BoozerData& bd, const Thm6Params& p, double sign,
                                     const std::vector<double>& times, double tol = 1e-13) {
  const double m = bd.m(), c0 = bd.c0();
  std::vector<double> out;
  out.reserve(times.size());
  if (times.empty()) return out;
  auto rhs = [&](double, const StateVec<1>& y) {
    const double fv = bd.f(m * y[0] + c0);
    StateVec<1> d;
    d[0] = sign * fv * std::sqrt(p.v0_sq - 2.0 * p.mu0 * fv);
    return d;
  };
  std::size_t next = 0;
  while (next < times.size() && times[next] <= 0.0) {
    out.push_back(0.0);
    ++next;
  }
  if (next == times.size()) return out;
  OdeOptions oo;
  oo.tol = tol;
  StateVec<1> y0;
  y0[0] = 0.0;
  integrate_dop853<1>(
      rhs, 0.0, y0, times.back(), oo,
      [&](const StepInterpolant<1>& st) {
        while (next < times.size() && times[next] <= st.t1) {
          out.push_back(next + 1 == times.size() ? st.y1[0] : st(times[next])[0]);
          ++next;
        }
      },
      "analysis::solve_rho");
  return out;
}

}  // namespace detail

struct Thm6Point {
  double t = 0.0;
  double rho = 0.0;
  /// closed-form drift sign(h0) (aM + cN)/m F(f(m rho + c0))
  double drift = 0.0;
  /// int_0^rho lambda'(m s + c0) ds and [lambda(m rho + c0) - lambda(c0)]/m
  double line_integral = 0.0;
  double line_closed = 0.0;
  /// F at f(m rho + c0): primitive and quadrature of F'
  double F_primitive = 0.0;
  double F_quadrature = 0.0;
  /// time-domain quadrature of the secular integrand in Boozer form
  double brute_force = 0.0;
};

struct Thm6Comparison {
  std::vector<Thm6Point> points;
  double max_discrepancy = 0.0;
  /// |aM + cN| / |m| * 2 |v0| / min f and the largest |drift| seen
  double envelope = 0.0;
  double max_abs_drift = 0.0;
};

/// Secular integrand of the displacement expansion expressed in Boozer data,
/// -(v0^2/f(u) - mu0)(aM + cN) f'(u).
inline double boozer_secular_integrand(const BoozerData& bd, const Thm6Params& p, double u) {
  return -(p.v0_sq / bd.f(u) - p.mu0) * bd.helicity_coupling() * bd.f.derivative(u);
}

inline Thm6Comparison thm6_closed_form_m_nonzero(const BoozerData& bd, double v0_sq,
                                                 double mu0, double h0_sign,
                                                 const std::vector<double>& t_grid) {
  constexpr const char* op = "analysis::thm6_closed_form_m_nonzero";
  bd.validate();
  require(bd.m() != 0.0, op, "alpha M + beta N must be non-zero");
  require(h0_sign == 1.0 || h0_sign == -1.0, op, "h0_sign must be +1 or -1");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    require(t_grid[i] >= 0.0 && (i == 0 || t_grid[i] > t_grid[i - 1]), op,
            "t_grid must be non-negative and increasing");
  const Thm6Params p{v0_sq, mu0};
  detail::check_passing(bd, p, op);
  const double m = bd.m(), c0 = bd.c0(), B0 = bd.f(c0), K = bd.helicity_coupling();
  auto lambda = [&](double u) { return thm6_F(bd.f(u), v0_sq, mu0, B0); };
  auto lambda_prime = [&](double u) {
    return thm6_F_prime(bd.f(u), v0_sq, mu0) * bd.f.derivative(u);
  };

  const std::vector<double> rho = detail::solve_rho(bd, p, h0_sign, t_grid);
  Thm6Comparison out;
  out.envelope = std::abs(K) / std::abs(m) * 2.0 * std::sqrt(v0_sq) / bd.f.range().first;
  double brute_acc = 0.0, t_prev = 0.0, rho_prev = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    Thm6Point q;
    q.t = t_grid[i];
    q.rho = rho[i];
    const double u = m * q.rho + c0;
    q.drift = h0_sign * K / m * thm6_F(bd.f(u), v0_sq, mu0, B0);
    q.line_integral =
        adaptive_simpson([&](double s) { return lambda_prime(m * s + c0); }, 0.0, q.rho, 1e-13);
    q.line_closed = (lambda(u) - lambda(c0)) / m;
    q.F_primitive = thm6_F(bd.f(u), v0_sq, mu0, B0);
    q.F_quadrature = thm6_F_quadrature(bd.f(u), v0_sq, mu0, B0);
    // time-domain oracle: integrate the secular integrand along u(s) = m rho(s) + c0,
    // with rho(s) from the same ODE restarted on [t_prev, t]
    if (q.t > t_prev) {
      BoozerData shifted = bd;
      shifted.phi0 = bd.phi0 + bd.alpha * rho_prev;
      shifted.theta0 = bd.theta0 + bd.beta * rho_prev;
      const int sub = 64;
      std::vector<double> ts;
      for (int k = 0; k <= sub; ++k) ts.push_back((q.t - t_prev) * k / sub);
      const std::vector<double> rr = detail::solve_rho(shifted, p, h0_sign, ts);
      const double c0s = shifted.c0();
      // composite Simpson on the sub-grid, Richardson-corrected against the half grid
      auto simpson = [&](int stride) {
        const int n = sub / stride;
        const double h = (q.t - t_prev) / n;
        double acc = 0.0;
        for (int k = 0; k <= n; ++k) {
          const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
          acc += w * boozer_secular_integrand(bd, p, m * rr[k * stride] + c0s);
        }
        return acc * h / 3.0;
      };
      const double s1 = simpson(1), s2 = simpson(2);
      brute_acc += s1 + (s1 - s2) / 15.0;
      t_prev = q.t;
      rho_prev = q.rho;
    }
    q.brute_force = brute_acc;
    out.max_discrepancy = std::max({out.max_discrepancy, std::abs(q.line_integral - q.line_closed),
                                    std::abs(q.F_primitive - q.F_quadrature),
                                    std::abs(q.brute_force - q.drift)});
    out.max_abs_drift = std::max(out.max_abs_drift, std::abs(q.drift));
    out.points.push_back(q);
  }
  return out;
}

struct Thm6ResonantPoint {
  double t = 0.0;
  double rho = 0.0;
  double drift = 0.0;
  /// time-domain quadrature of the Boozer secular integrand
  double brute_force = 0.0;
};

struct Thm6ResonantReport {
  std::vector<Thm6ResonantPoint> points;
  /// drift per unit time
  double rate = 0.0;
  /// max_t |drift(t) - rate t|
  double linearity_deviation = 0.0;
  /// max_t |drift(t) - brute_force(t)|
  double brute_force_discrepancy = 0.0;
  bool vanishes = false;
};

inline Thm6ResonantReport thm6_resonant_m_zero(const BoozerData& bd, double v0_sq, double mu0,
                                               const std::vector<double>& t_grid) {
  constexpr const char* op = "analysis::thm6_resonant_m_zero";
  bd.validate();
  require(bd.m() == 0.0, op, "alpha M + beta N must vanish on a resonant surface");
  const Thm6Params p{v0_sq, mu0};
  detail::check_passing(bd, p, op);
  const double c0 = bd.c0();
  const double f0 = bd.f(c0), fp0 = bd.f.derivative(c0);
  const double speed = f0 * std::sqrt(v0_sq - 2.0 * mu0 * f0);
  const double K = bd.helicity_coupling();
  Thm6ResonantReport out;
  out.rate = K * speed * thm6_F_prime(f0, v0_sq, mu0) * fp0;
  for (double t : t_grid) {
    Thm6ResonantPoint q;
    q.t = t;
    q.rho = adaptive_simpson([&](double) { return speed; }, 0.0, t, 1e-14, 1);
    q.drift = K * q.rho * thm6_F_prime(f0, v0_sq, mu0) * fp0;
    // u(s) = c0 stays fixed on the resonant line
    q.brute_force =
        adaptive_simpson([&](double) { return boozer_secular_integrand(bd, p, c0); }, 0.0, t,
                         1e-14, 1);
    out.linearity_deviation = std::max(out.linearity_deviation, std::abs(q.drift - out.rate * t));
    out.brute_force_discrepancy =
        std::max(out.brute_force_discrepancy, std::abs(q.drift - q.brute_force));
    out.points.push_back(q);
  }
  out.vanishes = true;
  for (const auto& q : out.points)
    if (q.drift != 0.0) out.vanishes = false;
  return out;
}

struct RhoConsistency {
  double t = 0.0;
  double rho = 0.0;
  /// t recovered as int_0^rho du / (f sqrt(v0^2 - 2 mu0 f)) by adaptive
  /// and by fixed fine composite Simpson
  double t_adaptive = 0.0;
  double t_composite = 0.0;
  double residual = 0.0;
};

/// Cross-checks the field-line parameter rho(t) = int_0^t h |B| ds: rho from
/// its ODE, then the elapsed time recovered from rho by two quadratures.
inline RhoConsistency rho_consistency(const BoozerData& bd, double v0_sq, double mu0, double t) {
  constexpr const char* op = "analysis::rho_consistency";
  bd.validate();
  require(t >= 0.0, op, "t must be non-negative");
  const Thm6Params p{v0_sq, mu0};
  detail::check_passing(bd, p, op);
  RhoConsistency out;
  out.t = t;
  if (t == 0.0) return out;
  out.rho = detail::solve_rho(bd, p, 1.0, {t}).front();
  const double m = bd.m(), c0 = bd.c0();
  auto inv_speed = [&](double s) {
    const double fv = bd.f(m * s + c0);
    return 1.0 / (fv * std::sqrt(v0_sq - 2.0 * mu0 * fv));
  };
  out.t_adaptive = adaptive_simpson(inv_speed, 0.0, out.rho, 1e-13);
  out.t_composite = composite_simpson(inv_speed, 0.0, out.rho, 20000);
  out.residual = std::max({std::abs(out.t_adaptive - t), std::abs(out.t_composite - t),
                           std::abs(out.t_adaptive - out.t_composite)});
  return out;
}

// ---------------------------------------------------------------------------

struct ConfinementCase {
  Vec3 v0 = Vec3::Zero();
  double r_exit = 0.0;
  ConfinementResult base;
  ConfinementResult doubled;
  /// exit times with censored runs counted as +infinity
  double tau_base() const { return base.tau ? *base.tau : INFINITY; }
  double tau_doubled() const { return doubled.tau ? *doubled.tau : INFINITY; }
  bool non_decreasing() const { return tau_doubled() >= tau_base(); }
};

struct ConfinementTrend {
  double omega = 0.0;
  double T = 0.0;
  std::vector<ConfinementCase> cases;
  int non_decreasing() const {
    int k = 0;
    for (const auto& c : cases) k += c.non_decreasing();
    return k;
  }
};

/// Exit times at omega and 2 omega for `seeds` random initial velocity
/// directions of the given speed. The exit radius is r0 plus one gyroradius
/// |v_perp| / (omega |B(x0)|) at the base frequency.
template <MagneticField F>
ConfinementTrend confinement_trend(const F& field, const Vec3& x0, double omega, double T,
                                   int seeds, std::uint64_t seed, double speed = 1.0,
                                   double tol = 1e-10, unsigned threads = 1) {
  constexpr const char* op = "analysis::confinement_trend";
  require(seeds > 0 && omega > 0.0 && T > 0.0 && speed > 0.0, op, "invalid study parameters");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> velocities;
  for (int i = 0; i < seeds; ++i) {
    Vec3 d(gauss(rng), gauss(rng), gauss(rng));
    velocities.push_back(speed * d.normalized());
  }
  const FieldSample s0 = sample(field, x0);
  const double r0 = cylindrical_radius(x0);
  ConfinementTrend out;
  out.omega = omega;
  out.T = T;
  out.cases = parallel_map(velocities.size(), threads, [&](std::size_t i) {
    ConfinementCase c;
    c.v0 = velocities[i];
    const double vperp = split_velocity(c.v0, s0.b).v_perp.norm();
    c.r_exit = r0 + vperp / (omega * s0.mag);
    OrbitOptions oo;
    oo.keep_dense = true;
    c.base = confinement_time(integrate_orbit(field, x0, c.v0, omega, T, tol, oo), c.r_exit);
    c.doubled =
        confinement_time(integrate_orbit(field, x0, c.v0, 2.0 * omega, T, tol, oo), c.r_exit);
    return c;
  });
  return out;
}

}  // namespace gyrolimit
