#pragma once

// Full-orbit Lorentz motion x'' = omega x' x B(x), the zero-order limit
// system x' = h b(x), h' = mu0 |B(x)| div b(x), and the uniform-field helix.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gyrolimit/fields.hpp"
#include "gyrolimit/ode.hpp"

namespace gyrolimit {

struct ParticleState {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct GuidingState {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  double h = 0.0;
  double mu0 = 0.0;
  double v0_sq = 0.0;
};

struct TrajectoryMeta {
  std::optional<double> omega;
  std::string field;
  std::string method;
  double tol = 0.0;
  double dt = 0.0;  // Boris only
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
  /// max | |v(t)| - |v0| | over accepted steps (full orbit)
  double max_speed_drift = 0.0;
  /// max | h^2 + 2 mu0 |B| - |v0|^2 | over accepted steps (limit system)
  double max_invariant_drift = 0.0;
  /// limit-system times where h changes sign
  std::vector<double> bounce_times;
};

/// Uniform output grid of n points covering [0, T].
inline std::vector<double> uniform_grid(double T, int n) {
  require(n >= 2, "integrators::uniform_grid", "need at least two grid points");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = T * i / (n - 1);
  t.back() = T;
  return t;
}

class OrbitTrajectory {
 public:
  std::vector<ParticleState> samples;
  /// v' at each sample
  std::vector<Vec3> accel;
  /// running integral of the optional integrand, one value per sample
  std::vector<double> integral;
  TrajectoryMeta meta;
  std::optional<DenseSolution<6>> dense;

  double horizon() const { return samples.back().t; }

  /// State at time t: from the step interpolants when kept, otherwise cubic
  /// Hermite between stored samples.
  ParticleState at(double t) const {
    if (dense) {
      const StateVec<6> y = (*dense)(t);
      return {t, y.head<3>(), y.tail<3>()};
    }
    const std::size_t k = bracket(t);
    const ParticleState& a = samples[k];
    const ParticleState& b = samples[k + 1];
    ParticleState out;
    out.t = t;
    out.x = hermite(a.t, b.t, a.x, a.v, b.x, b.v, t);
    out.v = hermite(a.t, b.t, a.v, accel[k], b.v, accel[k + 1], t);
    return out;
  }

 private:
  std::size_t bracket(double t) const {
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const ParticleState& s) { return v < s.t; });
    std::size_t k = it == samples.begin() ? 0 : std::size_t(it - samples.begin()) - 1;
    return std::min(k, samples.size() - 2);
  }
};

class GuidingTrajectory {
 public:
  std::vector<GuidingState> samples;
  /// (x', h') at each sample
  std::vector<Vec3> xdot;
  std::vector<double> hdot;
  TrajectoryMeta meta;
  std::optional<DenseSolution<4>> dense;
  double mu0 = 0.0;
  double v0_sq = 0.0;
  double h0 = 0.0;

  double horizon() const { return samples.back().t; }

  GuidingState at(double t) const {
    if (dense) {
      const StateVec<4> y = (*dense)(t);
      return {t, y.head<3>(), y[3], mu0, v0_sq};
    }
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const GuidingState& s) { return v < s.t; });
    std::size_t k = it == samples.begin() ? 0 : std::size_t(it - samples.begin()) - 1;
    k = std::min(k, samples.size() - 2);
    const GuidingState& a = samples[k];
    const GuidingState& b = samples[k + 1];
    GuidingState out{t, hermite(a.t, b.t, a.x, xdot[k], b.x, xdot[k + 1], t),
                     hermite(a.t, b.t, a.h, hdot[k], b.h, hdot[k + 1], t), mu0, v0_sq};
    return out;
  }
};

// ---------------------------------------------------------------------------

/// Closed-form orbit in B = (0, 0, 1).
inline Vec3 helix_exact(const Vec3& x0, const Vec3& v0, double omega, double t) {
  require(omega != 0.0, "integrators::helix_exact", "omega must be non-zero");
  const double s = std::sin(omega * t), c = std::cos(omega * t);
  return {x0[0] + (v0[1] + v0[0] * s - v0[1] * c) / omega,
          x0[1] + (-v0[0] + v0[0] * c + v0[1] * s) / omega, x0[2] + t * v0[2]};
}

inline Vec3 helix_velocity(const Vec3& v0, double omega, double t) {
  const double s = std::sin(omega * t), c = std::cos(omega * t);
  return {v0[0] * c + v0[1] * s, -v0[0] * s + v0[1] * c, v0[2]};
}

/// One drift-kick-drift Boris step; the velocity update is a pure rotation.
template <MagneticField F>
ParticleState boris_step(const ParticleState& s, const F& field, double omega, double dt) {
  require(dt > 0.0, "integrators::boris_step", "dt must be positive");
  const Vec3 x_half = s.x + 0.5 * dt * s.v;
  const Vec3 B = field.value(x_half);
  if (!(B.norm() >= kZeroFieldThreshold))
    throw Error(ErrorCode::ZeroField, "integrators::boris_step", "field vanishes", s.t);
  const Vec3 tv = (0.5 * omega * dt) * B;
  const Vec3 sv = (2.0 / (1.0 + tv.squaredNorm())) * tv;
  const Vec3 vp = s.v + s.v.cross(tv);
  const Vec3 v_new = s.v + vp.cross(sv);
  return {s.t + dt, x_half + 0.5 * dt * v_new, v_new};
}

struct OrbitOptions {
  int samples = 512;
  bool keep_dense = false;
  bool check_speed_bound = true;
  double max_step = std::numeric_limits<double>::infinity();
  /// accepted plus rejected step budget; exhausting it raises StepSizeUnderflow
  long max_steps = 200'000'000;
  /// optional g(t, x, v) whose running integral is recorded per sample
  std::function<double(double, const Vec3&, const Vec3&)> integrand;
};

namespace detail {

template <MagneticField F>
Vec3 lorentz_accel(const F& field, double omega, const Vec3& x, const Vec3& v,
                   const char* op) {
  const Vec3 B = field.value(x);
  if (!(B.norm() >= kZeroFieldThreshold))
    throw Error(ErrorCode::ZeroField, op, "field vanishes along the orbit");
  return omega * v.cross(B);
}

inline void check_speed_bound(const OrbitTrajectory& tr, const char* op) {
  const ParticleState& s0 = tr.samples.front();
  const double v0 = s0.v.norm();
  for (const auto& s : tr.samples) {
    const double d = (s.x - s0.x).norm();
    if (d > v0 * s.t * (1.0 + 1e-6) + 1e-12)
      throw Error(ErrorCode::InvalidArgument, op,
                  "orbit violates |x(t) - x0| <= |v0| t", s.t);
  }
}

}  // namespace detail

/// Adaptive DOP853 integration of the Lorentz system on [0, T]. Negative
/// omega is integrated directly; the ODE is the time reversal of the
/// positive case with the initial velocity reflected.
template <MagneticField F>
OrbitTrajectory integrate_orbit(const F& field, const Vec3& x0, const Vec3& v0, double omega,
                                double T, double tol, const OrbitOptions& opt = {}) {
  constexpr const char* op = "integrators::integrate_orbit";
  require(omega != 0.0 && std::isfinite(omega), op, "omega must be finite and non-zero");
  require(T > 0.0 && std::isfinite(T), op, "horizon must be positive");
  require(tol > 1e-13 && tol < 1e-3, op, "tol must lie in (1e-13, 1e-3)");
  require(all_finite(x0) && all_finite(v0), op, "initial data must be finite");

  OrbitTrajectory tr;
  tr.meta.omega = omega;
  tr.meta.field = field.name();
  tr.meta.method = "dop853";
  tr.meta.tol = tol;
  const std::vector<double> grid = uniform_grid(T, opt.samples);
  tr.samples.reserve(grid.size());
  tr.accel.reserve(grid.size());
  if (opt.keep_dense) tr.dense.emplace();

  auto rhs = [&](double, const StateVec<6>& y) {
    StateVec<6> d;
    const Vec3 v = y.tail<3>();
    d.head<3>() = v;
    d.tail<3>() = detail::lorentz_accel(field, omega, y.head<3>(), v, op);
    return d;
  };

  const double speed0 = v0.norm();
  StateVec<6> y0;
  y0 << x0, v0;
  std::size_t next = 0;
  double running = 0.0;
  auto record = [&](double t, const StateVec<6>& y, double integral) {
    const Vec3 x = y.head<3>(), v = y.tail<3>();
    tr.samples.push_back({t, x, v});
    tr.accel.push_back(detail::lorentz_accel(field, omega, x, v, op));
    if (opt.integrand) tr.integral.push_back(integral);
  };
  record(0.0, y0, 0.0);
  next = 1;

  auto observer = [&](const StepInterpolant<6>& st) {
    auto g = [&](double t) {
      const StateVec<6> y = st(t);
      return opt.integrand(t, y.head<3>(), y.tail<3>());
    };
    while (next < grid.size() && grid[next] <= st.t1) {
      const double tg = grid[next];
      const StateVec<6> y = (next + 1 == grid.size()) ? st.y1 : st(tg);
      const double acc = opt.integrand ? running + gauss8(g, st.t0, tg) : 0.0;
      record(tg, y, acc);
      ++next;
    }
    if (opt.integrand) running += gauss8(g, st.t0, st.t1);
    tr.meta.max_speed_drift =
        std::max(tr.meta.max_speed_drift, std::abs(st.y1.tail<3>().norm() - speed0));
    if (tr.dense) tr.dense->push(st);
  };

  OdeOptions oo;
  oo.tol = tol;
  oo.max_step = opt.max_step;
  oo.max_steps = opt.max_steps;
  const OdeStats stats = integrate_dop853<6>(rhs, 0.0, y0, T, oo, observer, op);
  tr.meta.accepted = stats.accepted;
  tr.meta.rejected = stats.rejected;
  tr.meta.evaluations = stats.evaluations;
  if (opt.check_speed_bound) detail::check_speed_bound(tr, op);
  return tr;
}

/// Fixed-step Boris integration on [0, T]; dt is shrunk so that it divides T.
template <MagneticField F>
OrbitTrajectory integrate_boris(const F& field, const Vec3& x0, const Vec3& v0, double omega,
                                double T, double dt, int samples = 512) {
  constexpr const char* op = "integrators::integrate_boris";
  require(omega != 0.0 && std::isfinite(omega), op, "omega must be finite and non-zero");
  require(T > 0.0 && dt > 0.0, op, "horizon and dt must be positive");
  const long n = std::max(1L, long(std::ceil(T / dt)));
  const double h = T / n;
  OrbitTrajectory tr;
  tr.meta.omega = omega;
  tr.meta.field = field.name();
  tr.meta.method = "boris";
  tr.meta.dt = h;
  const std::vector<double> grid = uniform_grid(T, samples);
  ParticleState s{0.0, x0, v0};
  tr.samples.push_back(s);
  tr.accel.push_back(detail::lorentz_accel(field, omega, x0, v0, op));
  std::size_t next = 1;
  const double speed0 = v0.norm();
  for (long k = 0; k < n; ++k) {
    ParticleState s1 = boris_step(s, field, omega, h);
    s1.t = (k + 1 == n) ? T : (k + 1) * h;
    const Vec3 a0 = detail::lorentz_accel(field, omega, s.x, s.v, op);
    const Vec3 a1 = detail::lorentz_accel(field, omega, s1.x, s1.v, op);
    while (next < grid.size() && grid[next] <= s1.t) {
      const double tg = grid[next];
      ParticleState q{tg, hermite(s.t, s1.t, s.x, s.v, s1.x, s1.v, tg),
                      hermite(s.t, s1.t, s.v, a0, s1.v, a1, tg)};
      if (next + 1 == grid.size()) q = s1;
      tr.samples.push_back(q);
      tr.accel.push_back(detail::lorentz_accel(field, omega, q.x, q.v, op));
      ++next;
    }
    tr.meta.max_speed_drift = std::max(tr.meta.max_speed_drift, std::abs(s1.v.norm() - speed0));
    s = s1;
  }
  tr.meta.accepted = n;
  return tr;
}

/// Full orbit with the default policy: adaptive RK, or Boris with
/// dt = 2 pi / (64 |omega|) when the adaptive step underflows.
template <MagneticField F>
OrbitTrajectory integrate_orbit_robust(const F& field, const Vec3& x0, const Vec3& v0,
                                       double omega, double T, double tol,
                                       const OrbitOptions& opt = {}) {
  try {
    return integrate_orbit(field, x0, v0, omega, T, tol, opt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StepSizeUnderflow) throw;
  }
  return integrate_boris(field, x0, v0, omega, T, 2.0 * M_PI / (64.0 * std::abs(omega)),
                         opt.samples);
}

// ---------------------------------------------------------------------------

struct GuidingOptions {
  int samples = 512;
  bool keep_dense = true;
  double max_step = std::numeric_limits<double>::infinity();
};

/// Limit-system rates (x', h') at a state.
template <MagneticField F>
std::pair<Vec3, double> guiding_rates(const F& field, const Vec3& x, double h, double mu0) {
  const FieldSample s = sample(field, x);
  return {h * s.b, mu0 * s.mag * s.div_b};
}

template <MagneticField F>
GuidingTrajectory integrate_guiding(const F& field, const Vec3& x0, const Vec3& v0, double T,
                                    double tol, const GuidingOptions& opt = {}) {
  constexpr const char* op = "integrators::integrate_guiding";
  require(T > 0.0 && std::isfinite(T), op, "horizon must be positive");
  require(tol > 1e-13 && tol < 1e-3, op, "tol must lie in (1e-13, 1e-3)");
  require(all_finite(x0) && all_finite(v0), op, "initial data must be finite");

  GuidingTrajectory tr;
  const FieldSample s0 = sample(field, x0);
  tr.v0_sq = v0.squaredNorm();
  tr.h0 = v0.dot(s0.b);
  tr.mu0 = std::max(0.0, tr.v0_sq - tr.h0 * tr.h0) / (2.0 * s0.mag);
  tr.meta.field = field.name();
  tr.meta.method = "dop853";
  tr.meta.tol = tol;
  const double mu0 = tr.mu0, v0_sq = tr.v0_sq;
  if (opt.keep_dense) tr.dense.emplace();

  auto rhs = [&](double, const StateVec<4>& y) {
    const auto [xd, hd] = guiding_rates(field, Vec3(y.head<3>()), y[3], mu0);
    StateVec<4> d;
    d << xd, hd;
    return d;
  };
  auto invariant = [&](const StateVec<4>& y) {
    return std::abs(y[3] * y[3] + 2.0 * mu0 * field.value(y.head<3>()).norm() - v0_sq);
  };

  const std::vector<double> grid = uniform_grid(T, opt.samples);
  auto record = [&](double t, const StateVec<4>& y) {
    const Vec3 x = y.head<3>();
    tr.samples.push_back({t, x, y[3], mu0, v0_sq});
    const auto [xd, hd] = guiding_rates(field, x, y[3], mu0);
    tr.xdot.push_back(xd);
    tr.hdot.push_back(hd);
  };
  StateVec<4> y0;
  y0 << x0, tr.h0;
  record(0.0, y0);
  std::size_t next = 1;

  auto observer = [&](const StepInterpolant<4>& st) {
    while (next < grid.size() && grid[next] <= st.t1) {
      record(grid[next], next + 1 == grid.size() ? st.y1 : st(grid[next]));
      ++next;
    }
    tr.meta.max_invariant_drift = std::max(tr.meta.max_invariant_drift, invariant(st.y1));
    if (st.y0[3] != 0.0 && st.y0[3] * st.y1[3] < 0.0) {
      double a = st.t0, b = st.t1;
      for (int it = 0; it < 100 && b - a > 1e-14 * (1.0 + std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        if (st(m)[3] * st.y0[3] > 0.0) a = m; else b = m;
      }
      tr.meta.bounce_times.push_back(0.5 * (a + b));
    }
    if (tr.dense) tr.dense->push(st);
  };

  OdeOptions oo;
  oo.tol = tol;
  oo.max_step = opt.max_step;
  const OdeStats stats = integrate_dop853<4>(rhs, 0.0, y0, T, oo, observer, op);
  tr.meta.accepted = stats.accepted;
  tr.meta.rejected = stats.rejected;
  tr.meta.evaluations = stats.evaluations;
  for (const auto& s : tr.samples)
    tr.meta.max_invariant_drift = std::max(
        tr.meta.max_invariant_drift,
        std::abs(s.h * s.h + 2.0 * mu0 * field.value(s.x).norm() - v0_sq));
  return tr;
}

struct SecondOrderResidual {
  double max_residual = 0.0;
  /// max over samples of the terms' magnitude, at least 1
  double scale = 1.0;
};

/// Compares x'' obtained by differentiating x' = h b(x) along the trajectory
/// with the second-order form mu0 |B| div(b) b + (|v0|^2 - 2 mu0 |B|) Db b.
template <MagneticField F>
SecondOrderResidual guiding_second_order_residual(const F& field, const GuidingTrajectory& tr) {
  SecondOrderResidual out;
  for (const auto& g : tr.samples) {
    const FieldSample s = sample(field, g.x);
    const Vec3 xd = g.h * s.b;
    // h' from the energy form (|v0|^2 - h^2)/2 div b
    const double hd = 0.5 * (tr.v0_sq - g.h * g.h) * s.div_b;
    const Vec3 xdd = hd * s.b + g.h * (s.jac_b * xd);
    const Vec3 rhs = tr.mu0 * s.mag * s.div_b * s.b +
                     (tr.v0_sq - 2.0 * tr.mu0 * s.mag) * (s.jac_b * s.b);
    out.max_residual = std::max(out.max_residual, (xdd - rhs).norm());
    out.scale = std::max(out.scale, tr.v0_sq * (s.jac_b.norm() + std::abs(s.div_b)));
  }
  return out;
}

}  // namespace gyrolimit
