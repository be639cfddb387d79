#pragma once

// Pointwise residuals of the unit-field vector-calculus identities used by
// the guiding-centre limit, plus seeded random sweeps over them.

#include <array>
#include <random>
#include <string>
#include <vector>

#include "gyrolimit/diagnostics.hpp"
#include "gyrolimit/fields.hpp"
#include "gyrolimit/integrators.hpp"

namespace gyrolimit {

struct IdentityResidual {
  std::string name;
  Vec3 point = Vec3::Zero();
  Vec3 vec = Vec3::Zero();
  /// raw max-abs defect
  double residual = 0.0;
  /// conditioning scale of the identity's terms at this point
  double scale = 1.0;

  double scaled() const { return residual / scale; }
};

namespace detail {
inline double positive_or_one(double s) { return s > 0.0 ? s : 1.0; }
}  // namespace detail

/// v^T Db v + (v x b)^T Db (v x b) = div b (|v|^2 - (v.b)^2) - (v.b)(v x b).curl b
template <MagneticField F>
IdentityResidual lemma_quadratic_form(const F& field, const Vec3& x, const Vec3& v) {
  const FieldSample s = sample(field, x);
  const Vec3 w = v.cross(s.b);
  const double vb = v.dot(s.b);
  const double lhs = v.dot(s.jac_b * v) + w.dot(s.jac_b * w);
  const double rhs = s.div_b * (v.squaredNorm() - vb * vb) - vb * w.dot(s.curl_b);
  return {"lemma_quadratic_form", x, v, std::abs(lhs - rhs),
          detail::positive_or_one((1.0 + v.squaredNorm()) * s.jac_b.norm())};
}

/// (Db (v x b)) x (v x b) = [(b.v)(v.curl b) - |v|^2 (b.curl b) - (Db v).(v x b)] b
template <MagneticField F>
IdentityResidual lemma_cross_projection(const F& field, const Vec3& x, const Vec3& v) {
  const FieldSample s = sample(field, x);
  const Vec3 w = v.cross(s.b);
  const Vec3 lhs = (s.jac_b * w).cross(w);
  const double coef = s.b.dot(v) * v.dot(s.curl_b) - v.squaredNorm() * s.b.dot(s.curl_b) -
                      (s.jac_b * v).dot(w);
  const Vec3 rhs = coef * s.b;
  return {"lemma_cross_projection", x, v, (lhs - rhs).cwiseAbs().maxCoeff(),
          detail::positive_or_one((1.0 + v.squaredNorm()) * s.jac_b.norm())};
}

/// div b = B . grad(1/|B|) for divergence-free B
template <MagneticField F>
IdentityResidual div_b_product_rule(const F& field, const Vec3& x) {
  const FieldSample s = sample(field, x);
  return {"div_b_product_rule", x, Vec3::Zero(), std::abs(s.div_b - s.B.dot(s.grad_inv_mag)),
          1.0 + s.jac_b.norm()};
}

/// v_perp = b x (v x b) = b x v' / (omega |B|) with v' = omega v x B
template <MagneticField F>
IdentityResidual perp_velocity_identity(const F& field, const ParticleState& st, double omega) {
  require(omega != 0.0, "identities::perp_velocity_identity", "omega must be non-zero");
  const FieldSample s = sample(field, st.x);
  const Vec3 v_perp = split_velocity(st.v, s.b).v_perp;
  const Vec3 via_cross = s.b.cross(st.v.cross(s.b));
  const Vec3 vdot = omega * st.v.cross(s.B);
  const Vec3 via_accel = s.b.cross(vdot) / (omega * s.mag);
  const double r = std::max((v_perp - via_cross).cwiseAbs().maxCoeff(),
                            (v_perp - via_accel).cwiseAbs().maxCoeff());
  return {"perp_velocity_identity", st.x, st.v, r, 1.0 + st.v.squaredNorm()};
}

inline const std::array<std::string, 4>& identity_names() {
  static const std::array<std::string, 4> names = {
      "lemma_quadratic_form", "lemma_cross_projection", "div_b_product_rule",
      "perp_velocity_identity"};
  return names;
}

struct IdentitySweepResult {
  std::string field;
  int points = 0;
  /// worst scaled residual per identity, in identity_names() order
  std::array<IdentityResidual, 4> worst;
};

inline Vec3 random_in_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  while (true) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() <= radius) return p;
  }
}

/// n random (x, v) pairs with |x| <= x_radius, |v| <= v_radius, omega log-uniform
/// in [1, 1e4]. Deterministic for a given seed.
template <MagneticField F>
IdentitySweepResult identity_sweep(const F& field, int n, std::uint64_t seed,
                                   double x_radius = 2.0, double v_radius = 3.0) {
  require(n > 0, "identities::identity_sweep", "need at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logw(0.0, 4.0);
  IdentitySweepResult out;
  out.field = field.name();
  out.points = n;
  for (int k = 0; k < 4; ++k) {
    out.worst[k].name = identity_names()[k];
    out.worst[k].residual = -1.0;
  }
  auto keep = [&](int k, const IdentityResidual& r) {
    if (out.worst[k].residual < 0.0 || r.scaled() > out.worst[k].scaled()) out.worst[k] = r;
  };
  for (int i = 0; i < n; ++i) {
    const Vec3 x = random_in_ball(rng, x_radius);
    const Vec3 v = random_in_ball(rng, v_radius);
    const double omega = std::pow(10.0, logw(rng));
    keep(0, lemma_quadratic_form(field, x, v));
    keep(1, lemma_cross_projection(field, x, v));
    keep(2, div_b_product_rule(field, x));
    keep(3, perp_velocity_identity(field, ParticleState{0.0, x, v}, omega));
  }
  return out;
}

}  // namespace gyrolimit
