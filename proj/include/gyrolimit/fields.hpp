#pragma once

// Analytic magnetic fields with hand-derived first derivatives (and, for the
// equilibria, pressure with gradient and Hessian). Every derived quantity in
// FieldSample is assembled from B and DB without internal differencing.

#include <algorithm>
#include <concepts>
#include <optional>
#include <string>
#include <variant>

#include "gyrolimit/core.hpp"

namespace gyrolimit {

/// Magnitude below which a field is treated as vanishing.
inline constexpr double kZeroFieldThreshold = 1e-13;

/// B and its Jacobian, DB(i,j) = d_j B_i.
struct RawField {
  Vec3 B;
  Mat3 DB;
};

struct PressureSample {
  double p = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

/// All local field quantities at a point. Jacobians follow J(i,j) = d_j F_i,
/// so jac_b * w is the derivative of b along w.
struct FieldSample {
  Vec3 B;
  double mag = 0.0;
  Vec3 b;
  Mat3 jac_B;
  Mat3 jac_b;
  double div_b = 0.0;
  Vec3 curl_b;
  Vec3 grad_inv_mag;
};

struct EquilibriumSample {
  FieldSample base;
  double p = 0.0;
  Vec3 grad_p;
  Mat3 hess_p;
  Vec3 curl_B;
};

/// Lower bound C/|y|^gamma <= |B(y)| for |y| >= radius.
struct GrowthSpec {
  double gamma = 0.0;
  double radius = 1.0;
  double constant = 1.0;
};

inline FieldSample assemble_sample(const RawField& raw) {
  FieldSample s;
  s.B = raw.B;
  s.jac_B = raw.DB;
  s.mag = raw.B.norm();
  if (!(s.mag >= kZeroFieldThreshold))
    throw Error(ErrorCode::ZeroField, "fields::sample",
                "|B| = " + std::to_string(s.mag) + " below threshold");
  const double inv = 1.0 / s.mag;
  s.b = raw.B * inv;
  // grad|B| = DB^T B / |B|, grad(1/|B|) = -grad|B| / |B|^2
  s.grad_inv_mag = -(raw.DB.transpose() * raw.B) * (inv * inv * inv);
  s.jac_b = raw.DB * inv + raw.B * s.grad_inv_mag.transpose();
  s.div_b = s.jac_b.trace();
  s.curl_b = curl_from_jacobian(s.jac_b);
  return s;
}

// ---------------------------------------------------------------------------

/// B(x) = b0 everywhere; carries the trivial equilibrium p = p_const.
class UniformField {
 public:
  explicit UniformField(const Vec3& b0, double p_const = 0.0)
      : b0_(b0), p_const_(p_const) {
    if (!(b0.norm() > 0.0) || !b0.allFinite())
      throw Error(ErrorCode::ZeroField, "fields::uniform_field",
                  "b0 must be a finite non-zero vector");
  }

  Vec3 value(const Vec3&) const { return b0_; }
  RawField raw(const Vec3&) const { return {b0_, Mat3::Zero()}; }
  PressureSample pressure(const Vec3&) const { return {p_const_, Vec3::Zero(), Mat3::Zero()}; }
  GrowthSpec growth() const { return {0.0, 1.0, b0_.norm()}; }
  std::string name() const { return "uniform"; }
  const Vec3& b0() const { return b0_; }

 private:
  Vec3 b0_;
  double p_const_;
};

/// B(x,y,z) = (-y, x, f(x^2+y^2)) with the smooth bump
/// f(s) = a0 exp(-1/(1-s)) on s < 1 and 0 elsewhere.
class BumpColumnField {
 public:
  explicit BumpColumnField(double a0) : a0_(a0) {
    if (!(a0 != 0.0) || !std::isfinite(a0))
      throw Error(ErrorCode::InvalidArgument, "fields::bump_column_field",
                  "bump amplitude must be finite and non-zero");
    // min over the unit disc of sqrt(s + f(s)^2), the growth constant
    double lo = 1.0;
    for (int i = 0; i <= 2000; ++i) {
      const double s = i / 2000.0;
      lo = std::min(lo, std::sqrt(s + sqr(bump(s))));
    }
    growth_constant_ = lo;
  }

  double bump(double s) const {
    if (s >= 1.0) return 0.0;
    return a0_ * std::exp(-1.0 / (1.0 - s));
  }

  double bump_derivative(double s) const {
    const double f = bump(s);
    if (f == 0.0) return 0.0;
    return -f / sqr(1.0 - s);
  }

  Vec3 value(const Vec3& x) const {
    return {-x[1], x[0], bump(x[0] * x[0] + x[1] * x[1])};
  }

  RawField raw(const Vec3& x) const {
    const double s = x[0] * x[0] + x[1] * x[1];
    const double fp = bump_derivative(s);
    Mat3 DB;
    DB << 0.0, -1.0, 0.0,
          1.0, 0.0, 0.0,
          2.0 * x[0] * fp, 2.0 * x[1] * fp, 0.0;
    return {{-x[1], x[0], bump(s)}, DB};
  }

  GrowthSpec growth() const { return {0.0, 1.0, growth_constant_}; }
  std::string name() const { return "bump_column"; }
  double amplitude() const { return a0_; }

 private:
  double a0_;
  double growth_constant_ = 1.0;
};

namespace detail {

// Azimuthal pinch B = h(z) g(r^2) (-y, x, 0) + Bz e_z with g(s) = c/(1+s),
// h(z) = 1 + eps cos(k z); h == 1 gives B_theta = c r/(1+r^2).
struct PinchGeometry {
  double c;
  double Bz;
  double eps;
  double k;

  Vec3 value(const Vec3& x) const {
    const double g = c / (1.0 + x[0] * x[0] + x[1] * x[1]);
    const double h = 1.0 + eps * std::cos(k * x[2]);
    return {-x[1] * g * h, x[0] * g * h, Bz};
  }

  RawField raw(const Vec3& x) const {
    const double s = x[0] * x[0] + x[1] * x[1];
    const double g = c / (1.0 + s);
    const double gp = -c / sqr(1.0 + s);
    const double h = 1.0 + eps * std::cos(k * x[2]);
    const double hp = -eps * k * std::sin(k * x[2]);
    const double X = x[0], Y = x[1];
    Mat3 DB;
    DB << -2.0 * X * Y * gp * h, -(g + 2.0 * Y * Y * gp) * h, -Y * g * hp,
          (g + 2.0 * X * X * gp) * h, 2.0 * X * Y * gp * h, X * g * hp,
          0.0, 0.0, 0.0;
    return {{-Y * g * h, X * g * h, Bz}, DB};
  }

  // p = p_c - c^2 / (2 (1+s)^2) as a function of s = r^2
  PressureSample pressure(const Vec3& x, double p_c) const {
    const double s = x[0] * x[0] + x[1] * x[1];
    const double q = 1.0 + s;
    const double P1 = c * c / (q * q * q);
    const double P2 = -3.0 * c * c / (q * q * q * q);
    const Vec3 w(x[0], x[1], 0.0);
    PressureSample out;
    out.p = p_c - c * c / (2.0 * q * q);
    out.grad = 2.0 * P1 * w;
    out.hess = 4.0 * P2 * (w * w.transpose());
    out.hess(0, 0) += 2.0 * P1;
    out.hess(1, 1) += 2.0 * P1;
    return out;
  }
};

}  // namespace detail

/// Screw pinch B_theta(r) = c r/(1+r^2), B_z = Bz, with pressure
/// p(r) = p_c - c^2/(2(1+r^2)^2) so that B x curl(B) = grad p.
class ScrewPinchField {
 public:
  ScrewPinchField(double c, double Bz, double p_c = 0.0)
      : geom_{c, Bz, 0.0, 0.0}, p_c_(p_c) {
    if (!(Bz != 0.0) || !std::isfinite(Bz) || !std::isfinite(c))
      throw Error(ErrorCode::InvalidArgument, "fields::screw_pinch_equilibrium",
                  "Bz must be finite and non-zero");
  }

  Vec3 value(const Vec3& x) const { return geom_.value(x); }
  RawField raw(const Vec3& x) const { return geom_.raw(x); }
  PressureSample pressure(const Vec3& x) const { return geom_.pressure(x, p_c_); }
  GrowthSpec growth() const { return {0.0, 1.0, std::abs(geom_.Bz)}; }
  std::string name() const { return "screw_pinch"; }
  double c() const { return geom_.c; }
  double Bz() const { return geom_.Bz; }
  double p_c() const { return p_c_; }

 private:
  detail::PinchGeometry geom_;
  double p_c_;
};

/// Screw pinch whose azimuthal component is modulated by 1 + eps cos(k z).
/// Still divergence-free but not an equilibrium; it carries the unmodulated
/// pinch pressure so that non-isodynamic configurations can be probed.
class ModulatedPinchField {
 public:
  ModulatedPinchField(double c, double Bz, double eps, double k, double p_c = 0.0)
      : geom_{c, Bz, eps, k}, p_c_(p_c) {
    if (!(Bz != 0.0) || !std::isfinite(Bz))
      throw Error(ErrorCode::InvalidArgument, "fields::modulated_pinch",
                  "Bz must be finite and non-zero");
    if (!(std::abs(eps) < 1.0))
      throw Error(ErrorCode::InvalidArgument, "fields::modulated_pinch",
                  "|eps| must be below 1");
  }

  Vec3 value(const Vec3& x) const { return geom_.value(x); }
  RawField raw(const Vec3& x) const { return geom_.raw(x); }
  PressureSample pressure(const Vec3& x) const { return geom_.pressure(x, p_c_); }
  GrowthSpec growth() const { return {0.0, 1.0, std::abs(geom_.Bz)}; }
  std::string name() const { return "modulated_pinch"; }

 private:
  detail::PinchGeometry geom_;
  double p_c_;
};

// ---------------------------------------------------------------------------

template <class F>
concept MagneticField = requires(const F& f, const Vec3& x) {
  { f.value(x) } -> std::convertible_to<Vec3>;
  { f.raw(x) } -> std::same_as<RawField>;
  { f.name() } -> std::convertible_to<std::string>;
};

template <class F>
concept HasPressure = requires(const F& f, const Vec3& x) {
  { f.pressure(x) } -> std::same_as<PressureSample>;
};

/// Type-erased built-in field handle.
class Field {
 public:
  using Variant =
      std::variant<UniformField, BumpColumnField, ScrewPinchField, ModulatedPinchField>;

  template <class T>
    requires std::constructible_from<Variant, T>
  Field(T impl) : impl_(std::move(impl)) {}

  Vec3 value(const Vec3& x) const {
    return std::visit([&](const auto& f) { return f.value(x); }, impl_);
  }
  RawField raw(const Vec3& x) const {
    return std::visit([&](const auto& f) { return f.raw(x); }, impl_);
  }
  std::string name() const {
    return std::visit([](const auto& f) { return f.name(); }, impl_);
  }
  GrowthSpec growth() const {
    return std::visit([](const auto& f) { return f.growth(); }, impl_);
  }

  bool has_pressure() const {
    return std::visit([](const auto& f) { return HasPressure<std::decay_t<decltype(f)>>; },
                      impl_);
  }

  /// Whether B x curl(B) = grad p holds identically.
  bool is_equilibrium() const {
    return std::holds_alternative<UniformField>(impl_) ||
           std::holds_alternative<ScrewPinchField>(impl_);
  }

  std::optional<PressureSample> pressure(const Vec3& x) const {
    return std::visit(
        [&](const auto& f) -> std::optional<PressureSample> {
          if constexpr (HasPressure<std::decay_t<decltype(f)>>)
            return f.pressure(x);
          else
            return std::nullopt;
        },
        impl_);
  }

  const Variant& variant() const { return impl_; }

 private:
  Variant impl_;
};

template <MagneticField F>
FieldSample sample(const F& field, const Vec3& x) {
  return assemble_sample(field.raw(x));
}

template <MagneticField F>
PressureSample pressure_at(const F& field, const Vec3& x) {
  if constexpr (std::same_as<F, Field>) {
    auto p = field.pressure(x);
    if (!p)
      throw Error(ErrorCode::NotEquilibrium, "fields::equilibrium_sample",
                  field.name() + " carries no pressure function");
    return *p;
  } else if constexpr (HasPressure<F>) {
    return field.pressure(x);
  } else {
    throw Error(ErrorCode::NotEquilibrium, "fields::equilibrium_sample",
                field.name() + " carries no pressure function");
  }
}

template <MagneticField F>
EquilibriumSample equilibrium_sample(const F& field, const Vec3& x) {
  const RawField raw = field.raw(x);
  const PressureSample ps = pressure_at(field, x);
  EquilibriumSample s;
  s.base = assemble_sample(raw);
  s.p = ps.p;
  s.grad_p = ps.grad;
  s.hess_p = ps.hess;
  s.curl_B = curl_from_jacobian(raw.DB);
  return s;
}

inline Field uniform_field(const Vec3& b0) { return UniformField(b0); }
inline Field bump_column_field(double a0) { return BumpColumnField(a0); }
inline Field screw_pinch_equilibrium(double c, double Bz, double p_c = 0.0) {
  return ScrewPinchField(c, Bz, p_c);
}

/// |B x curl(B) - grad p|
template <MagneticField F>
double force_balance_residual(const F& field, const Vec3& x) {
  const EquilibriumSample s = equilibrium_sample(field, x);
  return (s.base.B.cross(s.curl_B) - s.grad_p).norm();
}

// ---------------------------------------------------------------------------

/// Max-abs deviation of each analytic derivative from central differences.
struct FdResidual {
  double jac_B = 0.0;
  double jac_b = 0.0;
  double grad_inv_mag = 0.0;
  std::optional<double> grad_p;
  std::optional<double> hess_p;

  double max() const {
    double m = std::max({jac_B, jac_b, grad_inv_mag});
    if (grad_p) m = std::max(m, *grad_p);
    if (hess_p) m = std::max(m, *hess_p);
    return m;
  }
};

template <MagneticField F>
FdResidual fd_check(const F& field, const Vec3& x, double h) {
  require(h > 0.0 && std::isfinite(h), "fields::fd_check", "step must be positive");
  const FieldSample s0 = sample(field, x);
  Mat3 dB, db;
  Vec3 dinv;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    const FieldSample sp = sample(field, Vec3(x + e));
    const FieldSample sm = sample(field, Vec3(x - e));
    dB.col(j) = (sp.B - sm.B) / (2.0 * h);
    db.col(j) = (sp.b - sm.b) / (2.0 * h);
    dinv[j] = (1.0 / sp.mag - 1.0 / sm.mag) / (2.0 * h);
  }
  FdResidual r;
  r.jac_B = (dB - s0.jac_B).cwiseAbs().maxCoeff();
  r.jac_b = (db - s0.jac_b).cwiseAbs().maxCoeff();
  r.grad_inv_mag = (dinv - s0.grad_inv_mag).cwiseAbs().maxCoeff();

  bool with_pressure = false;
  if constexpr (std::same_as<F, Field>)
    with_pressure = field.has_pressure();
  else
    with_pressure = HasPressure<F>;
  if (with_pressure) {
    const PressureSample p0 = pressure_at(field, x);
    Vec3 dp;
    Mat3 dH;
    for (int j = 0; j < 3; ++j) {
      Vec3 e = Vec3::Zero();
      e[j] = h;
      const PressureSample pp = pressure_at(field, Vec3(x + e));
      const PressureSample pm = pressure_at(field, Vec3(x - e));
      dp[j] = (pp.p - pm.p) / (2.0 * h);
      dH.col(j) = (pp.grad - pm.grad) / (2.0 * h);
    }
    r.grad_p = (dp - p0.grad).cwiseAbs().maxCoeff();
    r.hess_p = (dH - p0.hess).cwiseAbs().maxCoeff();
  }
  return r;
}

}  // namespace gyrolimit
