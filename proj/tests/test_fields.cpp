#include <random>

#include <gtest/gtest.h>

#include "gyrolimit/fields.hpp"

using namespace gyrolimit;

namespace {

std::vector<Vec3> ball_points(int n, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Vec3> pts;
  while (int(pts.size()) < n) {
    Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() <= radius) pts.push_back(p);
  }
  return pts;
}

std::vector<Field> builtins() {
  return {uniform_field(Vec3(0, 0, 1)), uniform_field(Vec3(1, -2, 0.5)), bump_column_field(1.0),
          bump_column_field(-2.5), screw_pinch_equilibrium(1.0, 1.0),
          screw_pinch_equilibrium(0.7, -2.0, 3.0)};
}

// central-difference Jacobian of an arbitrary vector function
template <class G>
Mat3 fd_jacobian(G&& g, const Vec3& x, double h) {
  Mat3 J;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    J.col(j) = (g(Vec3(x + e)) - g(Vec3(x - e))) / (2 * h);
  }
  return J;
}

}  // namespace

TEST(UniformField, SampleIsConstant) {
  const Field f = uniform_field(Vec3(0, 0, 1));
  const FieldSample s = sample(f, Vec3(2, -1, 5));
  EXPECT_EQ(s.b, Vec3(0, 0, 1));
  EXPECT_EQ(s.div_b, 0.0);
  EXPECT_EQ(s.curl_b, Vec3::Zero());
  EXPECT_EQ(s.grad_inv_mag, Vec3::Zero());
  EXPECT_DOUBLE_EQ(s.mag, 1.0);
}

TEST(UniformField, ScalingAndNormalisation) {
  const FieldSample s2 = sample(uniform_field(Vec3(0, 0, 2)), Vec3(1, 1, 1));
  EXPECT_DOUBLE_EQ(s2.mag, 2.0);
  EXPECT_EQ(s2.b, Vec3(0, 0, 1));
  const FieldSample s3 = sample(uniform_field(Vec3(1, 1, 1)), Vec3(0, 0, 0));
  EXPECT_LT((s3.b - Vec3(1, 1, 1) / std::sqrt(3.0)).norm(), 1e-15);
}

TEST(UniformField, ZeroVectorRejected) {
  try {
    uniform_field(Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroField);
  }
}

TEST(BumpColumn, AxisValue) {
  const FieldSample s = sample(bump_column_field(1.0), Vec3(0, 0, 0));
  EXPECT_LT((s.B - Vec3(0, 0, std::exp(-1.0))).norm(), 1e-16);
}

TEST(BumpColumn, OutsideSupportIsPureRotation) {
  const Field f = bump_column_field(1.0);
  const FieldSample s = sample(f, Vec3(2, 0, 0));
  EXPECT_EQ(s.B, Vec3(0, 2, 0));
  EXPECT_DOUBLE_EQ(s.mag, 2.0);
  EXPECT_EQ(s.b, Vec3(0, 1, 0));
  for (const Vec3& x : {Vec3(1, 0, 3), Vec3(0.8, -0.9, 1), Vec3(-3, 2, -7)}) {
    const Vec3 B = f.value(x);
    EXPECT_EQ(B, Vec3(-x[1], x[0], 0.0));
  }
}

TEST(BumpColumn, DivergenceFreeAtRandomPoints) {
  const Field f = bump_column_field(1.0);
  for (const Vec3& x : ball_points(20, 1.5, 7)) EXPECT_LE(std::abs(f.raw(x).DB.trace()), 1e-12);
}

TEST(BumpColumn, TinyAmplitudeVanishesOnAxis) {
  try {
    sample(bump_column_field(1e-14), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroField);
  }
}

TEST(ScrewPinch, AzimuthalProfileAtUnitRadius) {
  const double Bz = 1.3;
  const Field f = screw_pinch_equilibrium(1.0, Bz);
  for (double phi : {0.0, 1.0, 2.5}) {
    const Vec3 x(std::cos(phi), std::sin(phi), 0.4);
    const Vec3 et(-std::sin(phi), std::cos(phi), 0.0);
    const FieldSample s = sample(f, x);
    EXPECT_NEAR(s.B.dot(et), 0.5, 1e-15);
    EXPECT_NEAR(s.mag, std::sqrt(Bz * Bz + 0.25), 1e-15);
  }
}

TEST(ScrewPinch, PressureDifferenceAndAxis) {
  const double c = 1.7;
  const ScrewPinchField f(c, 1.0, 0.3);
  EXPECT_NEAR(f.pressure(Vec3(1, 0, 0)).p - f.pressure(Vec3(0, 0, 0)).p, 3 * c * c / 8, 1e-15);
  const Vec3 axis(0, 0, 2);
  EXPECT_EQ(f.value(axis), Vec3(0, 0, 1.0));
  EXPECT_EQ(f.pressure(axis).grad, Vec3::Zero());
}

TEST(ScrewPinch, ForceBalanceAtRandomPoints) {
  const ScrewPinchField f(1.0, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(0.1, 3.0), uphi(0, 2 * M_PI), uz(-4, 4);
  for (int i = 0; i < 100; ++i) {
    const double r = ur(rng), phi = uphi(rng);
    const Vec3 x(r * std::cos(phi), r * std::sin(phi), uz(rng));
    const EquilibriumSample e = equilibrium_sample(f, x);
    EXPECT_LE(force_balance_residual(f, x), 1e-10);
    EXPECT_LE(std::abs(e.grad_p.dot(e.base.B)), 1e-12);
    EXPECT_LE(std::abs(e.grad_p.dot(e.curl_B)), 1e-12);
    EXPECT_LE((e.hess_p - e.hess_p.transpose()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(ScrewPinch, CurlMatchesClosedForm) {
  // curl B = (0, 0, 2c/(1+r^2)^2) for the azimuthal profile c r/(1+r^2)
  const double c = 0.9;
  const ScrewPinchField f(c, 2.0);
  const Vec3 x(0.3, -1.1, 0.2);
  const double s = x[0] * x[0] + x[1] * x[1];
  const Vec3 curl = curl_from_jacobian(f.raw(x).DB);
  EXPECT_LT((curl - Vec3(0, 0, 2 * c / ((1 + s) * (1 + s)))).norm(), 1e-15);
}

TEST(ScrewPinch, ZeroAxialFieldRejected) {
  EXPECT_THROW(screw_pinch_equilibrium(1.0, 0.0), Error);
}

TEST(ModulatedPinch, DivergenceFreeButNotInBalance) {
  const ModulatedPinchField f(1.0, 1.0, 0.3, 2.0);
  const Field handle(f);
  EXPECT_FALSE(handle.is_equilibrium());
  EXPECT_TRUE(handle.has_pressure());
  double worst = 0.0;
  for (const Vec3& x : ball_points(50, 2.0, 3)) {
    EXPECT_LE(std::abs(f.raw(x).DB.trace()), 1e-12);
    worst = std::max(worst, force_balance_residual(f, x));
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(FieldHandle, PressureAvailability) {
  const Field bump = bump_column_field(1.0);
  EXPECT_FALSE(bump.has_pressure());
  try {
    equilibrium_sample(bump, Vec3(0.5, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotEquilibrium);
  }
  EXPECT_TRUE(screw_pinch_equilibrium(1, 1).is_equilibrium());
  EXPECT_TRUE(uniform_field(Vec3(0, 0, 1)).is_equilibrium());
}

TEST(FieldHandle, GrowthSpecInvariants) {
  for (const Field& f : builtins()) {
    const GrowthSpec g = f.growth();
    EXPECT_GE(g.gamma, 0.0);
    EXPECT_GT(g.radius, 0.0);
    EXPECT_GT(g.constant, 0.0);
    for (const Vec3& x : ball_points(200, 6.0, 5)) {
      if (x.norm() < g.radius) continue;
      EXPECT_GE(f.value(x).norm() * std::pow(x.norm(), g.gamma), g.constant * (1 - 1e-12));
    }
  }
}

TEST(FdCheck, UniformIsExact) {
  const FdResidual r = fd_check(uniform_field(Vec3(0.2, 0, 1)), Vec3(3, 1, -2), 1e-4);
  EXPECT_LE(r.max(), 1e-12);
}

TEST(FdCheck, BumpColumnSecondOrder) {
  const Field f = bump_column_field(1.0);
  const double r1 = fd_check(f, Vec3(0.5, 0, 0), 1e-2).max();
  const double r2 = fd_check(f, Vec3(0.5, 0, 0), 5e-3).max();
  EXPECT_NEAR(r1 / r2, 4.0, 0.2);
}

TEST(FdCheck, ScrewPinchHessian) {
  const FdResidual r = fd_check(screw_pinch_equilibrium(1.0, 1.0), Vec3(0.6, 0.8, 0.1), 1e-4);
  ASSERT_TRUE(r.hess_p.has_value());
  EXPECT_LE(*r.hess_p, 1e-6);
  EXPECT_LE(*r.grad_p, 1e-6);
}

TEST(FieldSampleProperties, InvariantsAtRandomPoints) {
  for (const Field& f : builtins()) {
    for (const Vec3& x : ball_points(1000, 3.0, 17)) {
      const FieldSample s = sample(f, x);
      SCOPED_TRACE(f.name());
      EXPECT_LE(std::abs(s.b.norm() - 1.0), 1e-14);
      EXPECT_LE(std::abs(s.div_b - s.jac_b.trace()), 1e-12);
      EXPECT_LE(std::abs(s.div_b - s.B.dot(s.grad_inv_mag)), 1e-10);
      EXPECT_LE(std::abs(s.jac_B.trace()), 1e-12);
      const Mat3 composed = s.jac_B / s.mag + s.B * s.grad_inv_mag.transpose();
      EXPECT_LE((s.jac_b - composed).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(FieldSampleProperties, AnalyticDerivativesMatchDifferences) {
  // independent oracle: difference B, b and 1/|B| directly, no library sampling
  for (const Field& f : builtins()) {
    for (const Vec3& x : ball_points(100, 3.0, 23)) {
      const FieldSample s = sample(f, x);
      const double h = 1e-5;
      const Mat3 dB = fd_jacobian([&](const Vec3& y) { return f.value(y); }, x, h);
      const Mat3 db =
          fd_jacobian([&](const Vec3& y) { return Vec3(f.value(y).normalized()); }, x, h);
      SCOPED_TRACE(f.name());
      EXPECT_LE((dB - s.jac_B).cwiseAbs().maxCoeff(), 1e-6 * (1 + s.jac_B.norm()));
      EXPECT_LE((db - s.jac_b).cwiseAbs().maxCoeff(), 1e-6 * (1 + s.jac_b.norm()));
    }
  }
}
