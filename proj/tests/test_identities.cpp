#include <gtest/gtest.h>

#include "gyrolimit/identities.hpp"

using namespace gyrolimit;

namespace {

std::vector<Field> builtins() {
  return {uniform_field(Vec3(0, 0, 1)), uniform_field(Vec3(0.3, -1, 2)), bump_column_field(1.0),
          bump_column_field(3.0), screw_pinch_equilibrium(1.0, 1.0),
          screw_pinch_equilibrium(2.0, -0.5)};
}

// 1/|B| differenced independently of the library sampling
Vec3 fd_grad_inv(const Field& f, const Vec3& x, double h = 1e-5) {
  Vec3 g;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    g[j] = (1 / f.value(x + e).norm() - 1 / f.value(x - e).norm()) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(QuadraticForm, TrivialCases) {
  const Field u = uniform_field(Vec3(0, 0, 1));
  EXPECT_EQ(lemma_quadratic_form(u, Vec3(1, 2, 3), Vec3(-1, 4, 0.5)).residual, 0.0);
  const Field bump = bump_column_field(1.0);
  const Vec3 x(0.5, 0.2, 0);
  const IdentityResidual r = lemma_quadratic_form(bump, x, sample(bump, x).b);
  EXPECT_LE(r.residual, 1e-15);
}

TEST(QuadraticForm, BumpColumnExample) {
  const IdentityResidual r =
      lemma_quadratic_form(bump_column_field(1.0), Vec3(0.5, 0.2, 0), Vec3(1, 2, 3));
  EXPECT_EQ(r.name, "lemma_quadratic_form");
  EXPECT_LE(r.residual, 1e-10);
  EXPECT_GE(r.residual, 0.0);
}

TEST(CrossProjection, TrivialCases) {
  const Field u = uniform_field(Vec3(1, 1, 0));
  EXPECT_EQ(lemma_cross_projection(u, Vec3(0, 0, 0), Vec3(3, 1, 2)).residual, 0.0);
  const Field pinch = screw_pinch_equilibrium(1.0, 1.0);
  const Vec3 x(0.5, 0.4, 1);
  EXPECT_LE(lemma_cross_projection(pinch, x, 2.0 * sample(pinch, x).b).residual, 1e-15);
}

TEST(CrossProjection, ScrewPinchExample) {
  const Vec3 x(1.3 * std::cos(0.4), 1.3 * std::sin(0.4), -0.2);
  EXPECT_LE(lemma_cross_projection(screw_pinch_equilibrium(1.0, 1.0), x, Vec3(0.3, -1, 2)).residual,
            1e-10);
}

TEST(DivProductRule, Examples) {
  EXPECT_EQ(div_b_product_rule(uniform_field(Vec3(0, 0, 1)), Vec3(1, 1, 1)).residual, 0.0);
  EXPECT_LE(div_b_product_rule(bump_column_field(1.0), Vec3(0.3, 0.1, 0)).residual, 1e-11);
  EXPECT_LE(div_b_product_rule(screw_pinch_equilibrium(1.0, 1.0), Vec3(0.7, 0, 0)).residual,
            1e-11);
}

TEST(DivProductRule, AgreesWithDifferencedOracle) {
  // both sides from differences, no analytic Jacobian involved
  for (const Field& f : builtins()) {
    for (const Vec3& x : {Vec3(0.3, 0.1, 0), Vec3(0.7, -0.2, 1), Vec3(1.4, 0.6, -2)}) {
      const double h = 1e-5;
      double div = 0.0;
      for (int j = 0; j < 3; ++j) {
        Vec3 e = Vec3::Zero();
        e[j] = h;
        div += (f.value(x + e).normalized()[j] - f.value(x - e).normalized()[j]) / (2 * h);
      }
      EXPECT_NEAR(div, f.value(x).dot(fd_grad_inv(f, x)), 1e-7) << f.name();
    }
  }
}

TEST(PerpVelocity, Examples) {
  const Field u = uniform_field(Vec3(0, 0, 1));
  const IdentityResidual r = perp_velocity_identity(u, ParticleState{0, Vec3::Zero(), Vec3(1, 0, 1)}, 2.0);
  EXPECT_EQ(r.residual, 0.0);
  EXPECT_EQ(split_velocity(Vec3(1, 0, 1), Vec3(0, 0, 1)).v_perp, Vec3(1, 0, 0));
  const IdentityResidual par =
      perp_velocity_identity(u, ParticleState{0, Vec3::Zero(), Vec3(0, 0, 3)}, 10.0);
  EXPECT_EQ(par.residual, 0.0);
  EXPECT_THROW(perp_velocity_identity(u, ParticleState{}, 0.0), Error);
}

TEST(PerpVelocity, RandomSweepBelowTolerance) {
  for (const Field& f : builtins()) {
    const IdentitySweepResult s = identity_sweep(f, 1000, 99);
    EXPECT_LE(s.worst[3].residual, 1e-12) << f.name();
  }
}

TEST(Identities, ZeroFieldPropagates) {
  try {
    lemma_quadratic_form(bump_column_field(1e-15), Vec3::Zero(), Vec3(1, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroField);
  }
}

TEST(IdentitySweep, AllFieldsAllIdentities) {
  for (const Field& f : builtins()) {
    const IdentitySweepResult s = identity_sweep(f, 1000, 7);
    EXPECT_EQ(s.points, 1000);
    for (int k = 0; k < 4; ++k) {
      SCOPED_TRACE(f.name() + " " + s.worst[k].name);
      EXPECT_EQ(s.worst[k].name, identity_names()[k]);
      EXPECT_GE(s.worst[k].residual, 0.0);
      EXPECT_LE(s.worst[k].scaled(), 1e-10);
      EXPECT_LE(s.worst[k].point.norm(), 2.0);
    }
  }
}

TEST(IdentitySweep, SeedDeterminism) {
  const Field f = bump_column_field(1.0);
  const IdentitySweepResult a = identity_sweep(f, 300, 5), b = identity_sweep(f, 300, 5);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.worst[k].residual, b.worst[k].residual);
    EXPECT_EQ(a.worst[k].point, b.worst[k].point);
  }
  const IdentitySweepResult c = identity_sweep(f, 300, 6);
  EXPECT_NE(a.worst[0].point, c.worst[0].point);
}

TEST(IdentitySweep, NearSupportBoundary) {
  // derivatives of the bump blow up as s -> 1; scaled residuals stay small
  const Field f = bump_column_field(1.0);
  for (double r : {0.9, 0.97, 0.99, 0.999}) {
    const Vec3 x(r, 0, 0), v(0.4, -1.2, 2.0);
    EXPECT_LE(lemma_quadratic_form(f, x, v).scaled(), 1e-10);
    EXPECT_LE(lemma_cross_projection(f, x, v).scaled(), 1e-10);
    EXPECT_LE(div_b_product_rule(f, x).scaled(), 1e-10);
  }
}
