#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <gtest/gtest.h>

#include "gyrolimit/fit.hpp"
#include "gyrolimit/ode.hpp"
#include "gyrolimit/parallel.hpp"
#include "gyrolimit/quadrature.hpp"

using namespace gyrolimit;

namespace {

// harmonic oscillator y = (cos t, -sin t)
StateVec<2> oscillator(double, const StateVec<2>& y) {
  StateVec<2> d;
  d << y[1], -y[0];
  return d;
}

}  // namespace

TEST(Dop853, HarmonicOscillatorEndpoint) {
  StateVec<2> y0(1.0, 0.0);
  StateVec<2> last;
  OdeOptions opt;
  opt.tol = 1e-12;
  integrate_dop853<2>(oscillator, 0.0, y0, 20.0, opt,
                      [&](const StepInterpolant<2>& s) { last = s.y1; });
  EXPECT_NEAR(last[0], std::cos(20.0), 1e-10);
  EXPECT_NEAR(last[1], -std::sin(20.0), 1e-10);
}

TEST(Dop853, DenseOutputIsHighOrder) {
  StateVec<2> y0(1.0, 0.0);
  DenseSolution<2> sol;
  OdeOptions opt;
  opt.tol = 1e-11;
  integrate_dop853<2>(oscillator, 0.0, y0, 10.0, opt,
                      [&](const StepInterpolant<2>& s) { sol.push(s); });
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 10.0 * i / 1000;
    worst = std::max(worst, std::abs(sol(t)[0] - std::cos(t)));
  }
  EXPECT_LT(worst, 1e-9);
  // interpolant reproduces the step endpoints
  for (const auto& s : sol.steps()) {
    EXPECT_LT((s(s.t0) - s.y0).norm(), 1e-14);
    EXPECT_LT((s(s.t1) - s.y1).norm(), 1e-13);
  }
}

TEST(Dop853, ErrorFallsWithTolerance) {
  auto run = [](double tol) {
    StateVec<1> y0(1.0);
    StateVec<1> last;
    OdeOptions opt;
    opt.tol = tol;
    integrate_dop853<1>([](double, const StateVec<1>& y) { return StateVec<1>(-y); }, 0.0, y0,
                        5.0, opt, [&](const StepInterpolant<1>& s) { last = s.y1; });
    return std::abs(last[0] - std::exp(-5.0));
  };
  EXPECT_LT(run(1e-12), run(1e-6));
  EXPECT_LT(run(1e-12), 1e-11);
}

TEST(Dop853, BackwardDirection) {
  StateVec<1> y0(1.0);
  StateVec<1> last;
  integrate_dop853<1>([](double, const StateVec<1>& y) { return StateVec<1>(y); }, 0.0, y0,
                      -3.0, OdeOptions{1e-12}, [&](const StepInterpolant<1>& s) { last = s.y1; });
  EXPECT_NEAR(last[0], std::exp(-3.0), 1e-12);
}

TEST(Dop853, BlowUpRaisesUnderflow) {
  StateVec<1> y0(1.0);
  try {
    integrate_dop853<1>([](double, const StateVec<1>& y) { return StateVec<1>(y[0] * y[0]); },
                        0.0, y0, 2.0, OdeOptions{1e-10}, [](const StepInterpolant<1>&) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepSizeUnderflow);
    ASSERT_TRUE(e.time().has_value());
    EXPECT_NEAR(*e.time(), 1.0, 1e-3);
  }
}

TEST(Quadrature, Gauss8ExactForDegree15) {
  auto p = [](double x) { return std::pow(x, 15) - 3 * std::pow(x, 8) + x + 2; };
  // exact integral on [0, 2]
  const double exact = std::pow(2.0, 16) / 16 - 3 * std::pow(2.0, 9) / 9 + 2 + 4;
  EXPECT_NEAR(gauss8(p, 0.0, 2.0), exact, 1e-9);
}

TEST(Quadrature, HermiteExactForCubic) {
  auto f = [](double t) { return 2 * t * t * t - t + 1; };
  auto df = [](double t) { return 6 * t * t - 1; };
  for (double t : {0.3, 0.5, 0.9})
    EXPECT_NEAR(hermite(0.2, 1.0, f(0.2), df(0.2), f(1.0), df(1.0), t), f(t), 1e-14);
}

TEST(Quadrature, AdaptiveSimpsonAgainstGaussKronrod) {
  auto g = [](double x) { return std::exp(std::sin(3 * x)) / (1 + x * x); };
  const double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, 4.0, 15);
  EXPECT_NEAR(adaptive_simpson(g, 0.0, 4.0, 1e-12), ref, 1e-11);
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-13), 2.0,
              1e-12);
}

TEST(Quadrature, CompositeSimpsonFourthOrder) {
  auto g = [](double x) { return std::exp(x); };
  const double exact = std::exp(1.0) - 1.0;
  const double e1 = std::abs(composite_simpson(g, 0.0, 1.0, 8) - exact);
  const double e2 = std::abs(composite_simpson(g, 0.0, 1.0, 16) - exact);
  EXPECT_NEAR(e1 / e2, 16.0, 0.5);
}

TEST(Fit, RecoversPowerLaw) {
  std::vector<double> x{1e2, 1e3, 1e4, 1e5}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.5));
  const LogLogFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, -1.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_LT(f.residual, 1e-12);
}

TEST(Fit, DegenerateInputs) {
  try {
    fit_loglog({1, 10}, {1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FitDegenerate);
  }
  EXPECT_THROW(fit_loglog({2, 2}, {1, 3}), Error);
}

TEST(Parallel, KeepsOrderAndRethrowsLowestIndex) {
  auto sq = parallel_map(50, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < sq.size(); ++i) EXPECT_EQ(sq[i], i * i);
  try {
    parallel_map(10, 3, [](std::size_t i) -> int {
      if (i == 3 || i == 7) throw std::runtime_error(std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "3");
  }
}

TEST(Parallel, ThreadResolution) {
  EXPECT_EQ(resolve_threads(3u), 3u);
  setenv("GYROLIMIT_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(), 5u);
  setenv("GYROLIMIT_THREADS", "junk", 1);
  EXPECT_EQ(resolve_threads(), 1u);
  unsetenv("GYROLIMIT_THREADS");
  EXPECT_EQ(resolve_threads(), 1u);
}
