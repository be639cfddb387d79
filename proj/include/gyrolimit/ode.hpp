#pragma once

// Adaptive Dormand-Prince 8(5,3) stepper for fixed-size first-order systems,
// with the 7th-order continuous extension on every accepted step.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "gyrolimit/core.hpp"
#include "gyrolimit/detail/dop853_tableau.hpp"

namespace gyrolimit {

template <int N>
using StateVec = Eigen::Matrix<double, N, 1>;

/// Continuous extension of one accepted step [t0, t1].
template <int N>
struct StepInterpolant {
  double t0 = 0.0;
  double t1 = 0.0;
  StateVec<N> y0;
  StateVec<N> y1;
  StateVec<N> f0;
  StateVec<N> f1;
  std::array<StateVec<N>, 7> F;

  StateVec<N> operator()(double t) const {
    const double x = (t - t0) / (t1 - t0);
    StateVec<N> y = StateVec<N>::Zero();
    for (int i = 0; i < 7; ++i) {
      y += F[6 - i];
      y *= (i % 2 == 0) ? x : (1.0 - x);
    }
    return y + y0;
  }
};

/// Piecewise dense solution assembled from consecutive step interpolants.
template <int N>
class DenseSolution {
 public:
  void push(const StepInterpolant<N>& s) { steps_.push_back(s); }
  bool empty() const { return steps_.empty(); }
  std::size_t size() const { return steps_.size(); }
  double t_begin() const { return steps_.front().t0; }
  double t_end() const { return steps_.back().t1; }
  const std::vector<StepInterpolant<N>>& steps() const { return steps_; }

  const StepInterpolant<N>& step_at(double t) const {
    auto it = std::lower_bound(steps_.begin(), steps_.end(), t,
                               [](const StepInterpolant<N>& s, double v) { return s.t1 < v; });
    if (it == steps_.end()) --it;
    return *it;
  }

  StateVec<N> operator()(double t) const { return step_at(t)(t); }

 private:
  std::vector<StepInterpolant<N>> steps_;
};

struct OdeOptions {
  double tol = 1e-10;
  /// Steps below min_step_fraction * |T| raise StepSizeUnderflow.
  double min_step_fraction = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 200'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

namespace detail {

template <int N>
double rms_scaled(const StateVec<N>& v, const StateVec<N>& scale) {
  return std::sqrt((v.cwiseQuotient(scale)).squaredNorm() / N);
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t_end (either direction). The
/// observer receives every accepted StepInterpolant in order.
template <int N, class Rhs, class Observer>
OdeStats integrate_dop853(Rhs&& rhs, double t0, const StateVec<N>& y_init, double t_end,
                          const OdeOptions& opt, Observer&& observer,
                          const char* operation = "integrators::dop853") {
  namespace tab = detail::dop853;
  using V = StateVec<N>;
  require(opt.tol > 0.0, operation, "tolerance must be positive");
  OdeStats stats;
  const double span = t_end - t0;
  if (span == 0.0) return stats;
  const double dir = span > 0.0 ? 1.0 : -1.0;
  const double min_step = opt.min_step_fraction * std::abs(span);
  const double atol = opt.tol, rtol = opt.tol;
  constexpr double safety = 0.9, min_factor = 0.2, max_factor = 10.0;
  constexpr double err_exp = -1.0 / 8.0;

  auto f = [&](double t, const V& y) {
    ++stats.evaluations;
    return V(rhs(t, y));
  };

  double t = t0;
  V y = y_init;
  V fy = f(t, y);

  // starting step (Hairer, Norsett & Wanner heuristic)
  double h_abs;
  {
    V scale = (y.cwiseAbs() * rtol).array() + atol;
    const double d0 = detail::rms_scaled<N>(y, scale);
    const double d1 = detail::rms_scaled<N>(fy, scale);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(span));
    const V y1 = y + dir * h0 * fy;
    const V f1 = f(t + dir * h0, y1);
    const double d2 = detail::rms_scaled<N>(V(f1 - fy), scale) / h0;
    double h1;
    if (d1 <= 1e-15 && d2 <= 1e-15)
      h1 = std::max(1e-6, h0 * 1e-3);
    else
      h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    h_abs = std::min({100.0 * h0, h1, std::abs(span), opt.max_step});
  }

  std::array<V, 16> K;
  bool finished = false;
  while (!finished) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      throw Error(ErrorCode::StepSizeUnderflow, operation, "step budget exhausted", t);
    bool rejected_before = false;
    while (true) {
      if (h_abs < min_step)
        throw Error(ErrorCode::StepSizeUnderflow, operation,
                    "step size fell below 1e-14 * horizon at t = " + std::to_string(t), t);
      h_abs = std::min(h_abs, opt.max_step);
      double h = dir * h_abs;
      double t_new = t + h;
      bool last = false;
      if (dir * (t_new - t_end) >= 0.0) {
        t_new = t_end;
        h = t_new - t;
        h_abs = std::abs(h);
        last = true;
      }

      K[0] = fy;
      for (int s = 1; s < 12; ++s) {
        V dy = V::Zero();
        for (int j = 0; j < s; ++j)
          if (tab::A[s][j] != 0.0) dy += tab::A[s][j] * K[j];
        K[s] = f(t + tab::C[s] * h, V(y + h * dy));
      }
      V incr = V::Zero();
      for (int j = 0; j < 12; ++j) incr += tab::B[j] * K[j];
      const V y_new = y + h * incr;
      K[12] = f(t + h, y_new);
      if (!y_new.allFinite())
        throw Error(ErrorCode::StepSizeUnderflow, operation,
                    "non-finite state at t = " + std::to_string(t), t);

      const V scale = (y.cwiseAbs().cwiseMax(y_new.cwiseAbs()) * rtol).array() + atol;
      V e5 = V::Zero(), e3 = V::Zero();
      for (int j = 0; j < 13; ++j) {
        e5 += tab::E5[j] * K[j];
        e3 += tab::E3[j] * K[j];
      }
      const double n5 = e5.cwiseQuotient(scale).squaredNorm();
      const double n3 = e3.cwiseQuotient(scale).squaredNorm();
      double err = 0.0;
      if (n5 != 0.0 || n3 != 0.0) err = h_abs * n5 / std::sqrt((n5 + 0.01 * n3) * N);

      if (err < 1.0) {
        double factor = err == 0.0 ? max_factor
                                   : std::min(max_factor, safety * std::pow(err, err_exp));
        if (rejected_before) factor = std::min(1.0, factor);

        // dense-output stages
        for (int s = 13; s < 16; ++s) {
          V dy = V::Zero();
          for (int j = 0; j < s; ++j)
            if (tab::A[s][j] != 0.0) dy += tab::A[s][j] * K[j];
          K[s] = f(t + tab::C[s] * h, V(y + h * dy));
        }
        StepInterpolant<N> step;
        step.t0 = t;
        step.t1 = t_new;
        step.y0 = y;
        step.y1 = y_new;
        step.f0 = fy;
        step.f1 = K[12];
        const V dY = y_new - y;
        step.F[0] = dY;
        step.F[1] = h * fy - dY;
        step.F[2] = 2.0 * dY - h * (K[12] + fy);
        for (int r = 0; r < 4; ++r) {
          V acc = V::Zero();
          for (int j = 0; j < 16; ++j)
            if (tab::D[r][j] != 0.0) acc += tab::D[r][j] * K[j];
          step.F[3 + r] = h * acc;
        }
        observer(step);
        ++stats.accepted;
        t = t_new;
        y = y_new;
        fy = K[12];
        h_abs *= factor;
        finished = last;
        break;
      }
      h_abs *= std::max(min_factor, safety * std::pow(err, err_exp));
      rejected_before = true;
      ++stats.rejected;
    }
  }
  return stats;
}

/// Cubic Hermite interpolation on [t0, t1] from values and derivatives.
template <class T>
T hermite(double t0, double t1, const T& y0, const T& dy0, const T& y1, const T& dy1,
          double t) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return T(h00 * y0 + h10 * h * dy0 + h01 * y1 + h11 * h * dy1);
}

// 8-point Gauss-Legendre rule on [-1, 1]
inline constexpr std::array<double, 8> kGauss8Nodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGauss8Weights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// Integral of g over [a, b] with the 8-point Gauss-Legendre rule.
template <class G>
double gauss8(G&& g, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 8; ++i) acc += kGauss8Weights[i] * g(mid + half * kGauss8Nodes[i]);
  return acc * half;
}

}  // namespace gyrolimit
