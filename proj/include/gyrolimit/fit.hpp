#pragma once

#include <cmath>
#include <vector>

#include "gyrolimit/core.hpp"

namespace gyrolimit {

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// root-mean-square residual of log(error) about the fitted line
  double residual = 0.0;
};

/// Ordinary least squares of log(y) against log(x).
inline LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "analysis::fit_loglog", "size mismatch");
  require(x.size() >= 2, "analysis::fit_loglog", "need at least two points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw Error(ErrorCode::FitDegenerate, "analysis::fit_loglog",
                  "non-positive value in log-log fit");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += sqr(lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0))
    throw Error(ErrorCode::FitDegenerate, "analysis::fit_loglog", "abscissae coincide");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) ss += sqr(ly[i] - fit.intercept - fit.slope * lx[i]);
  fit.residual = std::sqrt(ss / n);
  return fit;
}

}  // namespace gyrolimit
