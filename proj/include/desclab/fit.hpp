#pragma once

// Least-squares line fits on log-log data, used to measure decay orders of
// functions along ray families approaching the boundary faces.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace desclab {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("fit_line: size mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("fit_line: need at least 2 points");

  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");

  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  return f;
}

// Fit log(y) against log(x); requires positive data.
inline LineFit fit_loglog(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0.0 || ys[i] <= 0.0)
      throw std::invalid_argument("fit_loglog: data must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_line(lx, ly);
}

}  // namespace desclab
