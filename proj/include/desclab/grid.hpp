#pragma once

// Uniform spacetime grids on a rectangular box [-T,T) x [-X,X) and complex
// scalar fields sampled on them. The Fourier path treats the grid as a
// discrete torus; the sparse path imposes a Dirichlet-zero outer layer.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace desclab {

enum class BoundaryRule { periodic, dirichlet_zero };

// One time axis and one space axis; extents are half-widths, so axis i of
// count n covers [-extent, extent) with spacing 2*extent/n.
struct GridSpec {
  double T = 1.0;  // time half-width
  double X = 1.0;  // space half-width
  int n_t = 0;
  int n_x = 0;
  BoundaryRule boundary = BoundaryRule::periodic;

  double h_t() const { return 2.0 * T / n_t; }
  double h_x() const { return 2.0 * X / n_x; }
  double cell_volume() const { return h_t() * h_x(); }
  long size() const { return static_cast<long>(n_t) * n_x; }

  double t_of(int i) const { return -T + i * h_t(); }
  double x_of(int j) const { return -X + j * h_x(); }
  long index(int i, int j) const { return static_cast<long>(i) * n_x + j; }

  // Fourier dual frequencies (angular), standard FFT ordering.
  double tau_of(int k) const {
    const int kk = k <= n_t / 2 ? k : k - n_t;
    return M_PI * kk / T;
  }
  double xi_of(int k) const {
    const int kk = k <= n_x / 2 ? k : k - n_x;
    return M_PI * kk / X;
  }

  bool power_of_two_counts() const {
    auto p2 = [](int n) { return n > 0 && (n & (n - 1)) == 0; };
    return p2(n_t) && p2(n_x);
  }

  void validate_fourier() const {
    if (!power_of_two_counts())
      throw std::invalid_argument("Fourier grid needs power-of-two counts");
  }

  static GridSpec square(double extent, int n, BoundaryRule b) {
    GridSpec s;
    s.T = s.X = extent;
    s.n_t = s.n_x = n;
    s.boundary = b;
    return s;
  }
};

inline bool operator==(const GridSpec& a, const GridSpec& b) {
  return a.T == b.T && a.X == b.X && a.n_t == b.n_t && a.n_x == b.n_x &&
         a.boundary == b.boundary;
}

struct GridField {
  GridSpec spec;
  Eigen::VectorXcd values;  // row-major: index(i, j) = i*n_x + j

  GridField() = default;
  explicit GridField(const GridSpec& s)
      : spec(s), values(Eigen::VectorXcd::Zero(s.size())) {}

  std::complex<double>& at(int i, int j) { return values[spec.index(i, j)]; }
  std::complex<double> at(int i, int j) const {
    return values[spec.index(i, j)];
  }

  // L2 norm with volume weights.
  double norm2() const { return std::sqrt(spec.cell_volume()) * values.norm(); }

  double max_abs() const { return values.cwiseAbs().maxCoeff(); }
};

template <class F>
GridField sample_field(const GridSpec& spec, F&& f) {
  GridField u(spec);
  for (int i = 0; i < spec.n_t; ++i)
    for (int j = 0; j < spec.n_x; ++j)
      u.at(i, j) = f(spec.t_of(i), spec.x_of(j));
  return u;
}

// Centered Gaussian exp(-|z|^2 / (2 width^2)).
inline GridField gaussian_field(const GridSpec& spec, double width) {
  const double s2 = 2.0 * width * width;
  return sample_field(spec, [s2](double t, double x) {
    return std::complex<double>(std::exp(-(t * t + x * x) / s2), 0.0);
  });
}

// Relative L2 mass of the field in the outer fraction of the box (points
// with |t| > (1-frac) T or |x| > (1-frac) X). Interior-support check.
inline double outer_tail_fraction(const GridField& u, double frac = 0.25) {
  const GridSpec& s = u.spec;
  double tail = 0.0, total = 0.0;
  for (int i = 0; i < s.n_t; ++i)
    for (int j = 0; j < s.n_x; ++j) {
      const double m = std::norm(u.at(i, j));
      total += m;
      if (std::abs(s.t_of(i)) > (1.0 - frac) * s.T ||
          std::abs(s.x_of(j)) > (1.0 - frac) * s.X)
        tail += m;
    }
  return total == 0.0 ? 0.0 : std::sqrt(tail / total);
}

// Relative L2 difference restricted to the centered window covering the
// given fraction of each axis. Both fields must share grid sites there, but
// may live on different boxes as long as spacings match.
inline double window_rel_error(const GridField& a, const GridField& b,
                               double frac = 0.5) {
  const GridSpec& sa = a.spec;
  const GridSpec& sb = b.spec;
  if (std::abs(sa.h_t() - sb.h_t()) > 1e-12 ||
      std::abs(sa.h_x() - sb.h_x()) > 1e-12)
    throw std::invalid_argument("window_rel_error: spacings differ");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < sa.n_t; ++i)
    for (int j = 0; j < sa.n_x; ++j) {
      const double t = sa.t_of(i), x = sa.x_of(j);
      if (std::abs(t) > frac * sa.T || std::abs(x) > frac * sa.X) continue;
      // Locate the same site on b's grid.
      const double bi = (t + sb.T) / sb.h_t();
      const double bj = (x + sb.X) / sb.h_x();
      const int ib = static_cast<int>(std::lround(bi));
      const int jb = static_cast<int>(std::lround(bj));
      if (ib < 0 || ib >= sb.n_t || jb < 0 || jb >= sb.n_x) continue;
      if (std::abs(bi - ib) > 1e-6 || std::abs(bj - jb) > 1e-6)
        throw std::invalid_argument("window_rel_error: grids not aligned");
      num += std::norm(a.at(i, j) - b.at(ib, jb));
      den += std::norm(b.at(ib, jb));
    }
  if (den == 0.0) throw std::invalid_argument("window_rel_error: zero field");
  return std::sqrt(num / den);
}

}  // namespace desclab
