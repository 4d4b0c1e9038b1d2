#pragma once

// Discrete-torus Fourier calculus: FFT wrappers, the exact free resolvent of
// the complex-shifted wave operator, spectral derivatives, and weighted
// sup-seminorms used for Schwartz-regularity diagnostics.
//
// Conventions. The operator is P = Op(-tau^2 + xi^2) + msq, i.e. the wave
// operator whose Fourier multiplier on the grid dual is p(tau, xi) =
// -tau^2 + xi^2 + msq, and the equation solved is (P + lambda) u = f. The
// classical retarded-style formula u = -F^{-1}[F f / (tau^2 - xi^2 +
// lambda_B)] is the same inverse under the translation lambda_B = -lambda.

#include <complex>
#include <stdexcept>

#include <fftw3.h>

#include "desclab/grid.hpp"

namespace desclab {

inline void fft2_inplace(GridField& u, int sign) {
  u.spec.validate_fourier();
  fftw_complex* data = reinterpret_cast<fftw_complex*>(u.values.data());
  fftw_plan plan = fftw_plan_dft_2d(u.spec.n_t, u.spec.n_x, data, data, sign,
                                    FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  if (sign == FFTW_BACKWARD) u.values /= static_cast<double>(u.spec.size());
}

inline GridField fft2(const GridField& u) {
  GridField v = u;
  fft2_inplace(v, FFTW_FORWARD);
  return v;
}

inline GridField ifft2(const GridField& u) {
  GridField v = u;
  fft2_inplace(v, FFTW_BACKWARD);
  return v;
}

// Multiply in frequency space by a function of (tau, xi).
template <class M>
GridField apply_multiplier(const GridField& u, M&& mult) {
  GridField v = fft2(u);
  for (int i = 0; i < v.spec.n_t; ++i)
    for (int j = 0; j < v.spec.n_x; ++j)
      v.at(i, j) *= mult(v.spec.tau_of(i), v.spec.xi_of(j));
  fft2_inplace(v, FFTW_BACKWARD);
  return v;
}

// u with (P + lambda) applied through the exact discrete symbol.
inline GridField apply_free_operator(const GridField& u,
                                     std::complex<double> lambda,
                                     double msq = 0.0) {
  return apply_multiplier(u, [&](double tau, double xi) {
    return std::complex<double>(-tau * tau + xi * xi + msq) + lambda;
  });
}

// Exact inverse of (P + lambda) on the discrete torus. The shifted
// multiplier has |imag| = |Im lambda| > 0 everywhere, so the division is
// well defined and || u ||_2 <= || f ||_2 / |Im lambda|.
inline GridField free_resolvent(const GridField& f, std::complex<double> lambda,
                                double msq = 0.0) {
  if (lambda.imag() == 0.0)
    throw std::invalid_argument("free_resolvent requires Im(lambda) != 0");
  return apply_multiplier(f, [&](double tau, double xi) {
    return 1.0 /
           (std::complex<double>(-tau * tau + xi * xi + msq) + lambda);
  });
}

// The classical formula written literally, u = -F^{-1}[F f / (tau^2 - xi^2 +
// lambda_B)]; equals free_resolvent(f, -lambda_B).
inline GridField free_resolvent_classical(const GridField& f,
                                          std::complex<double> lambda_B) {
  if (lambda_B.imag() == 0.0)
    throw std::invalid_argument(
        "free_resolvent_classical requires Im(lambda_B) != 0");
  return apply_multiplier(f, [&](double tau, double xi) {
    return -1.0 / (std::complex<double>(tau * tau - xi * xi) + lambda_B);
  });
}

// Spectral partial derivative d_t^{a_t} d_x^{a_x}.
inline GridField spectral_derivative(const GridField& u, int a_t, int a_x) {
  if (a_t < 0 || a_x < 0) throw std::invalid_argument("negative order");
  const std::complex<double> I(0.0, 1.0);
  return apply_multiplier(u, [&](double tau, double xi) {
    return std::pow(I * tau, a_t) * std::pow(I * xi, a_x);
  });
}

// sup over the grid of (1 + |z|^2)^{N/2} |d^alpha u|, derivatives spectral.
inline double weighted_seminorm(const GridField& u, double N, int a_t,
                                int a_x) {
  if (N > 6.0 || a_t + a_x > 3)
    throw std::invalid_argument(
        "weighted_seminorm: supported range is N <= 6, |alpha| <= 3");
  const GridField du =
      (a_t == 0 && a_x == 0) ? u : spectral_derivative(u, a_t, a_x);
  double sup = 0.0;
  for (int i = 0; i < du.spec.n_t; ++i)
    for (int j = 0; j < du.spec.n_x; ++j) {
      const double t = du.spec.t_of(i), x = du.spec.x_of(j);
      const double w = std::pow(1.0 + t * t + x * x, 0.5 * N);
      sup = std::max(sup, w * std::abs(du.at(i, j)));
    }
  return sup;
}

// Seminorm battery N in {0,...,4}, |alpha| <= 2 (15 derivative/weight
// combinations x 5 weights collapsed to the documented grid).
struct SeminormTable {
  struct Entry {
    double N;
    int a_t, a_x;
    double value;
  };
  std::vector<Entry> entries;

  double max_rel_change(const SeminormTable& other) const {
    if (entries.size() != other.entries.size())
      throw std::invalid_argument("seminorm tables differ in shape");
    double worst = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const double a = entries[k].value, b = other.entries[k].value;
      const double scale = std::max(a, b);
      if (scale > 0.0) worst = std::max(worst, std::abs(a - b) / scale);
    }
    return worst;
  }
};

inline SeminormTable seminorm_table(const GridField& u, double N_max = 4.0,
                                    int alpha_max = 2) {
  SeminormTable tab;
  for (int N = 0; N <= static_cast<int>(N_max); N += 2)
    for (int a_t = 0; a_t <= alpha_max; ++a_t)
      for (int a_x = 0; a_t + a_x <= alpha_max; ++a_x)
        tab.entries.push_back(
            {static_cast<double>(N), a_t, a_x,
             weighted_seminorm(u, static_cast<double>(N), a_t, a_x)});
  return tab;
}

}  // namespace desclab
