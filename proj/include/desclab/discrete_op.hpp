#pragma once

// Sparse real-coefficient discretizations of P = -(1/sqrt|g|) d_mu (sqrt|g|
// g^{mu nu} d_nu) + msq + A on a Dirichlet-zero box, in two stencil modes:
//
//  * staggered_symmetric — flux form with edge-midpoint coefficients for the
//    diagonal metric terms and cell-assembled averaged gradients for the
//    cross terms. The kinetic matrix K is exactly symmetric, so P is exactly
//    Hermitian in the volume-weighted inner product (up to roundoff).
//
//  * pointwise_naive — nodal expansion g^{mu nu} d2_{mu nu} + b^nu d_nu with
//    centered differences of the nodal coefficients. Consistent to O(h^2)
//    but honestly nonsymmetric; its weighted-Hermiticity defect decays at
//    second order and serves as a convergence diagnostic.
//
// The optional first-order term is A = (i/2)(V - V*) for V = amp * rho_total
// * D_x (centered), with V* the adjoint in the same inner product; A is
// Hermitian by construction.

#include <complex>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "desclab/geometry.hpp"
#include "desclab/grid.hpp"
#include "desclab/metrics.hpp"

namespace desclab {

enum class StencilMode { staggered_symmetric, pointwise_naive };

inline const char* stencil_mode_name(StencilMode m) {
  return m == StencilMode::staggered_symmetric ? "staggered_symmetric"
                                               : "pointwise_naive";
}

class DiscreteOperator {
 public:
  using SpMat = Eigen::SparseMatrix<double>;
  using SpMatC = Eigen::SparseMatrix<std::complex<double>>;

  DiscreteOperator(std::shared_ptr<const Metric> metric, double msq,
                   double a_amplitude, const GridSpec& spec, StencilMode mode)
      : metric_(std::move(metric)),
        msq_(msq),
        a_amplitude_(a_amplitude),
        spec_(spec),
        mode_(mode) {
    if (metric_->dim() != 1)
      throw std::invalid_argument("grid discretization expects d = 1");
    if (spec_.n_t < 4 || spec_.n_x < 4)
      throw std::invalid_argument("grid too small");
    ni_ = spec_.n_t - 2;
    nj_ = spec_.n_x - 2;
    build();
  }

  const GridSpec& spec() const { return spec_; }
  StencilMode mode() const { return mode_; }
  double msq() const { return msq_; }
  double a_amplitude() const { return a_amplitude_; }
  const Metric& metric() const { return *metric_; }
  long interior_size() const { return static_cast<long>(ni_) * nj_; }

  // Real second-order part as an interior matrix (the full operator is
  // real_part() + A with A assembled on demand).
  const SpMat& real_part() const { return P_real_; }
  const Eigen::VectorXd& volume_weights() const { return Mdiag_; }

  bool interior_index(int i, int j, long& out) const {
    if (i < 1 || i > spec_.n_t - 2 || j < 1 || j > spec_.n_x - 2) return false;
    out = static_cast<long>(i - 1) * nj_ + (j - 1);
    return true;
  }

  Eigen::VectorXcd restrict_interior(const GridField& u) const {
    if (!(u.spec == spec_))
      throw std::invalid_argument("field/operator grid mismatch");
    Eigen::VectorXcd v(interior_size());
    for (int i = 1; i <= ni_; ++i)
      for (int j = 1; j <= nj_; ++j)
        v[static_cast<long>(i - 1) * nj_ + (j - 1)] = u.at(i, j);
    return v;
  }

  GridField extend_interior(const Eigen::VectorXcd& v) const {
    GridField u(spec_);
    for (int i = 1; i <= ni_; ++i)
      for (int j = 1; j <= nj_; ++j)
        u.at(i, j) = v[static_cast<long>(i - 1) * nj_ + (j - 1)];
    return u;
  }

  // Full operator applied to an interior vector.
  Eigen::VectorXcd apply_interior(const Eigen::VectorXcd& u) const {
    Eigen::VectorXcd out = P_real_ * u;
    if (a_amplitude_ != 0.0) {
      const std::complex<double> ih(0.0, 0.5);
      Eigen::VectorXcd vu = V_ * u;
      Eigen::VectorXcd vtu =
          Minv_.asDiagonal() * (V_.transpose() * (Mdiag_.asDiagonal() * u));
      out += ih * (vu - vtu);
    }
    return out;
  }

  GridField apply(const GridField& u) const {
    return extend_interior(apply_interior(restrict_interior(u)));
  }

  // Volume-weighted inner product <u, v>_g over the interior.
  std::complex<double> inner(const GridField& u, const GridField& v) const {
    const Eigen::VectorXcd ui = restrict_interior(u);
    const Eigen::VectorXcd vi = restrict_interior(v);
    return weighted_dot(ui, vi);
  }

  // |<Pu, v> - <u, Pv>| in the weighted inner product.
  double symmetry_defect(const GridField& u, const GridField& v) const {
    const Eigen::VectorXcd ui = restrict_interior(u);
    const Eigen::VectorXcd vi = restrict_interior(v);
    const Eigen::VectorXcd pu = apply_interior(ui);
    const Eigen::VectorXcd pv = apply_interior(vi);
    return std::abs(weighted_dot(pu, vi) - weighted_dot(ui, pv));
  }

  // sum_k M_k a_k conj(b_k)
  std::complex<double> weighted_dot(const Eigen::VectorXcd& a,
                                    const Eigen::VectorXcd& b) const {
    std::complex<double> s(0.0, 0.0);
    for (long k = 0; k < a.size(); ++k) s += Mdiag_[k] * a[k] * std::conj(b[k]);
    return s;
  }

  // Complex sparse matrix of P + lambda on the interior.
  SpMatC shifted_matrix(std::complex<double> lambda) const {
    SpMatC C = P_real_.cast<std::complex<double>>();
    if (a_amplitude_ != 0.0) {
      const std::complex<double> ih(0.0, 0.5);
      SpMat vt = Minv_.asDiagonal() * SpMat(V_.transpose()) *
                 Mdiag_.asDiagonal();
      C += ih * (V_.cast<std::complex<double>>() -
                 vt.cast<std::complex<double>>());
    }
    SpMatC I(interior_size(), interior_size());
    I.setIdentity();
    return C + lambda * I;
  }

  // Symmetrized real part S = M^{1/2} (real part) M^{-1/2}; exactly
  // symmetric in staggered mode.
  SpMat symmetrized_real() const {
    Eigen::VectorXd sq = Mdiag_.cwiseSqrt();
    Eigen::VectorXd isq = sq.cwiseInverse();
    return sq.asDiagonal() * P_real_ * isq.asDiagonal();
  }

  // Max-norm asymmetry of the symmetrized real part (exact-zero check for
  // the staggered stencil; O(h^2) for the naive stencil).
  double matrix_asymmetry() const {
    SpMat S = symmetrized_real();
    SpMat D = SpMat(S.transpose()) - S;
    double mx = 0.0;
    for (int k = 0; k < D.outerSize(); ++k)
      for (SpMat::InnerIterator it(D, k); it; ++it)
        mx = std::max(mx, std::abs(it.value()));
    return mx;
  }

 private:
  void build() {
    const int nt = spec_.n_t, nx = spec_.n_x;
    const double ht = spec_.h_t(), hx = spec_.h_x(), vol = ht * hx;

    // Nodal coefficient tables.
    Eigen::MatrixXd Ctt(nt, nx), Cxx(nt, nx), Ctx(nt, nx), rootg(nt, nx);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nx; ++j) {
        Eigen::Matrix2d gi, g;
        eval_metric(spec_.t_of(i), spec_.x_of(j), g, gi);
        const double det = g.determinant();
        if (!(det < 0.0))
          throw std::runtime_error(
              "metric signature failure on grid (det >= 0)");
        const double rg = std::sqrt(-det);
        rootg(i, j) = rg;
        Ctt(i, j) = rg * gi(0, 0);
        Cxx(i, j) = rg * gi(1, 1);
        Ctx(i, j) = rg * gi(0, 1);
      }

    Mdiag_.resize(interior_size());
    for (int i = 1; i <= ni_; ++i)
      for (int j = 1; j <= nj_; ++j)
        Mdiag_[static_cast<long>(i - 1) * nj_ + (j - 1)] = rootg(i, j) * vol;
    Minv_ = Mdiag_.cwiseInverse();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(interior_size()) * 9);
    auto add = [&](int i, int j, int i2, int j2, double w) {
      long r, c;
      if (!interior_index(i, j, r) || !interior_index(i2, j2, c)) return;
      if (w != 0.0) trip.emplace_back(r, c, w);
    };

    if (mode_ == StencilMode::staggered_symmetric) {
      // K assembled first (symmetric), then P_real = -M^{-1} K + msq.
      // t-direction fluxes with edge-midpoint coefficients.
      for (int i = 0; i < nt - 1; ++i)
        for (int j = 0; j < nx; ++j) {
          Eigen::Matrix2d g, gi;
          eval_metric(spec_.t_of(i) + 0.5 * ht, spec_.x_of(j), g, gi);
          const double c = std::sqrt(-g.determinant()) * gi(0, 0);
          const double w = c * hx / ht;  // vol * c / ht^2
          // flux c (u_{i+1} - u_i) enters rows i and i+1 with opposite signs
          add(i, j, i, j, -w);
          add(i, j, i + 1, j, w);
          add(i + 1, j, i + 1, j, -w);
          add(i + 1, j, i, j, w);
        }
      // x-direction fluxes.
      for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nx - 1; ++j) {
          Eigen::Matrix2d g, gi;
          eval_metric(spec_.t_of(i), spec_.x_of(j) + 0.5 * hx, g, gi);
          const double c = std::sqrt(-g.determinant()) * gi(1, 1);
          const double w = c * ht / hx;
          add(i, j, i, j, -w);
          add(i, j, i, j + 1, w);
          add(i, j + 1, i, j + 1, -w);
          add(i, j + 1, i, j, w);
        }
      // Cross terms assembled per cell with averaged gradients; the cell
      // bilinear form  -vol_c Ctx (Dt u Dx v + Dx u Dt v)  keeps K symmetric.
      for (int i = 0; i < nt - 1; ++i)
        for (int j = 0; j < nx - 1; ++j) {
          Eigen::Matrix2d g, gi;
          eval_metric(spec_.t_of(i) + 0.5 * ht, spec_.x_of(j) + 0.5 * hx, g,
                      gi);
          const double ctx = std::sqrt(-g.determinant()) * gi(0, 1);
          if (ctx == 0.0) continue;
          struct Corner {
            int i, j;
            double dt, dx;
          };
          const Corner corners[4] = {
              {i, j, -0.5 / ht, -0.5 / hx},
              {i + 1, j, 0.5 / ht, -0.5 / hx},
              {i, j + 1, -0.5 / ht, 0.5 / hx},
              {i + 1, j + 1, 0.5 / ht, 0.5 / hx}};
          for (const Corner& p : corners)
            for (const Corner& q : corners) {
              const double w = -vol * ctx * (p.dt * q.dx + p.dx * q.dt);
              add(q.i, q.j, p.i, p.j, w);
            }
        }
      SpMat K(interior_size(), interior_size());
      K.setFromTriplets(trip.begin(), trip.end());
      K_ = K;
      SpMat I(interior_size(), interior_size());
      I.setIdentity();
      P_real_ = SpMat(Minv_.asDiagonal() * K) * -1.0 + msq_ * I;
    } else {
      // Nodal expansion: -(g^{mu nu} d2_{mu nu} u + b^nu d_nu u) + msq u,
      // with b^nu from centered differences of the coefficient tables.
      for (int i = 1; i <= ni_; ++i)
        for (int j = 1; j <= nj_; ++j) {
          Eigen::Matrix2d g, gi;
          eval_metric(spec_.t_of(i), spec_.x_of(j), g, gi);
          const double rg = rootg(i, j);
          const double bt = ((Ctt(i + 1, j) - Ctt(i - 1, j)) / (2 * ht) +
                             (Ctx(i, j + 1) - Ctx(i, j - 1)) / (2 * hx)) /
                            rg;
          const double bx = ((Ctx(i + 1, j) - Ctx(i - 1, j)) / (2 * ht) +
                             (Cxx(i, j + 1) - Cxx(i, j - 1)) / (2 * hx)) /
                            rg;
          // second derivatives
          add(i, j, i + 1, j, -gi(0, 0) / (ht * ht));
          add(i, j, i - 1, j, -gi(0, 0) / (ht * ht));
          add(i, j, i, j, 2.0 * gi(0, 0) / (ht * ht));
          add(i, j, i, j + 1, -gi(1, 1) / (hx * hx));
          add(i, j, i, j - 1, -gi(1, 1) / (hx * hx));
          add(i, j, i, j, 2.0 * gi(1, 1) / (hx * hx));
          const double cmix = -2.0 * gi(0, 1) / (4.0 * ht * hx);
          add(i, j, i + 1, j + 1, cmix);
          add(i, j, i - 1, j - 1, cmix);
          add(i, j, i + 1, j - 1, -cmix);
          add(i, j, i - 1, j + 1, -cmix);
          // first derivatives
          add(i, j, i + 1, j, -bt / (2 * ht));
          add(i, j, i - 1, j, bt / (2 * ht));
          add(i, j, i, j + 1, -bx / (2 * hx));
          add(i, j, i, j - 1, bx / (2 * hx));
          // mass
          add(i, j, i, j, msq_);
        }
      SpMat P(interior_size(), interior_size());
      P.setFromTriplets(trip.begin(), trip.end());
      P_real_ = P;
    }

    if (a_amplitude_ != 0.0) {
      std::vector<Eigen::Triplet<double>> vt;
      for (int i = 1; i <= ni_; ++i)
        for (int j = 1; j <= nj_; ++j) {
          SpacetimePoint z = point_radial(spec_.t_of(i), 0.0, 1);
          z.x[0] = spec_.x_of(j);
          const double coef = a_amplitude_ * total_bdf(z);
          long r, c;
          interior_index(i, j, r);
          if (interior_index(i, j + 1, c))
            vt.emplace_back(r, c, coef / (2 * hx));
          if (interior_index(i, j - 1, c))
            vt.emplace_back(r, c, -coef / (2 * hx));
        }
      V_.resize(interior_size(), interior_size());
      V_.setFromTriplets(vt.begin(), vt.end());
    }
  }

  void eval_metric(double t, double x, Eigen::Matrix2d& g,
                   Eigen::Matrix2d& gi) const {
    SpacetimePoint z = point_radial(t, 0.0, 1);
    z.x[0] = x;
    const Eigen::MatrixXd gg = metric_->g(z);
    g = gg;
    gi = metric_->ginv(z);
  }

  std::shared_ptr<const Metric> metric_;
  double msq_;
  double a_amplitude_;
  GridSpec spec_;
  StencilMode mode_;
  int ni_ = 0, nj_ = 0;
  SpMat K_;       // staggered kinetic matrix (empty in naive mode)
  SpMat P_real_;  // real part of P on the interior
  SpMat V_;       // raw first-order field (empty when amplitude is 0)
  Eigen::VectorXd Mdiag_, Minv_;
};

}  // namespace desclab
