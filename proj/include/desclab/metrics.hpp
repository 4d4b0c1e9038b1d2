#pragma once

// Metric zoo: Lorentzian metrics of the form
//
//   g = eta + sum_i c_i(z) * omega_i(z) omega_i(z)^T
//
// with analytically known coefficients, covectors, and first derivatives.
// Includes flat space, static and null-form black-hole metrics, a glued
// radiating-mass spacetime interpolating between two masses through a
// bounded emission epoch, and adjustable perturbation classes. A smoothed
// retarded-time coordinate change ("tortoise map") and the corresponding
// pushforward metric expose how coordinate choice affects decay at the null
// faces, quantified by decay-order fits of frame-contracted perturbations.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desclab/fit.hpp"
#include "desclab/geometry.hpp"

namespace desclab {

inline Eigen::MatrixXd minkowski_eta(int d) {
  Eigen::MatrixXd eta = Eigen::MatrixXd::Identity(1 + d, 1 + d);
  eta(0, 0) = -1.0;
  return eta;
}

// Derivative of the clamped quintic smoothstep.
inline double smoothstep_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

// Second derivative of the clamped quintic smoothstep.
inline double smoothstep_dd(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
}

// Smooth plateau a -> b as s crosses [lo, hi].
inline double plateau(double s, double lo, double hi, double a, double b) {
  return a + (b - a) * smoothstep((s - lo) / (hi - lo));
}

inline double plateau_d(double s, double lo, double hi, double a, double b) {
  return (b - a) * smoothstep_d((s - lo) / (hi - lo)) / (hi - lo);
}

// ---------------------------------------------------------------------------
// Metric interface

class Metric {
 public:
  virtual ~Metric() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;  // spatial dimension d
  virtual bool in_domain(const SpacetimePoint&) const { return true; }

  // Covariant metric, (1+d) x (1+d), coordinates ordered (t, x_1..x_d).
  virtual Eigen::MatrixXd g(const SpacetimePoint& z) const = 0;

  // partial_mu g; mu = 0 is time. Default: central finite differences.
  virtual Eigen::MatrixXd dg(const SpacetimePoint& z, int mu) const {
    return fd_dg(z, mu);
  }

  Eigen::MatrixXd ginv(const SpacetimePoint& z) const {
    return g(z).inverse();
  }

  // partial_mu (g^{-1}) = -g^{-1} (partial_mu g) g^{-1}.
  Eigen::MatrixXd dginv(const SpacetimePoint& z, int mu) const {
    const Eigen::MatrixXd gi = ginv(z);
    return -gi * dg(z, mu) * gi;
  }

  Eigen::MatrixXd fd_dg(const SpacetimePoint& z, int mu,
                        double rel_step = 1e-4) const {
    SpacetimePoint zp = z, zm = z;
    double scale;
    if (mu == 0) {
      scale = rel_step * (1.0 + std::abs(z.t));
      zp.t += scale;
      zm.t -= scale;
    } else {
      scale = rel_step * (1.0 + std::abs(z.x[mu - 1]));
      zp.x[mu - 1] += scale;
      zm.x[mu - 1] -= scale;
    }
    return (g(zp) - g(zm)) / (2.0 * scale);
  }
};

using MetricPtr = std::shared_ptr<const Metric>;

// ---------------------------------------------------------------------------
// Rank-one building blocks

namespace rank1 {

// A covector field omega(z) with analytic spatial structure.
enum class Covector { dt, dr, dt_minus_dr, dt_plus_dr };

inline Covector covector_from_name(const std::string& s) {
  if (s == "dt") return Covector::dt;
  if (s == "dr") return Covector::dr;
  if (s == "dt-dr") return Covector::dt_minus_dr;
  if (s == "dt+dr") return Covector::dt_plus_dr;
  throw std::invalid_argument("unknown covector: " + s);
}

inline Eigen::VectorXd value(Covector w, const SpacetimePoint& z) {
  const int d = z.d();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1 + d);
  const double r = z.r();
  switch (w) {
    case Covector::dt:
      v[0] = 1.0;
      break;
    case Covector::dr:
      v.tail(d) = z.x / r;
      break;
    case Covector::dt_minus_dr:
      v[0] = 1.0;
      v.tail(d) = -z.x / r;
      break;
    case Covector::dt_plus_dr:
      v[0] = 1.0;
      v.tail(d) = z.x / r;
      break;
  }
  return v;
}

// partial_mu omega.
inline Eigen::VectorXd derivative(Covector w, const SpacetimePoint& z,
                                  int mu) {
  const int d = z.d();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1 + d);
  if (w == Covector::dt || mu == 0) return v;
  const double r = z.r();
  const Eigen::VectorXd xhat = z.x / r;
  // partial_j (x_i / r) = (delta_ij - xhat_i xhat_j) / r
  const int j = mu - 1;
  Eigen::VectorXd dxhat = -xhat[j] * xhat / r;
  dxhat[j] += 1.0 / r;
  switch (w) {
    case Covector::dr:
    case Covector::dt_plus_dr:
      v.tail(d) = dxhat;
      break;
    case Covector::dt_minus_dr:
      v.tail(d) = -dxhat;
      break;
    case Covector::dt:
      break;
  }
  return v;
}

}  // namespace rank1

// A single term c(z) * omega(z) omega(z)^T with analytic gradient of c.
struct RankOneTerm {
  std::function<double(const SpacetimePoint&)> c;
  std::function<Eigen::VectorXd(const SpacetimePoint&)> grad_c;  // length 1+d
  rank1::Covector omega;
};

// Metric assembled from eta plus rank-one terms.
class RankOneMetric : public Metric {
 public:
  RankOneMetric(std::string name, int d, std::vector<RankOneTerm> terms,
                std::function<bool(const SpacetimePoint&)> domain = nullptr)
      : name_(std::move(name)),
        d_(d),
        terms_(std::move(terms)),
        domain_(std::move(domain)) {}

  std::string name() const override { return name_; }
  int dim() const override { return d_; }

  bool in_domain(const SpacetimePoint& z) const override {
    return domain_ ? domain_(z) : true;
  }

  Eigen::MatrixXd g(const SpacetimePoint& z) const override {
    Eigen::MatrixXd out = minkowski_eta(d_);
    for (const auto& term : terms_) {
      const Eigen::VectorXd w = rank1::value(term.omega, z);
      out += term.c(z) * w * w.transpose();
    }
    return out;
  }

  Eigen::MatrixXd dg(const SpacetimePoint& z, int mu) const override {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(1 + d_, 1 + d_);
    for (const auto& term : terms_) {
      const Eigen::VectorXd w = rank1::value(term.omega, z);
      const Eigen::VectorXd dw = rank1::derivative(term.omega, z, mu);
      const double c = term.c(z);
      const double dc = term.grad_c(z)[mu];
      out += dc * w * w.transpose() +
             c * (dw * w.transpose() + w * dw.transpose());
    }
    return out;
  }

 private:
  std::string name_;
  int d_;
  std::vector<RankOneTerm> terms_;
  std::function<bool(const SpacetimePoint&)> domain_;
};

// ---------------------------------------------------------------------------
// Zoo constructors

inline MetricPtr make_minkowski(int d) {
  return std::make_shared<RankOneMetric>("minkowski", d,
                                         std::vector<RankOneTerm>{});
}

// Static black-hole metric in the naive diagonal form
//   g = eta + (2m/r) dt^2 + (2m/(r-2m)) dr^2,   valid for r > 2m.
inline MetricPtr make_schwarzschild_naive(double m, int d) {
  RankOneTerm tt{
      [m](const SpacetimePoint& z) { return 2.0 * m / z.r(); },
      [m](const SpacetimePoint& z) {
        const int d_ = z.d();
        const double r = z.r();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(1 + d_);
        grad.tail(d_) = -2.0 * m / (r * r * r) * z.x;
        return grad;
      },
      rank1::Covector::dt};
  RankOneTerm rr{
      [m](const SpacetimePoint& z) { return 2.0 * m / (z.r() - 2.0 * m); },
      [m](const SpacetimePoint& z) {
        const int d_ = z.d();
        const double r = z.r();
        const double s = r - 2.0 * m;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(1 + d_);
        grad.tail(d_) = -2.0 * m / (s * s) * (z.x / r);
        return grad;
      },
      rank1::Covector::dr};
  auto domain = [m](const SpacetimePoint& z) { return z.r() > 2.0 * m; };
  return std::make_shared<RankOneMetric>(
      "schwarzschild_naive", d, std::vector<RankOneTerm>{tt, rr}, domain);
}

// Null (ingoing-free, outgoing-radiation-adapted) form of the same metric:
//   g = eta + (2m/r) (dt - dr)^2.
inline MetricPtr make_schwarzschild_ef(double m, int d) {
  RankOneTerm term{
      [m](const SpacetimePoint& z) { return 2.0 * m / z.r(); },
      [m](const SpacetimePoint& z) {
        const int d_ = z.d();
        const double r = z.r();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(1 + d_);
        grad.tail(d_) = -2.0 * m / (r * r * r) * z.x;
        return grad;
      },
      rank1::Covector::dt_minus_dr};
  auto domain = [m](const SpacetimePoint& z) { return z.r() > 2.0 * m; };
  return std::make_shared<RankOneMetric>(
      "schwarzschild_ef", d, std::vector<RankOneTerm>{term}, domain);
}

// ---------------------------------------------------------------------------
// Glued radiating-mass spacetime
//
// Exactly flat in a core ball, exactly of null-radiation form with retarded
// mass m_out(t-r) at late times, with advanced mass m_in(-t-r) at early
// times, blended over a bounded time band |t| <= t_band. The construction is
// exactly symmetric under time reflection combined with swapping the initial
// and final masses.

struct VaidyaParams {
  double mass_initial = 0.5;  // early-time mass (advanced form)
  double mass_mid = 1.0;      // mass before the emission epoch
  double mass_final = 0.75;   // late-time mass (retarded form)
  double v0 = 0.0;            // emission epoch in retarded/advanced time
  double v1 = 10.0;
  double r_core = 20.0;  // exactly flat for r <= r_core/2, glued by r_core
  double t_band = 2.0;   // advanced/retarded blend band |t| <= t_band

  VaidyaParams swapped_masses() const {
    VaidyaParams p = *this;
    std::swap(p.mass_initial, p.mass_final);
    return p;
  }
};

inline VaidyaParams desk_vaidya_params() { return {}; }

// Parameters scaled down so all transition scales fit inside grid boxes of
// half-width ~6.4.
inline VaidyaParams grid_vaidya_params() {
  VaidyaParams p;
  p.mass_initial = 0.2;
  p.mass_mid = 0.3;
  p.mass_final = 0.25;
  p.v0 = 0.0;
  p.v1 = 2.0;
  p.r_core = 4.0;
  p.t_band = 1.0;
  return p;
}

class VaidyaMetric : public Metric {
 public:
  VaidyaMetric(const VaidyaParams& p, int d) : p_(p), d_(d) {}

  std::string name() const override { return "vaidya_glued"; }
  int dim() const override { return d_; }

  double mass_out(double s) const {
    return plateau(s, p_.v0, p_.v1, p_.mass_mid, p_.mass_final);
  }
  double mass_out_d(double s) const {
    return plateau_d(s, p_.v0, p_.v1, p_.mass_mid, p_.mass_final);
  }
  double mass_in(double s) const {
    return plateau(s, p_.v0, p_.v1, p_.mass_mid, p_.mass_initial);
  }
  double mass_in_d(double s) const {
    return plateau_d(s, p_.v0, p_.v1, p_.mass_mid, p_.mass_initial);
  }

  // Future/past weights over the blend band.
  double phi_plus(double t) const {
    return smoothstep((t + p_.t_band) / (2.0 * p_.t_band));
  }
  double phi_plus_d(double t) const {
    return smoothstep_d((t + p_.t_band) / (2.0 * p_.t_band)) /
           (2.0 * p_.t_band);
  }

  // Radial gluing factor, zero on the core ball.
  double beta(double r) const {
    return smoothstep((r - 0.5 * p_.r_core) / (0.5 * p_.r_core));
  }
  double beta_d(double r) const {
    return smoothstep_d((r - 0.5 * p_.r_core) / (0.5 * p_.r_core)) /
           (0.5 * p_.r_core);
  }

  Eigen::MatrixXd g(const SpacetimePoint& z) const override {
    Eigen::MatrixXd out = minkowski_eta(d_);
    const double r = z.r();
    const double b = (r > 0.0) ? beta(r) : 0.0;
    if (b == 0.0) return out;
    const double t = z.t;
    const double fp = phi_plus(t);
    const double fm = 1.0 - fp;
    if (fp > 0.0) {
      const double c = fp * 2.0 * mass_out(t - r) / r;
      const Eigen::VectorXd w = rank1::value(rank1::Covector::dt_minus_dr, z);
      out += b * c * w * w.transpose();
    }
    if (fm > 0.0) {
      const double c = fm * 2.0 * mass_in(-t - r) / r;
      const Eigen::VectorXd w = rank1::value(rank1::Covector::dt_plus_dr, z);
      out += b * c * w * w.transpose();
    }
    return out;
  }

  Eigen::MatrixXd dg(const SpacetimePoint& z, int mu) const override {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(1 + d_, 1 + d_);
    const double r = z.r();
    if (r <= 0.0) return out;
    const double b = beta(r);
    const double db_mu = (mu == 0) ? 0.0 : beta_d(r) * z.x[mu - 1] / r;
    if (b == 0.0 && db_mu == 0.0) return out;

    const double t = z.t;
    const double fp = phi_plus(t);
    const double fm = 1.0 - fp;
    const double dfp = phi_plus_d(t);

    struct Piece {
      double phi, dphi_mu, mass, dmass_mu;
      rank1::Covector w;
    };
    const double dr_mu = (mu == 0) ? 0.0 : z.x[mu - 1] / r;
    std::vector<Piece> pieces;
    pieces.push_back({fp, (mu == 0) ? dfp : 0.0, mass_out(t - r),
                      mass_out_d(t - r) * ((mu == 0) ? 1.0 : -dr_mu),
                      rank1::Covector::dt_minus_dr});
    pieces.push_back({fm, (mu == 0) ? -dfp : 0.0, mass_in(-t - r),
                      mass_in_d(-t - r) * ((mu == 0) ? -1.0 : -dr_mu),
                      rank1::Covector::dt_plus_dr});

    for (const auto& pc : pieces) {
      if (pc.phi == 0.0 && pc.dphi_mu == 0.0) continue;
      const Eigen::VectorXd w = rank1::value(pc.w, z);
      const Eigen::VectorXd dw = rank1::derivative(pc.w, z, mu);
      const double c = pc.phi * 2.0 * pc.mass / r;
      // d/dmu [phi * 2 m / r]
      const double dc = pc.dphi_mu * 2.0 * pc.mass / r +
                        pc.phi * 2.0 * pc.dmass_mu / r -
                        pc.phi * 2.0 * pc.mass / (r * r) * dr_mu;
      out += (db_mu * c + b * dc) * w * w.transpose() +
             b * c * (dw * w.transpose() + w * dw.transpose());
    }
    return out;
  }

  const VaidyaParams& params() const { return p_; }

 private:
  VaidyaParams p_;
  int d_;
};

inline MetricPtr make_vaidya(const VaidyaParams& p, int d) {
  return std::make_shared<VaidyaMetric>(p, d);
}

// ---------------------------------------------------------------------------
// Perturbation classes

// Compactly supported smooth bump: c(z) = amp * exp(1 - 1/(1-s^2)) for
// s = |z - z0| / radius < 1, zero otherwise.
inline MetricPtr make_bump_perturbation(int d, double amp,
                                        const SpacetimePoint& center,
                                        double radius,
                                        rank1::Covector omega =
                                            rank1::Covector::dt) {
  auto profile = [amp, center, radius](const SpacetimePoint& z) {
    const double dt = z.t - center.t;
    const double dx2 = (z.x - center.x).squaredNorm();
    const double s2 = (dt * dt + dx2) / (radius * radius);
    if (s2 >= 1.0) return 0.0;
    return amp * std::exp(1.0 - 1.0 / (1.0 - s2));
  };
  auto grad = [amp, center, radius, profile](const SpacetimePoint& z) {
    const int d_ = z.d();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(1 + d_);
    const double dt = z.t - center.t;
    const double dx2 = (z.x - center.x).squaredNorm();
    const double s2 = (dt * dt + dx2) / (radius * radius);
    if (s2 >= 1.0) return g;
    const double val = profile(z);
    const double chain = -2.0 / ((1.0 - s2) * (1.0 - s2)) / (radius * radius);
    g[0] = val * chain * dt;
    g.tail(d_) = val * chain * (z.x - center.x);
    return g;
  };
  return std::make_shared<RankOneMetric>(
      "bump", d, std::vector<RankOneTerm>{{profile, grad, omega}});
}

// Symbol-class decaying perturbation: c(z) = amp * w(z)^{-order}.
inline MetricPtr make_symbol_perturbation(int d, double amp, double order,
                                          rank1::Covector omega =
                                              rank1::Covector::dt) {
  auto profile = [amp, order](const SpacetimePoint& z) {
    return amp * std::pow(w_scale(z), -order);
  };
  auto grad = [amp, order](const SpacetimePoint& z) {
    const int d_ = z.d();
    const double w = w_scale(z);
    const double pref = amp * (-order) * std::pow(w, -order - 2.0);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(1 + d_);
    g[0] = pref * z.t;
    g.tail(d_) = pref * z.x;
    return g;
  };
  return std::make_shared<RankOneMetric>(
      "symbol_decay", d, std::vector<RankOneTerm>{{profile, grad, omega}});
}

// ---------------------------------------------------------------------------
// Frame-contracted perturbation size and decay-order fits

// Largest frame-pair contraction |h(V, W)| of a symmetric tensor h.
inline double desc_tensor_norm(const Eigen::MatrixXd& h,
                               const DescFrame& frame) {
  double best = 0.0;
  for (const auto& v : frame.vectors)
    for (const auto& w : frame.vectors) {
      const double val = std::abs(v.components.dot(h * w.components));
      best = std::max(best, val);
    }
  return best;
}

// Size of g - eta at z measured against the blended frame.
inline double metric_perturbation_norm(const Metric& metric,
                                       const SpacetimePoint& z) {
  const Eigen::MatrixXd h = metric.g(z) - minkowski_eta(metric.dim());
  return desc_tensor_norm(h, desc_frame(z));
}

struct DecayFit {
  Face face;
  double param = 0.0;  // slope c or null offset v of the ray family
  double alpha = 0.0;  // decay order: N ~ rho_face^alpha
  double residual = 0.0;
  std::size_t n_samples = 0;
};

// Fit the decay order of the frame-contracted perturbation along one ray
// family: alpha is the slope of log N against log rho_face (positive for
// decaying perturbations since both logs run to -infinity together).
inline DecayFit decay_fit(const Metric& metric, Face face, const RayParams& p,
                          int k_lo = 10, int k_hi = 20) {
  std::vector<double> rhos, norms;
  for (int k = k_lo; k <= k_hi; ++k) {
    const SpacetimePoint z = ray(face, p, k, metric.dim());
    if (!metric.in_domain(z)) continue;
    const double n = metric_perturbation_norm(metric, z);
    if (n <= 0.0) continue;
    rhos.push_back(bdf(face, z));
    norms.push_back(n);
  }
  if (rhos.size() < 8)
    throw std::runtime_error("decay_fit: fewer than 8 usable samples on " +
                             std::string(face_name(face)));
  const LineFit f = fit_loglog(rhos, norms);
  DecayFit out;
  out.face = face;
  out.param = (face == Face::nFf || face == Face::nPf) ? p.v : p.c;
  out.alpha = f.slope;
  out.residual = f.rms_residual;
  out.n_samples = f.n;
  return out;
}

// ---------------------------------------------------------------------------
// Smoothed retarded-time coordinate change ("tortoise map")
//
//   ttilde = t - 2 psi(t/r) kappa(F/(r^2+t^2)) m ln(r - 2m)
//
// psi is an odd smooth switch (0 for |s| <= 0.4, sign(s) for |s| >= 0.8) and
// kappa a smooth cutoff (1 on [0,1/2], 0 on [1,inf)), so the correction is
// active only far out (r^2 + t^2 >= F) near timelike/null directions, where
// it converts static-coordinate time into retarded/advanced time. F is
// doubled until the time-Jacobian stays uniformly positive on a sweep.

class TortoiseMap {
 public:
  TortoiseMap(double m, double F) : m_(m), F_(F) {}

  double mass() const { return m_; }
  double scale() const { return F_; }

  double r_star(double r) const { return r + 2.0 * m_ * std::log(r - 2.0 * m_); }
  double dr_star(double r) const { return 1.0 / (1.0 - 2.0 * m_ / r); }
  double v_star(double t, double r) const { return t - r_star(r); }

  static double psi(double s) {
    const double a = std::abs(s);
    const double v = smoothstep((a - 0.4) / 0.4);
    return (s < 0.0) ? -v : v;
  }
  static double psi_d(double s) {
    const double a = std::abs(s);
    return smoothstep_d((a - 0.4) / 0.4) / 0.4;
  }
  static double psi_dd(double s) {
    const double a = std::abs(s);
    const double v = smoothstep_dd((a - 0.4) / 0.4) / 0.16;
    return (s < 0.0) ? -v : v;
  }
  static double kappa(double s) { return 1.0 - smoothstep(2.0 * s - 1.0); }
  static double kappa_d(double s) { return -2.0 * smoothstep_d(2.0 * s - 1.0); }
  static double kappa_dd(double s) { return -4.0 * smoothstep_dd(2.0 * s - 1.0); }

  double ttilde(double t, double r) const {
    const double cut = kappa(F_ / (r * r + t * t));
    if (cut == 0.0) return t;
    const double sw = psi(t / r);
    if (sw == 0.0) return t;
    return t - 2.0 * sw * cut * m_ * std::log(r - 2.0 * m_);
  }

  // d ttilde / dt and d ttilde / dr.
  double dttilde_dt(double t, double r) const {
    const double q = r * r + t * t;
    const double cut = kappa(F_ / q);
    const double sw = psi(t / r);
    if (cut == 0.0 || (sw == 0.0 && psi_d(t / r) == 0.0)) return 1.0;
    const double lg = 2.0 * m_ * std::log(r - 2.0 * m_);
    const double dcut_dt = kappa_d(F_ / q) * (-F_ * 2.0 * t / (q * q));
    return 1.0 - lg * (psi_d(t / r) / r * cut + sw * dcut_dt);
  }

  double dttilde_dr(double t, double r) const {
    const double q = r * r + t * t;
    const double cut = kappa(F_ / q);
    const double sw = psi(t / r);
    if (cut == 0.0 && kappa_d(F_ / q) == 0.0) return 0.0;
    const double lg = 2.0 * m_ * std::log(r - 2.0 * m_);
    const double dcut_dr = kappa_d(F_ / q) * (-F_ * 2.0 * r / (q * q));
    const double dsw_dr = psi_d(t / r) * (-t / (r * r));
    return -lg * (dsw_dr * cut + sw * dcut_dr) -
           2.0 * sw * cut * m_ / (r - 2.0 * m_);
  }

  // Second partials (d^2 ttilde / dt^2, dt dr, dr^2), needed for the exact
  // derivative of a pushforward metric.  Written via the factorization
  // ttilde = t - L(r) S(t, r) with L = 2m ln(r - 2m), S = psi(t/r)
  // kappa(F/(r^2+t^2)).
  void ttilde_hessian(double t, double r, double& Ttt, double& Ttr,
                      double& Trr) const {
    const double q = r * r + t * t;
    const double s = t / r, k = F_ / q;
    const double ps = psi(s), ps1 = psi_d(s), ps2 = psi_dd(s);
    const double ka = kappa(k), ka1 = kappa_d(k), ka2 = kappa_dd(k);
    if ((ps == 0.0 && ps1 == 0.0 && ps2 == 0.0) ||
        (ka == 0.0 && ka1 == 0.0 && ka2 == 0.0)) {
      Ttt = Ttr = Trr = 0.0;
      return;
    }
    const double L = 2.0 * m_ * std::log(r - 2.0 * m_);
    const double L1 = 2.0 * m_ / (r - 2.0 * m_);
    const double L2 = -2.0 * m_ / ((r - 2.0 * m_) * (r - 2.0 * m_));
    const double st = 1.0 / r, sr = -t / (r * r);
    const double str = -1.0 / (r * r), srr = 2.0 * t / (r * r * r);
    const double kt = -2.0 * F_ * t / (q * q);
    const double kr = -2.0 * F_ * r / (q * q);
    const double ktt = 2.0 * F_ * (4.0 * t * t - q) / (q * q * q);
    const double ktr = 8.0 * F_ * t * r / (q * q * q);
    const double krr = 2.0 * F_ * (4.0 * r * r - q) / (q * q * q);
    const double St = ps1 * st * ka + ps * ka1 * kt;
    const double Sr = ps1 * sr * ka + ps * ka1 * kr;
    const double Stt = ps2 * st * st * ka + 2.0 * ps1 * st * ka1 * kt +
                       ps * (ka2 * kt * kt + ka1 * ktt);
    const double Str = ps2 * st * sr * ka + ps1 * str * ka +
                       ps1 * st * ka1 * kr + ps1 * sr * ka1 * kt +
                       ps * (ka2 * kt * kr + ka1 * ktr);
    const double Srr = ps2 * sr * sr * ka + ps1 * srr * ka +
                       2.0 * ps1 * sr * ka1 * kr +
                       ps * (ka2 * kr * kr + ka1 * krr);
    Ttt = -L * Stt;
    Ttr = -L1 * St - L * Str;
    Trr = -L2 * ps * ka - 2.0 * L1 * Sr - L * Srr;
  }

  SpacetimePoint forward(const SpacetimePoint& z) const {
    SpacetimePoint out = z;
    out.t = ttilde(z.t, z.r());
    return out;
  }

  // Invert ttilde in t at fixed spatial point by Newton iteration.  The
  // inverse feeds finite-difference metric derivatives, so it polishes to
  // near machine precision and accepts a residual-stagnation exit only once
  // a coarse tolerance is already met.
  SpacetimePoint inverse(const SpacetimePoint& zt) const {
    const double r = zt.r();
    const double fine = 1e-13 * (1.0 + std::abs(zt.t));
    const double coarse = 1e-9 * (1.0 + std::abs(zt.t));
    double t = zt.t;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 100; ++it) {
      const double f = ttilde(t, r) - zt.t;
      const double af = std::abs(f);
      if (af < fine || (af < coarse && af >= prev)) {
        SpacetimePoint out = zt;
        out.t = t;
        return out;
      }
      prev = af;
      t -= f / dttilde_dt(t, r);
    }
    throw std::runtime_error("tortoise inverse: Newton failed to converge");
  }

  // Jacobian d(ttilde, x)/d(t, x) at z (original coordinates).
  Eigen::MatrixXd jacobian(const SpacetimePoint& z) const {
    const int d = z.d();
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(1 + d, 1 + d);
    const double r = z.r();
    J(0, 0) = dttilde_dt(z.t, r);
    const double dr_comp = dttilde_dr(z.t, r);
    if (r > 0.0) J.row(0).tail(d) = dr_comp * (z.x / r).transpose();
    return J;
  }

  // True when the retarded-time correction is fully active at z, i.e. the
  // map coincides with t -> t - (r_star - r) near the future null face.
  bool fully_retarded(const SpacetimePoint& z) const {
    const double r = z.r();
    return psi(z.t / r) == 1.0 && kappa(F_ / (r * r + z.t * z.t)) == 1.0;
  }

 private:
  double m_;
  double F_;
};

// Check dttilde/dt >= floor on a sweep of the active region; double F until
// the sweep passes.
inline TortoiseMap make_tortoise(double m, double F0 = 1e4,
                                 double jacobian_floor = 0.1) {
  double F = F0;
  for (int attempt = 0; attempt < 30; ++attempt) {
    TortoiseMap map(m, F);
    bool ok = true;
    // Active region: r^2 + t^2 in [F, 2F] x cone transition |t/r| in
    // [0.4, 0.8]; sweep a generous superset.
    for (int ir = 0; ir <= 80 && ok; ++ir) {
      const double rho = std::sqrt(F) * (0.5 + 0.025 * ir);  // radius sweep
      for (int ia = 0; ia <= 60 && ok; ++ia) {
        const double slope = -3.0 + 0.1 * ia;  // t/r sweep
        const double r = rho / std::sqrt(1.0 + slope * slope);
        if (r <= 2.0 * m + 1.0) continue;
        const double t = slope * r;
        if (map.dttilde_dt(t, r) < jacobian_floor) ok = false;
      }
    }
    if (ok) return map;
    F *= 2.0;
  }
  throw std::runtime_error("tortoise map: no admissible scale found");
}

// Pushforward of a metric along a coordinate change zt = Phi(z):
// (Phi_* g)(zt) = J^{-T} g(z) J^{-1} with J = dPhi/dz at z = Phi^{-1}(zt).
class PushforwardMetric : public Metric {
 public:
  PushforwardMetric(MetricPtr base, TortoiseMap map)
      : base_(std::move(base)), map_(map) {}

  std::string name() const override { return base_->name() + "_tortoise"; }
  int dim() const override { return base_->dim(); }

  bool in_domain(const SpacetimePoint& zt) const override {
    if (zt.r() <= 2.0 * map_.mass()) return false;
    return base_->in_domain(map_.inverse(zt));
  }

  Eigen::MatrixXd g(const SpacetimePoint& zt) const override {
    const SpacetimePoint z = map_.inverse(zt);
    const Eigen::MatrixXd J = map_.jacobian(z);
    const Eigen::MatrixXd A = J.inverse();
    return A.transpose() * base_->g(z) * A;
  }

  // Exact derivative by the chain rule.  With A = J^{-1} and z = Phi^{-1}(zt),
  //   d/dzt^mu [A^T g A] = sum_gamma A(gamma, mu) *
  //       [ (d_gamma A)^T g A + A^T (d_gamma g) A + A^T g (d_gamma A) ],
  // where d_gamma A = -A (d_gamma J) A and d_gamma J holds the second
  // partials of the map (only its time row is non-constant).  Anything less
  // than exact here hurts: a finite-difference version injects a roundoff
  // floor into zetadot that a ray crossing the switch band carries as a
  // permanent fiber error, and the 1e9-length run to the null face magnifies
  // even 1e-11 of that into an O(1) miss in the conserved retarded time.
  Eigen::MatrixXd dg(const SpacetimePoint& zt, int mu) const override {
    const int n = 1 + dim();
    const SpacetimePoint z = map_.inverse(zt);
    const Eigen::MatrixXd J = map_.jacobian(z);
    const Eigen::MatrixXd A = J.inverse();
    const Eigen::MatrixXd G = base_->g(z);

    const double r = z.r();
    double Ttt, Ttr, Trr;
    map_.ttilde_hessian(z.t, r, Ttt, Ttr, Trr);
    const double Tr = map_.dttilde_dr(z.t, r);
    const Eigen::VectorXd xhat = z.x / r;

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int gamma = 0; gamma < n; ++gamma) {
      // Row 0 of d_gamma J: derivative of (T_t, T_r xhat_j) along z^gamma.
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      if (gamma == 0) {
        row(0) = Ttt;
        row.tail(n - 1) = Ttr * xhat.transpose();
      } else {
        const int i = gamma - 1;
        row(0) = Ttr * xhat[i];
        Eigen::RowVectorXd dxhat = -(xhat[i] / r) * xhat.transpose();
        dxhat(i) += 1.0 / r;
        row.tail(n - 1) =
            Trr * xhat[i] * xhat.transpose() + Tr * dxhat;
      }
      Eigen::MatrixXd dJ = Eigen::MatrixXd::Zero(n, n);
      dJ.row(0) = row;
      const Eigen::MatrixXd dA = -A * dJ * A;
      const Eigen::MatrixXd dG = base_->dg(z, gamma);
      const Eigen::MatrixXd term = dA.transpose() * G * A +
                                   A.transpose() * dG * A +
                                   A.transpose() * G * dA;
      out += A(gamma, mu) * term;
    }
    return out;
  }

  const TortoiseMap& map() const { return map_; }
  const Metric& base() const { return *base_; }

 private:
  MetricPtr base_;
  TortoiseMap map_;
};

inline MetricPtr make_schwarzschild_tortoise(double m, int d,
                                             double F0 = 1e4) {
  return std::make_shared<PushforwardMetric>(make_schwarzschild_naive(m, d),
                                             make_tortoise(m, F0));
}

// ---------------------------------------------------------------------------
// Finite-difference curvature oracle

// Christoffel symbols Gamma^l_{mu nu} from analytic first derivatives.
inline std::vector<Eigen::MatrixXd> christoffel(const Metric& metric,
                                                const SpacetimePoint& z) {
  const int n = 1 + metric.dim();
  const Eigen::MatrixXd gi = metric.ginv(z);
  std::vector<Eigen::MatrixXd> dg(n);
  for (int mu = 0; mu < n; ++mu) dg[mu] = metric.dg(z, mu);
  std::vector<Eigen::MatrixXd> gamma(n, Eigen::MatrixXd::Zero(n, n));
  for (int l = 0; l < n; ++l)
    for (int mu = 0; mu < n; ++mu)
      for (int nu = 0; nu < n; ++nu) {
        double s = 0.0;
        for (int sg = 0; sg < n; ++sg)
          s += gi(l, sg) *
               (dg[mu](sg, nu) + dg[nu](sg, mu) - dg[sg](mu, nu));
        gamma[l](mu, nu) = 0.5 * s;
      }
  return gamma;
}

// Ricci scalar with finite-difference derivatives of the Christoffel symbols.
inline double ricci_scalar_fd(const Metric& metric, const SpacetimePoint& z,
                              double step = 1.0) {
  const int n = 1 + metric.dim();
  const auto gamma = christoffel(metric, z);

  // dgamma[mu][l](a, b) = partial_mu Gamma^l_{ab}
  std::vector<std::vector<Eigen::MatrixXd>> dgamma(n);
  for (int mu = 0; mu < n; ++mu) {
    SpacetimePoint zp = z, zm = z;
    if (mu == 0) {
      zp.t += step;
      zm.t -= step;
    } else {
      zp.x[mu - 1] += step;
      zm.x[mu - 1] -= step;
    }
    const auto gp = christoffel(metric, zp);
    const auto gm = christoffel(metric, zm);
    dgamma[mu].resize(n);
    for (int l = 0; l < n; ++l) dgamma[mu][l] = (gp[l] - gm[l]) / (2.0 * step);
  }

  Eigen::MatrixXd ricci = Eigen::MatrixXd::Zero(n, n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double val = 0.0;
      for (int l = 0; l < n; ++l) {
        val += dgamma[l][l](mu, nu) - dgamma[nu][l](mu, l);
        for (int s = 0; s < n; ++s)
          val += gamma[l](l, s) * gamma[s](mu, nu) -
                 gamma[l](nu, s) * gamma[s](mu, l);
      }
      ricci(mu, nu) = val;
    }

  const Eigen::MatrixXd gi = metric.ginv(z);
  return (gi * ricci).trace();
}

// ---------------------------------------------------------------------------
// Registry

struct MetricSpec {
  std::string kind = "minkowski";
  int d = 1;
  double mass = 1.0;
  VaidyaParams vaidya = {};
  double amp = 0.1;       // perturbation amplitude
  double order = 2.0;     // symbol-class decay order
  double radius = 1.0;    // bump radius
  double tortoise_scale = 1e4;
  std::string covector = "dt";
};

inline MetricPtr make_metric(const MetricSpec& s) {
  if (s.kind == "minkowski") return make_minkowski(s.d);
  if (s.kind == "schwarzschild_naive")
    return make_schwarzschild_naive(s.mass, s.d);
  if (s.kind == "schwarzschild_ef") return make_schwarzschild_ef(s.mass, s.d);
  if (s.kind == "schwarzschild_tortoise")
    return make_schwarzschild_tortoise(s.mass, s.d, s.tortoise_scale);
  if (s.kind == "vaidya") return make_vaidya(s.vaidya, s.d);
  if (s.kind == "vaidya_grid") return make_vaidya(grid_vaidya_params(), s.d);
  if (s.kind == "bump") {
    SpacetimePoint center = point_radial(0.0, 0.0, s.d);
    return make_bump_perturbation(s.d, s.amp, center, s.radius,
                                  rank1::covector_from_name(s.covector));
  }
  if (s.kind == "symbol_decay")
    return make_symbol_perturbation(s.d, s.amp, s.order,
                                    rank1::covector_from_name(s.covector));
  throw std::invalid_argument("unknown metric kind: " + s.kind);
}

}  // namespace desclab
