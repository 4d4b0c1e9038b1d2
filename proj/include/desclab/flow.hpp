#pragma once

// Dynamics of the rescaled Hamiltonian flow on the compactified phase space:
//  * adaptive integration of bicharacteristics in raw coordinates,
//  * integration of the fiber-projectivized flow at fiber infinity,
//  * a census of the radial (fixed-point) sets in the boundary charts, with
//    linearizations restricted to the characteristic set and fiber infinity,
//  * heteroclinic connection sampling between the critical families, and
//  * the induced propagation order (a topological order of the families).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "charts.hpp"
#include "geometry.hpp"
#include "metrics.hpp"
#include "symbol.hpp"

namespace desclab {

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4) driver

struct IntegrateOpts {
  double h0 = 0.01;        // initial step
  double rtol = 1e-10;     // relative tolerance per step
  double atol = 1e-12;     // absolute tolerance per step
  double max_growth = 5;   // cap on the step growth factor
  double bdf_stop = 1e-4;  // stop when the smallest face bdf drops below
  double max_length = 1e9;            // arc-length budget
  int max_steps = 100000;             // accepted-step budget
  bool reverse = false;               // integrate the reversed field
  double msq = 0.0;                   // mass-squared, recorded along the way
};

enum class Termination { boundary, step_limit, left_atlas };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::boundary: return "boundary";
    case Termination::step_limit: return "step-limit";
    case Termination::left_atlas: return "left-atlas";
  }
  return "?";
}

namespace detail {

// One embedded Dormand-Prince 5(4) step.  The right-hand side callback
// returns false when it cannot be evaluated (outside the metric's domain);
// the step then reports failure so the driver can shrink.
template <class RHS>
inline bool dopri5_step(RHS&& f, const Eigen::VectorXd& y, double h,
                        Eigen::VectorXd& y5, double& err_norm, double atol,
                        double rtol) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695,
                          e4 = 393.0 / 640, e5 = -92097.0 / 339200,
                          e6 = 187.0 / 2100, e7 = 1.0 / 40;

  const int n = static_cast<int>(y.size());
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n);
  if (!f(y, k1)) return false;
  tmp = y + h * (a21 * k1);
  if (!f(tmp, k2)) return false;
  tmp = y + h * (a31 * k1 + a32 * k2);
  if (!f(tmp, k3)) return false;
  tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
  if (!f(tmp, k4)) return false;
  tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
  if (!f(tmp, k5)) return false;
  tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
  if (!f(tmp, k6)) return false;
  y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  if (!f(y5, k7)) return false;
  const Eigen::VectorXd y4 =
      y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  err_norm = 0;
  for (int i = 0; i < n; ++i) {
    const double sc =
        atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
    err_norm = std::max(err_norm, std::abs(y5[i] - y4[i]) / sc);
  }
  if (!std::isfinite(err_norm)) return false;
  return true;
}

// Generic adaptive loop.  The callback sees every accepted state (including
// the start) and may request termination; the driver handles step control,
// budgets, and evaluation failures.
template <class RHS, class Cb>
inline Termination adaptive_drive(RHS&& f, Eigen::VectorXd y,
                                  const IntegrateOpts& o, Cb&& cb) {
  double s = 0, h = o.h0;
  int steps = 0;
  if (auto t = cb(s, y)) return *t;
  Eigen::VectorXd y5(y.size());
  while (true) {
    if (steps >= o.max_steps || s >= o.max_length) {
      return Termination::step_limit;
    }
    double err = 0;
    if (!dopri5_step(f, y, h, y5, err, o.atol, o.rtol)) {
      h *= 0.5;
      if (h < 1e-13) return Termination::left_atlas;
      continue;
    }
    if (err > 1.0) {
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
      if (h < 1e-13) return Termination::left_atlas;
      continue;
    }
    s += h;
    y = y5;
    ++steps;
    const double fac =
        err == 0 ? o.max_growth
                 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, o.max_growth);
    h *= fac;
    if (auto t = cb(s, y)) return *t;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bicharacteristic integration in raw coordinates

struct TrajectorySample {
  double s = 0;    // arc-length parameter (unit Euclidean speed)
  PhasePoint p;
  BdfVector bdf;
  double symbol = 0;  // principal symbol, conserved up to integration error
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::step_limit;
  double length = 0;
  double symbol_drift = 0;  // max |p - p(start)| over the samples
  double min_bdf = 1;       // smallest face bdf seen

  const TrajectorySample& back() const { return samples.back(); }
};

// Integrates the Hamiltonian flow of p = g^{-1}(zeta,zeta) + msq from a raw
// phase point, normalized to unit Euclidean speed so the parameter is arc
// length.  Stops when a face is approached closer than the bdf tolerance,
// when a budget runs out, or when the metric's domain (or the numerics)
// gives out.
inline Trajectory integrate_bichar(const Metric& g, const PhasePoint& start,
                                   const IntegrateOpts& opts = {}) {
  const int d = start.d();
  const int n = 2 * (1 + d);
  Eigen::VectorXd y0(n);
  y0[0] = start.z.t;
  y0.segment(1, d) = start.z.x;
  y0[1 + d] = start.tau;
  y0.tail(d) = start.xi;

  const auto unpack = [d](const Eigen::VectorXd& y) {
    PhasePoint p;
    p.z.t = y[0];
    p.z.x = y.segment(1, d);
    p.tau = y[1 + d];
    p.xi = y.tail(d);
    return p;
  };

  const auto rhs = [&](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const PhasePoint p = unpack(y);
    if (!g.in_domain(p.z)) return false;
    const PhaseVelocity w = hamiltonian_field_raw(g, p);
    dy.resize(y.size());
    dy.head(1 + d) = w.zdot;
    dy.tail(1 + d) = w.zetadot;
    const double speed = dy.norm();
    if (!(speed > 1e-300) || !dy.allFinite()) return false;
    dy /= speed;
    if (opts.reverse) dy = -dy;
    return true;
  };

  Trajectory out;
  const double p0 = principal_symbol(g, start, opts.msq);
  const auto cb = [&](double s, const Eigen::VectorXd& y)
      -> std::optional<Termination> {
    TrajectorySample smp;
    smp.s = s;
    smp.p = unpack(y);
    smp.bdf = bdfs(smp.p.z);
    smp.symbol = principal_symbol(g, smp.p, opts.msq);
    out.samples.push_back(smp);
    out.length = s;
    out.symbol_drift = std::max(out.symbol_drift, std::abs(smp.symbol - p0));
    double mb = 1;
    for (Face f : all_faces) mb = std::min(mb, smp.bdf[f]);
    out.min_bdf = std::min(out.min_bdf, mb);
    if (mb < opts.bdf_stop) return Termination::boundary;
    return std::nullopt;
  };

  out.termination = detail::adaptive_drive(rhs, y0, opts, cb);
  return out;
}

// ---------------------------------------------------------------------------
// Fiber-projectivized integration at fiber infinity (d = 1)

struct CosphereSample {
  double s = 0;
  CosphereState state;
};

struct CosphereTrajectory {
  std::vector<CosphereSample> samples;
  Termination termination = Termination::step_limit;
};

inline CosphereTrajectory integrate_cosphere(const Metric& g,
                                             const CosphereState& start,
                                             const IntegrateOpts& opts) {
  if (g.dim() != 1) throw std::invalid_argument("cosphere flow needs d == 1");
  Eigen::VectorXd y0(3);
  y0 << start.t, start.x, start.theta;

  const auto rhs = [&](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const CosphereState s{y[0], y[1], y[2]};
    if (!g.in_domain(point1(s.t, s.x))) return false;
    const Eigen::Vector3d v = cosphere_field(g, s);
    const double speed = v.norm();
    if (!(speed > 1e-300) || !v.allFinite()) return false;
    dy = v / speed;
    if (opts.reverse) dy = -dy;
    return true;
  };

  CosphereTrajectory out;
  const auto cb = [&](double s, const Eigen::VectorXd& y)
      -> std::optional<Termination> {
    out.samples.push_back({s, {y[0], y[1], y[2]}});
    const BdfVector b = bdfs(point1(y[0], y[1]));
    double mb = 1;
    for (Face f : all_faces) mb = std::min(mb, b[f]);
    if (mb < opts.bdf_stop) return Termination::boundary;
    return std::nullopt;
  };
  out.termination = detail::adaptive_drive(rhs, y0, opts, cb);
  return out;
}

// ---------------------------------------------------------------------------
// Critical families of the rescaled flow

// R: over the interior of the caps, at finite fiber (the on-shell conormal
//    family).  N: over the null faces at fiber infinity, tangential to the
//    face.  C: over the null-face/cap corners at fiber infinity.  K: over
//    the null-face/spatial corners at fiber infinity.  A labels the family
//    over spatial infinity that only exists in higher spatial dimension; it
//    is part of the vocabulary but never produced by the d = 1 census.
enum class SetFamily { R, N, C, K, A };

inline char family_letter(SetFamily f) {
  switch (f) {
    case SetFamily::R: return 'R';
    case SetFamily::N: return 'N';
    case SetFamily::C: return 'C';
    case SetFamily::K: return 'K';
    case SetFamily::A: return 'A';
  }
  return '?';
}

struct SetKey {
  SetFamily family = SetFamily::R;
  int sheet_sign = +1;  // +1: the tau < 0 sheet
  int time_sign = +1;   // +1: future faces

  friend bool operator==(const SetKey& a, const SetKey& b) {
    return a.family == b.family && a.sheet_sign == b.sheet_sign &&
           a.time_sign == b.time_sign;
  }
  friend bool operator!=(const SetKey& a, const SetKey& b) { return !(a == b); }
  friend bool operator<(const SetKey& a, const SetKey& b) {
    if (a.family != b.family) return a.family < b.family;
    if (a.sheet_sign != b.sheet_sign) return a.sheet_sign > b.sheet_sign;
    return a.time_sign < b.time_sign;
  }
};

// Label "Fst": family letter, sheet sign, time sign (e.g. "N+-").
inline std::string set_label(const SetKey& k) {
  std::string s;
  s += family_letter(k.family);
  s += k.sheet_sign > 0 ? '+' : '-';
  s += k.time_sign > 0 ? '+' : '-';
  return s;
}

enum class Stability { sink, source, saddle, none };

inline const char* stability_name(Stability s) {
  switch (s) {
    case Stability::sink: return "sink";
    case Stability::source: return "source";
    case Stability::saddle: return "saddle";
    case Stability::none: return "none";
  }
  return "?";
}

struct RadialSetRep {
  ChartCopy chart;
  Eigen::Vector4d coords = Eigen::Vector4d::Zero();
};

struct RadialSet {
  SetKey key;
  std::vector<RadialSetRep> reps;  // deduplicated converged representatives
  RadialSetRep canonical;          // the representative used for the spectra
  Eigen::Vector4d eigen_full = Eigen::Vector4d::Zero();  // real parts, sorted
  std::vector<double> eigen_sigma;     // restricted to the characteristic set
  std::vector<double> eigen_sigma_df;  // further restricted to fiber infinity
  int neutral_sigma = 0;  // |eigenvalue| <= neutral_tol, along the family
  int neutral_df = 0;
  Stability class_sigma = Stability::none;
  Stability class_df = Stability::none;
  bool on_df = false;        // the family sits at fiber infinity
  double df_distance = 0;    // for R: fiber-radial coordinate of the rep
  bool stable = false;       // classification survives halving the FD step
  double max_imag = 0;       // largest imaginary part seen in the spectra
};

inline double min_used_magnitude(const std::vector<double>& eig, double tol) {
  double m = std::numeric_limits<double>::infinity();
  for (double l : eig) {
    if (std::abs(l) > tol) m = std::min(m, std::abs(l));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Radial-set census

struct CensusOpts {
  // Chart evaluation carries a roundoff floor of a few 1e-10 near the
  // boundary (see ChartEvalOpts); the residual target and the eigenvalue
  // tolerances sit an order of magnitude above the respective floors.
  double newton_tol = 1e-8;    // sup-norm residual target
  int newton_max_iter = 60;
  double fd_delta = 1e-3;      // FD step for the linearization
  double merge_radius = 1e-3;  // representative deduplication radius
  double neutral_tol = 1e-4;   // eigenvalues below this are family-tangent
  ChartEvalOpts eval;
};

namespace detail {

inline std::vector<ChartCopy> census_copies() {
  std::vector<ChartCopy> v;
  for (int ts : {+1, -1}) v.push_back({ChartId::cap, ts, +1, +1});
  for (ChartId id : {ChartId::null_face, ChartId::corner_cap,
                     ChartId::corner_spatial}) {
    for (int ts : {+1, -1})
      for (int ss : {+1, -1})
        for (int hs : {+1, -1}) v.push_back({id, ts, ss, hs});
  }
  return v;
}

inline std::vector<int> census_free_coords(ChartId id) {
  switch (id) {
    case ChartId::cap: return {1, 2, 3};         // y, tau, xi
    case ChartId::null_face: return {1, 3};      // v, mt
    case ChartId::corner_cap: return {3};        // al
    case ChartId::corner_spatial: return {3};    // ak
  }
  return {};
}

inline std::vector<Eigen::Vector4d> census_seeds(ChartId id, double msq) {
  std::vector<Eigen::Vector4d> seeds;
  switch (id) {
    case ChartId::cap: {
      const double shell = std::max(msq, 0.0) + 0.25;
      for (double y : {-0.8, -0.4, 0.0, 0.4, 0.8})
        for (double xi : {-2.0, -1.0, 0.0, 1.0, 2.0})
          for (double sg : {-1.0, 1.0})
            seeds.push_back({0.0, y, sg * std::sqrt(xi * xi + shell), xi});
      break;
    }
    case ChartId::null_face:
      for (double v : {-3.0, -1.0, 0.0, 1.0, 3.0})
        for (double mt : {-0.4, 0.0, 0.4}) seeds.push_back({0.0, v, 0.0, mt});
      break;
    case ChartId::corner_cap:
    case ChartId::corner_spatial:
      for (double al : {-0.3, 0.0, 0.3}) seeds.push_back({0.0, 0.0, 0.0, al});
      break;
  }
  return seeds;
}

// Residual [rescaled field (4); rescaled symbol] at a census point.
inline bool census_residual(const Metric& g, const ChartCopy& copy,
                            const Eigen::Vector4d& c, double msq,
                            const ChartEvalOpts& eval,
                            Eigen::Matrix<double, 5, 1>& out) {
  try {
    const Eigen::Vector4d f = chart_field(g, copy, c, eval);
    const double p = chart_symbol(g, copy, c, msq, eval);
    out.head<4>() = f;
    out[4] = p;
    return out.allFinite();
  } catch (const std::exception&) {
    return false;
  }
}

inline bool census_newton(const Metric& g, const ChartCopy& copy,
                          Eigen::Vector4d& c, double msq,
                          const CensusOpts& opts) {
  const std::vector<int> free = census_free_coords(copy.id);
  const int nf = static_cast<int>(free.size());
  Eigen::Matrix<double, 5, 1> r;
  for (int iter = 0; iter < opts.newton_max_iter; ++iter) {
    if (!census_residual(g, copy, c, msq, opts.eval, r)) return false;
    if (r.cwiseAbs().maxCoeff() < opts.newton_tol) return true;
    Eigen::MatrixXd J(5, nf);
    const double dlt = 1e-4;
    for (int j = 0; j < nf; ++j) {
      Eigen::Vector4d cp = c, cm = c;
      cp[free[j]] += dlt;
      cm[free[j]] -= dlt;
      Eigen::Matrix<double, 5, 1> rp, rm;
      if (!census_residual(g, copy, cp, msq, opts.eval, rp)) return false;
      if (!census_residual(g, copy, cm, msq, opts.eval, rm)) return false;
      J.col(j) = (rp - rm) / (2 * dlt);
    }
    Eigen::VectorXd step =
        J.completeOrthogonalDecomposition().solve(Eigen::VectorXd(-r));
    const double nrm = step.norm();
    if (nrm > 0.5) step *= 0.5 / nrm;
    for (int j = 0; j < nf; ++j) c[free[j]] += step[j];
    if (!c.allFinite()) return false;
  }
  if (!census_residual(g, copy, c, msq, opts.eval, r)) return false;
  return r.cwiseAbs().maxCoeff() < opts.newton_tol;
}

// Converged point sanity bounds, per chart.
inline bool census_in_range(ChartId id, const Eigen::Vector4d& c) {
  switch (id) {
    case ChartId::cap: {
      const double fiber = std::hypot(c[2], c[3]);
      return std::abs(c[1]) <= 0.97 && fiber >= 0.05 && fiber <= 12.0;
    }
    case ChartId::null_face:
      return std::abs(c[1]) <= 6.0 && std::abs(c[3]) <= 0.9;
    case ChartId::corner_cap:
    case ChartId::corner_spatial:
      return std::abs(c[3]) <= 0.9;
  }
  return false;
}

// Directional FD column of a chart function, one-sided off faces and toward
// the canonical (negative) side of the fiber-radial coordinate, central
// elsewhere.
template <class F>
auto fd_column(F&& f, const ChartShape& sh, const Eigen::Vector4d& c, int i,
               double dlt) {
  Eigen::Vector4d cp = c, cm = c, c2 = c;
  if (sh.face_coord[i] && c[i] < 2 * dlt) {
    cp[i] = c[i] + dlt;
    c2[i] = c[i] + 2 * dlt;
    auto f0 = f(c);
    auto f1 = f(cp);
    auto f2 = f(c2);
    return decltype(f0)((-3.0 * f0 + 4.0 * f1 - f2) / (2 * dlt));
  }
  if (i == sh.df_coord && std::abs(c[i]) < 2 * dlt) {
    cm[i] = c[i] - dlt;
    c2[i] = c[i] - 2 * dlt;
    auto f0 = f(c);
    auto f1 = f(cm);
    auto f2 = f(c2);
    return decltype(f0)((3.0 * f0 - 4.0 * f1 + f2) / (2 * dlt));
  }
  cp[i] = c[i] + dlt;
  cm[i] = c[i] - dlt;
  auto f1 = f(cp);
  auto f2 = f(cm);
  return decltype(f1)((f1 - f2) / (2 * dlt));
}

struct CensusSpectra {
  Eigen::Vector4d eigen_full;
  std::vector<double> eigen_sigma, eigen_sigma_df;
  double max_imag = 0;
};

inline std::vector<double> sorted_real_eigs(const Eigen::MatrixXd& m,
                                            double& max_imag) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  std::vector<double> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    out[i] = es.eigenvalues()[i].real();
    max_imag = std::max(max_imag, std::abs(es.eigenvalues()[i].imag()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline CensusSpectra census_spectra(const Metric& g, const ChartCopy& copy,
                                    const Eigen::Vector4d& c, double msq,
                                    double dlt, const ChartEvalOpts& eval,
                                    bool want_df) {
  const ChartShape sh = chart_shape(copy.id);
  const auto field = [&](const Eigen::Vector4d& ci) {
    return chart_field(g, copy, ci, eval);
  };
  const auto symbol = [&](const Eigen::Vector4d& ci) {
    return chart_symbol(g, copy, ci, msq, eval);
  };
  Eigen::Matrix4d J;
  Eigen::Vector4d grad;
  for (int i = 0; i < 4; ++i) {
    J.col(i) = fd_column(field, sh, c, i, dlt);
    grad[i] = fd_column(symbol, sh, c, i, dlt);
  }

  CensusSpectra out;
  {
    const std::vector<double> ef = sorted_real_eigs(J, out.max_imag);
    for (int i = 0; i < 4; ++i) out.eigen_full[i] = ef[i];
  }
  if (grad.norm() < 1e-8) {
    throw std::runtime_error(
        "census: degenerate symbol differential at a critical point");
  }
  // Basis of the tangent space of the characteristic set: the orthogonal
  // complement of grad.
  const Eigen::HouseholderQR<Eigen::Matrix<double, 4, 1>> qr1(grad);
  const Eigen::Matrix4d Q1 = qr1.householderQ();
  const Eigen::Matrix<double, 4, 3> Bs = Q1.rightCols<3>();
  out.eigen_sigma =
      sorted_real_eigs(Bs.transpose() * J * Bs, out.max_imag);
  if (want_df && sh.df_coord >= 0) {
    Eigen::Matrix<double, 4, 2> M;
    M.col(0) = grad;
    M.col(1) = Eigen::Vector4d::Unit(sh.df_coord);
    const Eigen::HouseholderQR<Eigen::Matrix<double, 4, 2>> qr2(M);
    const Eigen::Matrix4d Q2 = qr2.householderQ();
    const Eigen::Matrix<double, 4, 2> Bd = Q2.rightCols<2>();
    out.eigen_sigma_df =
        sorted_real_eigs(Bd.transpose() * J * Bd, out.max_imag);
  }
  return out;
}

inline Stability classify_eigs(const std::vector<double>& eig, double tol,
                               int& neutral) {
  neutral = 0;
  bool pos = false, neg = false;
  for (double l : eig) {
    if (std::abs(l) <= tol) {
      ++neutral;
    } else {
      (l > 0 ? pos : neg) = true;
    }
  }
  if (pos && neg) return Stability::saddle;
  if (pos) return Stability::source;
  if (neg) return Stability::sink;
  return Stability::none;
}

}  // namespace detail

// Locates the critical families of the rescaled flow in every chart copy,
// deduplicates representatives, classifies the linearization restricted to
// the characteristic set and (for the fiber-infinity families) further to
// fiber infinity, and cross-checks the classification under halving of the
// FD step.  d = 1.
inline std::vector<RadialSet> find_radial_sets(const Metric& g, double msq,
                                               const CensusOpts& opts = {}) {
  if (g.dim() != 1) throw std::invalid_argument("census needs d == 1");

  struct Found {
    std::vector<RadialSetRep> reps;
  };
  std::map<SetKey, Found> found;

  const auto copies = detail::census_copies();
  for (std::size_t ci = 0; ci < copies.size(); ++ci) {
    const ChartCopy& copy = copies[ci];
    std::vector<Eigen::Vector4d> converged;
    for (Eigen::Vector4d seed : detail::census_seeds(copy.id, msq)) {
      Eigen::Vector4d c = seed;
      if (!detail::census_newton(g, copy, c, msq, opts)) continue;
      if (!detail::census_in_range(copy.id, c)) continue;
      bool dup = false;
      for (const Eigen::Vector4d& prev : converged) {
        if ((prev - c).cwiseAbs().maxCoeff() < opts.merge_radius) {
          dup = true;
          break;
        }
      }
      if (dup) continue;
      converged.push_back(c);
    }

    for (const Eigen::Vector4d& c : converged) {
      SetKey key;
      key.time_sign = copy.time_sign;
      switch (copy.id) {
        case ChartId::cap: key.family = SetFamily::R; break;
        case ChartId::null_face: key.family = SetFamily::N; break;
        case ChartId::corner_cap: key.family = SetFamily::C; break;
        case ChartId::corner_spatial: key.family = SetFamily::K; break;
      }
      if (copy.id == ChartId::cap) {
        key.sheet_sign = c[2] < 0 ? +1 : -1;
      } else {
        key.sheet_sign = copy.sheet_sign;
        // Cross-check the sheet tag against the raw covector of a
        // representative slightly off the boundary.
        Eigen::Vector4d off;
        detail::offset_boundary(copy.id, c, opts.eval.richardson_eps,
                                opts.eval.activation, off);
        const PhasePoint rep = chart_to_raw(copy, off);
        if ((rep.tau < 0) != (key.sheet_sign > 0)) {
          throw std::runtime_error("census: sheet tag mismatch in chart " +
                                   copy.label());
        }
      }
      found[key].reps.push_back({copy, c});
    }

    // Distinct-family separation within one copy (the labels above are
    // constant per copy except for the cap sheet, so only sheet clusters
    // can collide).
    for (std::size_t i = 0; i < converged.size(); ++i) {
      for (std::size_t j = i + 1; j < converged.size(); ++j) {
        const bool same_label =
            copy.id != ChartId::cap ||
            ((converged[i][2] < 0) == (converged[j][2] < 0));
        if (!same_label && (converged[i] - converged[j]).cwiseAbs().maxCoeff() <
                               10 * opts.merge_radius) {
          throw std::runtime_error(
              "census: ambiguous cluster of distinct families in chart " +
              copy.label());
        }
      }
    }
  }

  std::vector<RadialSet> out;
  for (auto& [key, f] : found) {
    RadialSet rs;
    rs.key = key;
    rs.reps = f.reps;
    rs.on_df = key.family != SetFamily::R;
    // Canonical representative: lexicographically smallest (chart label,
    // then coordinates).
    const RadialSetRep* best = &rs.reps.front();
    for (const RadialSetRep& r : rs.reps) {
      const std::string la = r.chart.label(), lb = best->chart.label();
      if (la < lb) {
        best = &r;
      } else if (la == lb) {
        for (int i = 0; i < 4; ++i) {
          if (r.coords[i] == best->coords[i]) continue;
          if (r.coords[i] < best->coords[i]) best = &r;
          break;
        }
      }
    }
    rs.canonical = *best;

    const auto spectra = [&](double dlt) {
      return detail::census_spectra(g, rs.canonical.chart, rs.canonical.coords,
                                    msq, dlt, opts.eval, rs.on_df);
    };
    const detail::CensusSpectra s1 = spectra(opts.fd_delta);
    const detail::CensusSpectra s2 = spectra(opts.fd_delta / 2);
    rs.eigen_full = s1.eigen_full;
    rs.eigen_sigma = s1.eigen_sigma;
    rs.eigen_sigma_df = s1.eigen_sigma_df;
    rs.max_imag = std::max(s1.max_imag, s2.max_imag);
    rs.class_sigma =
        detail::classify_eigs(s1.eigen_sigma, opts.neutral_tol, rs.neutral_sigma);
    rs.class_df = detail::classify_eigs(s1.eigen_sigma_df, opts.neutral_tol,
                                        rs.neutral_df);
    int n1 = 0, n2 = 0;
    const bool stable_sigma =
        detail::classify_eigs(s2.eigen_sigma, opts.neutral_tol, n1) ==
            rs.class_sigma &&
        n1 == rs.neutral_sigma;
    const bool stable_df =
        detail::classify_eigs(s2.eigen_sigma_df, opts.neutral_tol, n2) ==
            rs.class_df &&
        n2 == rs.neutral_df;
    rs.stable = stable_sigma && stable_df;
    if (!rs.on_df) {
      rs.df_distance = chart_df_coordinate(rs.canonical.chart,
                                           rs.canonical.coords);
    }
    out.push_back(std::move(rs));
  }
  std::sort(out.begin(), out.end(),
            [](const RadialSet& a, const RadialSet& b) { return a.key < b.key; });
  return out;
}

// ---------------------------------------------------------------------------
// Heteroclinic connection sampling (d = 1, at fiber infinity)
//
// Orbits of the projectivized flow are launched from interior lift seeds
// (near the light cone, fiber tangent to it) and from transit seeds far out
// near the null faces (fiber conormal).  Each orbit is extended both ways;
// every sample is tested against base balls around the critical families
// with a fiber match in the degenerate frame:
//   N: base near a null face, covector along the face's null generator;
//   C: base near a null-face/cap corner, covector conormal to the face;
//   K: base near a null-face/spatial corner, covector conormal.
// Matches are mutually exclusive by construction (along vs conormal, and the
// base balls of distinct corners are disjoint); consecutive distinct matched
// families yield directed connection edges.

struct FlowEdge {
  SetKey from, to;
  int count = 0;
};

struct OrbitHits {
  CosphereState seed;
  std::vector<SetKey> sequence;  // collapsed hit sequence in flow order
};

inline IntegrateOpts connection_integration_defaults() {
  IntegrateOpts o;
  o.h0 = 0.1;
  o.rtol = 1e-9;
  o.atol = 1e-12;
  o.max_growth = 1.6;
  o.bdf_stop = 1e-12;
  o.max_length = 1e12;
  o.max_steps = 6000;
  return o;
}

struct ConnectOpts {
  double r_base = 0.05;   // base bdf ball radius
  double r_fib = 0.05;    // fiber direction tolerance (normalized)
  double far_offset = 1e6;  // null-coordinate offset of the transit seeds
  std::vector<double> lift_offsets{-40, -10, 0, 10, 40};
  IntegrateOpts integ = connection_integration_defaults();
};

struct ConnectionReport {
  std::vector<FlowEdge> edges;
  std::vector<OrbitHits> orbits;
};

namespace detail {

// Classifies one projectivized sample against the critical-family balls.
inline std::optional<SetKey> classify_hit(const SpacetimePoint& z,
                                          double theta, double r_base,
                                          double r_fib) {
  const BdfVector b = bdfs(z);
  const double bPf = b[Face::Pf], bnPf = b[Face::nPf];
  const double bSf = b[Face::Sf], bnFf = b[Face::nFf];
  const double bFf = b[Face::Ff];
  const bool near_nFf = bnFf < r_base, near_nPf = bnPf < r_base;
  if (!near_nFf && !near_nPf) return std::nullopt;

  const double tau = std::cos(theta), xi = std::sin(theta);
  const int sheet = tau < 0 ? +1 : -1;
  const int side = z.x[0] > 0 ? +1 : -1;
  const int time = near_nFf ? +1 : -1;
  // Null components; |a|^2 + |b|^2 = 1/2 on the unit fiber circle.
  const double ca = 0.5 * (tau + xi), cb = 0.5 * (tau - xi);
  const double fib_scale = std::sqrt(2.0);
  // Along-face null covector: dv on the right-future and left-past faces,
  // du on the left-future and right-past faces.  Conormal is the other one.
  const bool along_is_dv = (side > 0) == (time > 0);
  const double wrong_along = along_is_dv ? ca : cb;
  const double wrong_conormal = along_is_dv ? cb : ca;
  const bool fib_along = fib_scale * std::abs(wrong_along) < r_fib;
  const bool fib_conormal = fib_scale * std::abs(wrong_conormal) < r_fib;

  std::optional<SetKey> hit;
  const auto add = [&](SetFamily fam) {
    if (hit) {
      throw std::logic_error("connection sampling: ambiguous family hit");
    }
    hit = SetKey{fam, sheet, time};
  };
  const bool corner_cap_ball = (time > 0 ? bFf : bPf) < r_base;
  const bool corner_spatial_ball = bSf < r_base;
  if (fib_along) add(SetFamily::N);
  if (fib_conormal && corner_cap_ball) add(SetFamily::C);
  if (fib_conormal && corner_spatial_ball) add(SetFamily::K);
  return hit;
}

inline void append_hits(const CosphereTrajectory& tr, bool reversed,
                        double r_base, double r_fib,
                        std::vector<SetKey>& seq) {
  const auto scan = [&](const CosphereSample& s) {
    const auto hit =
        classify_hit(point1(s.state.t, s.state.x), s.state.theta, r_base,
                     r_fib);
    if (hit && (seq.empty() || seq.back() != *hit)) seq.push_back(*hit);
  };
  if (reversed) {
    for (auto it = tr.samples.rbegin(); it != tr.samples.rend(); ++it)
      scan(*it);
  } else {
    for (const auto& s : tr.samples) scan(s);
  }
}

}  // namespace detail

// Angles of the two null covector directions on the requested sheet:
// first the one proportional to dv (moving right), then du (moving left).
inline std::array<double, 2> null_fiber_angles(int sheet_sign) {
  constexpr double pi = std::numbers::pi;
  const double base_dv = 3 * pi / 4, base_du = 5 * pi / 4;
  if (sheet_sign > 0) return {base_dv, base_du};
  return {base_dv + pi, base_du + pi};
}

inline ConnectionReport sample_connections(const Metric& g, int sheet_sign,
                                           const ConnectOpts& opts = {}) {
  if (g.dim() != 1) {
    throw std::invalid_argument("connection sampling needs d == 1");
  }
  const auto [theta_dv, theta_du] = null_fiber_angles(sheet_sign);
  std::vector<CosphereState> seeds;
  // Interior lifts of the light cone: start on t = 0 with the covector
  // tangent to the cone shifted by a finite null offset.
  for (double v0 : opts.lift_offsets) {
    seeds.push_back({0.0, -v0, theta_dv});  // t - x = v0, moving right
    seeds.push_back({0.0, v0, theta_du});   // t + x = v0, moving left
  }
  // Transit seeds: far out near each null face, covector conormal.
  const double U = 0.5 * opts.far_offset;
  seeds.push_back({U, U, theta_du});    // over the right future null face
  seeds.push_back({-U, U, theta_dv});   // over the right past null face
  seeds.push_back({U, -U, theta_dv});   // over the left future null face
  seeds.push_back({-U, -U, theta_du});  // over the left past null face

  ConnectionReport report;
  std::map<std::pair<SetKey, SetKey>, int> edge_count;
  for (const CosphereState& seed : seeds) {
    IntegrateOpts back = opts.integ;
    back.reverse = !opts.integ.reverse;
    const CosphereTrajectory tb = integrate_cosphere(g, seed, back);
    const CosphereTrajectory tf = integrate_cosphere(g, seed, opts.integ);
    OrbitHits oh;
    oh.seed = seed;
    detail::append_hits(tb, true, opts.r_base, opts.r_fib, oh.sequence);
    detail::append_hits(tf, false, opts.r_base, opts.r_fib, oh.sequence);
    // The seed sits in both trajectories; collapse again across the splice.
    for (std::size_t i = 0; i + 1 < oh.sequence.size(); ++i) {
      const SetKey& a = oh.sequence[i];
      const SetKey& b = oh.sequence[i + 1];
      if (a != b) ++edge_count[{a, b}];
    }
    report.orbits.push_back(std::move(oh));
  }
  for (const auto& [e, n] : edge_count) {
    report.edges.push_back({e.first, e.second, n});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Propagation order

enum class FlowDirection { with_flow, against_flow };

struct CycleError : std::runtime_error {
  std::vector<SetKey> cycle;
  explicit CycleError(std::vector<SetKey> c)
      : std::runtime_error(format(c)), cycle(std::move(c)) {}

  static std::string format(const std::vector<SetKey>& c) {
    std::ostringstream os;
    os << "propagation order: connection graph has a cycle:";
    for (const SetKey& k : c) os << ' ' << set_label(k);
    return os.str();
  }
};

// Rank used to resolve ties deterministically; it runs through the expected
// estimate chain (past-side families before future-side, null-face family
// outermost).  For the against-flow direction the complement rank reverses
// the order exactly.
inline int chain_rank(const SetKey& k) {
  const int t = k.sheet_sign > 0 ? k.time_sign : -k.time_sign;
  int fam = 0;
  switch (k.family) {
    case SetFamily::N: fam = 0; break;
    case SetFamily::C: fam = 1; break;
    case SetFamily::K: fam = 2; break;
    default: fam = 3; break;
  }
  return t < 0 ? fam : 5 - fam;
}

// Topologically orders the fiber-infinity families of one sheet along the
// sampled connection edges.  with_flow follows the flow (sources first);
// against_flow orders along the reversed edges.  Ties between simultaneously
// available families resolve by chain_rank, making the output deterministic.
// A cycle in the (restricted) edge set raises CycleError naming the cycle.
inline std::vector<SetKey> propagation_order(const std::vector<SetKey>& nodes,
                                             const std::vector<FlowEdge>& edges,
                                             FlowDirection dir) {
  std::vector<SetKey> ns = nodes;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const auto index_of = [&](const SetKey& k) -> int {
    const auto it = std::lower_bound(ns.begin(), ns.end(), k);
    if (it == ns.end() || *it != k) return -1;
    return static_cast<int>(it - ns.begin());
  };
  const int n = static_cast<int>(ns.size());
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indeg(n, 0);
  for (const FlowEdge& e : edges) {
    int a = index_of(e.from), b = index_of(e.to);
    if (a < 0 || b < 0 || a == b) continue;
    if (dir == FlowDirection::against_flow) std::swap(a, b);
    if (std::find(succ[a].begin(), succ[a].end(), b) != succ[a].end()) continue;
    succ[a].push_back(b);
    ++indeg[b];
  }
  const auto rank = [&](int i) {
    const int r = chain_rank(ns[i]);
    return dir == FlowDirection::with_flow ? r : 5 - r;
  };

  std::vector<SetKey> order;
  std::vector<char> emitted(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (emitted[i] || indeg[i] != 0) continue;
      if (best < 0 || rank(i) < rank(best)) best = i;
    }
    if (best < 0) {
      // Remaining nodes all have positive in-degree: find a cycle by
      // walking predecessors until one repeats.
      std::vector<std::vector<int>> pred(n);
      for (int a = 0; a < n; ++a) {
        if (emitted[a]) continue;
        for (int b : succ[a]) {
          if (!emitted[b]) pred[b].push_back(a);
        }
      }
      int cur = -1;
      for (int i = 0; i < n; ++i) {
        if (!emitted[i] && indeg[i] > 0) {
          cur = i;
          break;
        }
      }
      std::vector<int> trail;
      std::vector<int> seen(n, -1);
      while (cur >= 0 && seen[cur] < 0) {
        seen[cur] = static_cast<int>(trail.size());
        trail.push_back(cur);
        cur = pred[cur].empty() ? -1 : pred[cur].front();
      }
      std::vector<SetKey> cyc;
      if (cur >= 0) {
        for (std::size_t i = seen[cur]; i < trail.size(); ++i)
          cyc.push_back(ns[trail[i]]);
        std::reverse(cyc.begin(), cyc.end());
      }
      throw CycleError(std::move(cyc));
    }
    emitted[best] = 1;
    order.push_back(ns[best]);
    for (int b : succ[best]) --indeg[b];
  }
  return order;
}

// Convenience overload: nodes are the fiber-infinity families of the given
// sheet found by the census.
inline std::vector<SetKey> propagation_order(
    const std::vector<RadialSet>& census, const std::vector<FlowEdge>& edges,
    int sheet_sign, FlowDirection dir) {
  std::vector<SetKey> nodes;
  for (const RadialSet& rs : census) {
    if (!rs.on_df || rs.key.sheet_sign != sheet_sign) continue;
    nodes.push_back(rs.key);
  }
  return propagation_order(nodes, edges, dir);
}

}  // namespace desclab
