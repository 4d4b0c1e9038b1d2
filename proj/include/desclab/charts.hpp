#pragma once

// Boundary-adapted phase-space charts over the compactified base (d = 1).
//
// Four canonical chart shapes cover the regions where the rescaled
// Hamiltonian flow has its critical sets:
//
//   cap            over the interior of the future cap: coordinates
//                  (sigma, y, tau, xi) with sigma = 1/t, y = x/t and the raw
//                  fiber.  Face at sigma = 0.  The flow is rescaled by 1/sigma.
//
//   null_face      over the right future null face: rho = u^{-1/2}, v, and
//                  projective fiber coordinates built from the frame-rescaled
//                  null components A = a / rho, B = b * rho.  On this face B
//                  dominates, so q = 1/B (fiber-radial, 0 at fiber infinity)
//                  and mt = A/B.  Face at rho = 0, fiber infinity at q = 0.
//                  Rescaling weight |q| / rho.
//
//   corner_cap     over the corner where the right null face meets the cap:
//                  h1 = sqrt(v/u), h2 = 1/v, and A-dominant projective fiber
//                  qa = 1/A, al = B/A with A = a/h1, B = b*h1.  Faces at
//                  h1 = 0 (null face) and h2 = 0 (cap side); fiber infinity
//                  at qa = 0.  Weight |qa| / (h1 h2).
//
//   corner_spatial over the corner where the right null face meets spatial
//                  infinity: with w = -v, k1 = sqrt(w/u), k2 = 1/w and the
//                  same A-dominant fiber construction.  Weight |qk| / (k1 k2).
//
// Each canonical chart describes the quadrant with t > 0, x > 0 and the
// sheet with tau < 0.  Copies reflected in time, space, and fiber sign
// extend the atlas to the other face copies and to the second sheet.  All
// three reflections are diagonal sign involutions of (t, x, tau, xi):
//
//   time  -1:  (t, x, tau, xi) -> (-t,  x, tau, -xi)   [anti-symplectic]
//   space -1:  (t, x, tau, xi) -> ( t, -x, tau, -xi)   [symplectic]
//   sheet -1:  (t, x, tau, xi) -> ( t,  x, -tau, -xi)  [anti-symplectic]
//
// A chart copy evaluates any raw quantity by reflecting into the canonical
// quadrant, applying the canonical formulas, and reflecting velocities back.
// Because the reflections with time_sign * sheet_sign = -1 are
// anti-symplectic, those copies carry the Hamiltonian flow to the reversed
// flow, which is exactly what makes the mirrored critical sets swap their
// source/sink roles.
//
// Boundary evaluation.  The rescaled fields extend continuously to the
// boundary portions of each chart, but the raw formulas degenerate there.
// Values on a face (or at fiber infinity) are obtained by evaluating at
// small offsets eps and 2*eps off the boundary and extrapolating with one
// Richardson step, 2 F(eps) - F(2 eps), which removes the O(eps) error.
// The fiber-radial coordinate is offset to the negative side, which is the
// side where the canonical sheet (tau < 0) accumulates.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "geometry.hpp"
#include "metrics.hpp"
#include "symbol.hpp"

namespace desclab {

enum class ChartId { cap, null_face, corner_cap, corner_spatial };

inline const char* chart_name(ChartId id) {
  switch (id) {
    case ChartId::cap: return "cap";
    case ChartId::null_face: return "null_face";
    case ChartId::corner_cap: return "corner_cap";
    case ChartId::corner_spatial: return "corner_spatial";
  }
  return "?";
}

inline std::array<const char*, 4> chart_coord_names(ChartId id) {
  switch (id) {
    case ChartId::cap: return {"sigma", "y", "tau", "xi"};
    case ChartId::null_face: return {"rho", "v", "q", "mt"};
    case ChartId::corner_cap: return {"h1", "h2", "qa", "al"};
    case ChartId::corner_spatial: return {"k1", "k2", "qk", "ak"};
  }
  return {"?", "?", "?", "?"};
}

// Which coordinates are one-sided face coordinates (face at 0) and which one
// is the fiber-radial coordinate (fiber infinity at 0, signed).  The cap
// chart keeps the raw fiber and has no fiber-radial coordinate.
struct ChartShape {
  std::array<bool, 4> face_coord{{false, false, false, false}};
  int df_coord = -1;
};

inline ChartShape chart_shape(ChartId id) {
  ChartShape s;
  switch (id) {
    case ChartId::cap:
      s.face_coord[0] = true;
      break;
    case ChartId::null_face:
      s.face_coord[0] = true;
      s.df_coord = 2;
      break;
    case ChartId::corner_cap:
    case ChartId::corner_spatial:
      s.face_coord[0] = true;
      s.face_coord[1] = true;
      s.df_coord = 2;
      break;
  }
  return s;
}

struct ChartCopy {
  ChartId id = ChartId::cap;
  int time_sign = +1;   // +1: future faces, -1: past faces
  int space_sign = +1;  // +1: right-hand side (x > 0); ignored by cap
  int sheet_sign = +1;  // +1: the tau < 0 sheet

  std::string label() const {
    std::string s = chart_name(id);
    s += time_sign > 0 ? "/t+" : "/t-";
    if (id != ChartId::cap) s += space_sign > 0 ? "x+" : "x-";
    s += sheet_sign > 0 ? "s+" : "s-";
    return s;
  }
};

// Diagonal reflection carrying the copy's quadrant to the canonical one (its
// own inverse).  Order: (t, x, tau, xi).
inline Eigen::Vector4d chart_reflection_signs(const ChartCopy& c) {
  const double st = c.time_sign, sx = c.id == ChartId::cap ? 1.0 : c.space_sign;
  const double ss = c.sheet_sign;
  return {st, sx, ss, st * sx * ss};
}

// ---------------------------------------------------------------------------
// Canonical coordinate maps (all in the canonical quadrant)

namespace detail {

struct RawPoint {
  double t, x, tau, xi;
};

inline RawPoint canonical_to_raw(ChartId id, const Eigen::Vector4d& c) {
  switch (id) {
    case ChartId::cap: {
      const double sigma = c[0], y = c[1];
      if (sigma <= 0) throw std::domain_error("cap chart: sigma must be > 0");
      return {1.0 / sigma, y / sigma, c[2], c[3]};
    }
    case ChartId::null_face: {
      const double rho = c[0], v = c[1], q = c[2], mt = c[3];
      if (rho <= 0 || q == 0)
        throw std::domain_error("null_face chart: need rho > 0, q != 0");
      const double u = 1.0 / (rho * rho);
      const double a = mt / q * rho;  // A = mt/q, a = A * rho
      const double b = 1.0 / (q * rho);  // B = 1/q, b = B / rho
      NullCoords n{u, v, a, b};
      RawPoint r;
      from_null(n, r.t, r.x, r.tau, r.xi);
      return r;
    }
    case ChartId::corner_cap: {
      const double h1 = c[0], h2 = c[1], qa = c[2], al = c[3];
      if (h1 <= 0 || h2 <= 0 || qa == 0)
        throw std::domain_error("corner_cap chart: need h1, h2 > 0, qa != 0");
      const double v = 1.0 / h2;
      const double u = 1.0 / (h1 * h1 * h2);
      const double a = h1 / qa;        // A = 1/qa, a = A * h1
      const double b = al / (qa * h1);  // B = al/qa, b = B / h1
      NullCoords n{u, v, a, b};
      RawPoint r;
      from_null(n, r.t, r.x, r.tau, r.xi);
      return r;
    }
    case ChartId::corner_spatial: {
      const double k1 = c[0], k2 = c[1], qk = c[2], ak = c[3];
      if (k1 <= 0 || k2 <= 0 || qk == 0)
        throw std::domain_error(
            "corner_spatial chart: need k1, k2 > 0, qk != 0");
      const double w = 1.0 / k2;  // w = -v > 0
      const double u = 1.0 / (k1 * k1 * k2);
      const double a = k1 / qk;
      const double b = ak / (qk * k1);
      NullCoords n{u, -w, a, b};
      RawPoint r;
      from_null(n, r.t, r.x, r.tau, r.xi);
      return r;
    }
  }
  throw std::logic_error("unknown chart");
}

inline Eigen::Vector4d canonical_from_raw(ChartId id, const RawPoint& r) {
  const NullCoords n = to_null(r.t, r.x, r.tau, r.xi);
  switch (id) {
    case ChartId::cap: {
      if (r.t <= 0) throw std::domain_error("cap chart: need t > 0");
      return {1.0 / r.t, r.x / r.t, r.tau, r.xi};
    }
    case ChartId::null_face: {
      if (n.u <= 0) throw std::domain_error("null_face chart: need u > 0");
      const double rho = 1.0 / std::sqrt(n.u);
      const double A = n.a / rho, B = n.b * rho;
      if (B == 0) throw std::domain_error("null_face chart: need B != 0");
      return {rho, n.v, 1.0 / B, A / B};
    }
    case ChartId::corner_cap: {
      if (n.u <= 0 || n.v <= 0)
        throw std::domain_error("corner_cap chart: need u, v > 0");
      const double h1 = std::sqrt(n.v / n.u), h2 = 1.0 / n.v;
      const double A = n.a / h1, B = n.b * h1;
      if (A == 0) throw std::domain_error("corner_cap chart: need A != 0");
      return {h1, h2, 1.0 / A, B / A};
    }
    case ChartId::corner_spatial: {
      const double w = -n.v;
      if (n.u <= 0 || w <= 0)
        throw std::domain_error("corner_spatial chart: need u > 0, v < 0");
      const double k1 = std::sqrt(w / n.u), k2 = 1.0 / w;
      const double A = n.a / k1, B = n.b * k1;
      if (A == 0) throw std::domain_error("corner_spatial chart: need A != 0");
      return {k1, k2, 1.0 / A, B / A};
    }
  }
  throw std::logic_error("unknown chart");
}

// Pushforward of a raw phase velocity to canonical chart velocities,
// evaluated at chart point c (interior: faces > 0, fiber-radial != 0).
inline Eigen::Vector4d canonical_chart_velocity(ChartId id,
                                                const Eigen::Vector4d& c,
                                                const PhaseVelocity& w) {
  const NullCoords nv = null_velocity(w);
  switch (id) {
    case ChartId::cap: {
      const double sigma = c[0], y = c[1];
      const double tdot = w.zdot[0], xdot = w.zdot[1];
      return {-sigma * sigma * tdot, sigma * (xdot - y * tdot), w.zetadot[0],
              w.zetadot[1]};
    }
    case ChartId::null_face: {
      const double rho = c[0], q = c[2], mt = c[3];
      const double u = 1.0 / (rho * rho);
      const double a = mt / q * rho;
      const double b = 1.0 / (q * rho);
      const double rhodot = -0.5 * rho * rho * rho * nv.u;
      const double Adot = nv.a / rho - a * rhodot / (rho * rho);
      const double Bdot = nv.b * rho + b * rhodot;
      const double qdot = -q * q * Bdot;
      const double mtdot = q * (Adot - mt * Bdot);
      (void)u;
      return {rhodot, nv.v, qdot, mtdot};
    }
    case ChartId::corner_cap: {
      const double h1 = c[0], h2 = c[1], qa = c[2], al = c[3];
      const double u = 1.0 / (h1 * h1 * h2);
      const double a = h1 / qa;
      const double b = al / (qa * h1);
      const double h1dot = (nv.v - h1 * h1 * nv.u) / (2.0 * h1 * u);
      const double h2dot = -h2 * h2 * nv.v;
      const double Adot = nv.a / h1 - a * h1dot / (h1 * h1);
      const double Bdot = nv.b * h1 + b * h1dot;
      const double qadot = -qa * qa * Adot;
      const double aldot = qa * (Bdot - al * Adot);
      return {h1dot, h2dot, qadot, aldot};
    }
    case ChartId::corner_spatial: {
      const double k1 = c[0], k2 = c[1], qk = c[2], ak = c[3];
      const double u = 1.0 / (k1 * k1 * k2);
      const double a = k1 / qk;
      const double b = ak / (qk * k1);
      const double wdot = -nv.v;  // w = -v
      const double k1dot = (wdot - k1 * k1 * nv.u) / (2.0 * k1 * u);
      const double k2dot = -k2 * k2 * wdot;
      const double Adot = nv.a / k1 - a * k1dot / (k1 * k1);
      const double Bdot = nv.b * k1 + b * k1dot;
      const double qkdot = -qk * qk * Adot;
      const double akdot = qk * (Bdot - ak * Adot);
      return {k1dot, k2dot, qkdot, akdot};
    }
  }
  throw std::logic_error("unknown chart");
}

inline double chart_weight(ChartId id, const Eigen::Vector4d& c) {
  switch (id) {
    case ChartId::cap: return 1.0 / c[0];
    case ChartId::null_face: return std::abs(c[2]) / c[0];
    case ChartId::corner_cap: return std::abs(c[2]) / (c[0] * c[1]);
    case ChartId::corner_spatial: return std::abs(c[2]) / (c[0] * c[1]);
  }
  throw std::logic_error("unknown chart");
}

inline double fiber_rescale(ChartId id, const Eigen::Vector4d& c) {
  switch (id) {
    case ChartId::cap: return 1.0;
    default: return std::abs(c[2]);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Copy-level interior maps

inline PhasePoint chart_to_raw(const ChartCopy& copy,
                               const Eigen::Vector4d& c) {
  const detail::RawPoint r = detail::canonical_to_raw(copy.id, c);
  const Eigen::Vector4d s = chart_reflection_signs(copy);
  return phase_point1(s[0] * r.t, s[1] * r.x, s[2] * r.tau, s[3] * r.xi);
}

inline Eigen::Vector4d chart_from_raw(const ChartCopy& copy,
                                      const PhasePoint& p) {
  if (p.d() != 1) throw std::invalid_argument("charts need d == 1");
  const Eigen::Vector4d s = chart_reflection_signs(copy);
  detail::RawPoint r{s[0] * p.z.t, s[1] * p.z.x[0], s[2] * p.tau,
                     s[3] * p.xi[0]};
  return detail::canonical_from_raw(copy.id, r);
}

// ---------------------------------------------------------------------------
// Regularized boundary evaluation

struct ChartEvalOpts {
  // Boundary offset for the extrapolation.  The offset point sits at raw
  // distance ~ eps^-2 (face charts) or eps^-3 (corner charts); pushing it
  // further out makes the double-precision null-coordinate cancellation
  // (O(|zeta|) carriers holding O(1) payloads) dominate the error.  1e-3
  // balances that roundoff against the O(eps^2) extrapolation truncation.
  double richardson_eps = 1e-3;
  double activation = 1e-7;      // coordinates closer than this count as on
                                 // the boundary
};

namespace detail {

// Offsets a chart point off its boundary strata: face coordinates below the
// activation threshold move to eps, a vanishing fiber-radial coordinate moves
// to -eps (the canonical-sheet side).  Returns false if nothing was moved.
inline bool offset_boundary(ChartId id, const Eigen::Vector4d& c, double eps,
                            double activation, Eigen::Vector4d& out) {
  const ChartShape sh = chart_shape(id);
  out = c;
  bool moved = false;
  for (int i = 0; i < 4; ++i) {
    if (sh.face_coord[i] && c[i] < activation) {
      out[i] = std::max(c[i], 0.0) + eps;
      moved = true;
    }
  }
  if (sh.df_coord >= 0 && std::abs(c[sh.df_coord]) < activation) {
    out[sh.df_coord] = c[sh.df_coord] - eps;
    moved = true;
  }
  return moved;
}

// Quadratic Richardson extrapolation from offsets eps, 2 eps, 4 eps.  The
// rescaled symbol picks up a fiber-radial^2 mass term along the offset, so
// a linear (two-point) extrapolation would leave an O(eps^2) residue; the
// three-point rule is exact through quadratics and leaves O(eps^3).
template <class F>
auto boundary_eval(ChartId id, const Eigen::Vector4d& c, F&& f,
                   const ChartEvalOpts& opts) {
  Eigen::Vector4d c1;
  if (!offset_boundary(id, c, opts.richardson_eps, opts.activation, c1)) {
    return f(c);
  }
  Eigen::Vector4d c2, c4;
  offset_boundary(id, c, 2.0 * opts.richardson_eps, opts.activation, c2);
  offset_boundary(id, c, 4.0 * opts.richardson_eps, opts.activation, c4);
  auto f1 = f(c1);
  auto f2 = f(c2);
  auto f4 = f(c4);
  return decltype(f1)((8.0 * f1 - 6.0 * f2 + f4) / 3.0);
}

}  // namespace detail

// Rescaled Hamiltonian field in chart coordinates: the pushforward of the
// raw field multiplied by the chart weight.  Continuous up to the chart's
// boundary portions (faces and fiber infinity), where it is evaluated by
// Richardson extrapolation from the interior.
inline Eigen::Vector4d chart_field(const Metric& g, const ChartCopy& copy,
                                   const Eigen::Vector4d& c,
                                   const ChartEvalOpts& opts = {}) {
  const Eigen::Vector4d s = chart_reflection_signs(copy);
  const auto f = [&](const Eigen::Vector4d& ci) -> Eigen::Vector4d {
    // Reflect the canonical representative into the copy's quadrant,
    // evaluate the metric-honest raw field there, and reflect the velocity
    // back before applying the canonical differentials.
    const detail::RawPoint rc = detail::canonical_to_raw(copy.id, ci);
    const PhasePoint actual =
        phase_point1(s[0] * rc.t, s[1] * rc.x, s[2] * rc.tau, s[3] * rc.xi);
    const PhaseVelocity wa = hamiltonian_field_raw(g, actual);
    PhaseVelocity wc;
    wc.zdot = Eigen::Vector2d(s[0] * wa.zdot[0], s[1] * wa.zdot[1]);
    wc.zetadot = Eigen::Vector2d(s[2] * wa.zetadot[0], s[3] * wa.zetadot[1]);
    const Eigen::Vector4d vel =
        detail::canonical_chart_velocity(copy.id, ci, wc);
    return detail::chart_weight(copy.id, ci) * vel;
  };
  return detail::boundary_eval(copy.id, c, f, opts);
}

// Rescaled principal symbol in the chart: p multiplied by the square of the
// fiber rescale factor (|q|-type coordinate; 1 for the cap chart), which
// makes it finite and nondegenerate up to fiber infinity.
inline double chart_symbol(const Metric& g, const ChartCopy& copy,
                           const Eigen::Vector4d& c, double msq,
                           const ChartEvalOpts& opts = {}) {
  const auto f = [&](const Eigen::Vector4d& ci) -> double {
    const PhasePoint p = chart_to_raw(
        ChartCopy{copy.id, copy.time_sign, copy.space_sign, copy.sheet_sign},
        ci);
    const double scale = detail::fiber_rescale(copy.id, ci);
    return scale * scale * principal_symbol(g, p, msq);
  };
  return detail::boundary_eval(copy.id, c, f, opts);
}

// Direction field in the chart (unit length, zero at fixed points).
inline FieldSample chart_field_unit(const Metric& g, const ChartCopy& copy,
                                    const Eigen::Vector4d& c,
                                    const ChartEvalOpts& opts = {},
                                    double fixed_tol = 1e-10) {
  const Eigen::Vector4d v = chart_field(g, copy, c, opts);
  FieldSample out;
  out.speed = v.norm();
  if (out.speed <= fixed_tol) {
    out.is_fixed_point = true;
    out.direction = Eigen::VectorXd::Zero(4);
  } else {
    out.direction = v / out.speed;
  }
  return out;
}

// Fiber-radial coordinate of a chart point: the signed reciprocal frequency
// (0 exactly at fiber infinity); for the cap chart the smooth interior proxy
// 1/sqrt(1 + |zeta|^2) is used instead.
inline double chart_df_coordinate(const ChartCopy& copy,
                                  const Eigen::Vector4d& c) {
  const ChartShape sh = chart_shape(copy.id);
  if (sh.df_coord >= 0) return c[sh.df_coord];
  return 1.0 / std::sqrt(1.0 + c[2] * c[2] + c[3] * c[3]);
}

}  // namespace desclab
