#pragma once

// Octagonal compactification of (1+d)-dimensional Minkowski-like spacetimes.
//
// The radial compactification of the (t, x) slab is refined so that the
// boundary sphere at infinity splits into five closed faces:
//
//   Pf   past timelike cap        (t -> -inf, r/|t| -> 0..1)
//   nPf  past null face           (t -> -inf, t + r bounded)
//   Sf   spacelike face           (r -> +inf, |t|/r < 1)
//   nFf  future null face         (t -> +inf, t - r bounded)
//   Ff   future timelike cap      (t -> +inf, r/t -> 0..1)
//
// Each face carries a boundary defining function (bdf): a positive function
// of (t, x) that tends to zero precisely at that face and is comparable to
// the reciprocal distance scale of the face. The null faces carry the square
// root scale (their bdfs decay like r^{-1/2} along null directions), which is
// what makes the blended frames below uniformly well behaved.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace desclab {

// ---------------------------------------------------------------------------
// Faces

enum class Face { Pf, nPf, Sf, nFf, Ff };

inline constexpr std::array<Face, 5> all_faces = {Face::Pf, Face::nPf, Face::Sf,
                                                  Face::nFf, Face::Ff};

inline constexpr std::string_view face_name(Face f) {
  switch (f) {
    case Face::Pf: return "Pf";
    case Face::nPf: return "nPf";
    case Face::Sf: return "Sf";
    case Face::nFf: return "nFf";
    case Face::Ff: return "Ff";
  }
  return "?";
}

inline std::optional<Face> face_from_name(std::string_view s) {
  for (Face f : all_faces)
    if (face_name(f) == s) return f;
  return std::nullopt;
}

// t -> -t exchanges the past and future faces and fixes Sf.
inline constexpr Face time_reflected(Face f) {
  switch (f) {
    case Face::Pf: return Face::Ff;
    case Face::nPf: return Face::nFf;
    case Face::Sf: return Face::Sf;
    case Face::nFf: return Face::nPf;
    case Face::Ff: return Face::Pf;
  }
  return f;
}

inline constexpr std::size_t face_index(Face f) {
  return static_cast<std::size_t>(f);
}

// ---------------------------------------------------------------------------
// Points

struct SpacetimePoint {
  double t = 0.0;
  Eigen::VectorXd x;  // spatial part, dimension d >= 1

  int d() const { return static_cast<int>(x.size()); }
  double r() const { return x.norm(); }

  SpacetimePoint time_reflected() const { return {-t, x}; }
};

inline SpacetimePoint point1(double t, double x) {
  SpacetimePoint z;
  z.t = t;
  z.x = Eigen::VectorXd::Constant(1, x);
  return z;
}

inline SpacetimePoint point2(double t, double x, double y) {
  SpacetimePoint z;
  z.t = t;
  z.x = Eigen::VectorXd(2);
  z.x << x, y;
  return z;
}

inline SpacetimePoint point3(double t, double x, double y, double w) {
  SpacetimePoint z;
  z.t = t;
  z.x = Eigen::VectorXd(3);
  z.x << x, y, w;
  return z;
}

// Point at radius r along the spatial axis `axis` (default first axis).
inline SpacetimePoint point_radial(double t, double r, int d, int axis = 0,
                                   double sign = 1.0) {
  SpacetimePoint z;
  z.t = t;
  z.x = Eigen::VectorXd::Zero(d);
  z.x[axis] = sign * r;
  return z;
}

// ---------------------------------------------------------------------------
// Boundary defining functions

// Smoothed positive part: sigma_plus(x) = (x + sqrt(x^2 + 1)) / 2.
// Monotone increasing, ~x for x >> 0, ~ -1/(4x) for x << 0, value 1/2 at 0.
inline double sigma_plus(double x) {
  // For large negative x the naive form suffers cancellation; use the
  // algebraically equivalent 1 / (2 (sqrt(x^2+1) - x)).
  if (x < 0.0) return 0.5 / (std::sqrt(x * x + 1.0) - x);
  return 0.5 * (x + std::sqrt(x * x + 1.0));
}

// Global scale w = (1 + t^2 + r^2)^{1/2}.
inline double w_scale(const SpacetimePoint& z) {
  return std::sqrt(1.0 + z.t * z.t + z.x.squaredNorm());
}

namespace detail {
inline double clamp_unit(double rho) { return std::min(rho, 1.0); }
}  // namespace detail

// bdf of a single face, clamped into (0, 1].
inline double bdf(Face f, const SpacetimePoint& z) {
  const double t = z.t;
  const double r = z.r();
  switch (f) {
    case Face::nFf: {
      const double u = t - r;
      return detail::clamp_unit(std::pow(u * u + 1.0, 0.25) /
                                std::sqrt(w_scale(z)));
    }
    case Face::nPf: {
      const double u = t + r;
      return detail::clamp_unit(std::pow(u * u + 1.0, 0.25) /
                                std::sqrt(w_scale(z)));
    }
    case Face::Ff:
      return 1.0 / (1.0 + sigma_plus(t - r));
    case Face::Pf:
      return 1.0 / (1.0 + sigma_plus(-t - r));
    case Face::Sf:
      return 1.0 / (1.0 + sigma_plus(r - std::sqrt(t * t + 1.0)));
  }
  return 1.0;
}

struct BdfVector {
  std::array<double, 5> rho{};  // indexed by face_index
  double operator[](Face f) const { return rho[face_index(f)]; }
};

inline BdfVector bdfs(const SpacetimePoint& z) {
  BdfVector v;
  for (Face f : all_faces) v.rho[face_index(f)] = bdf(f, z);
  return v;
}

// Product of all five bdfs: the total boundary distance scale.
inline double total_bdf(const SpacetimePoint& z) {
  double p = 1.0;
  for (Face f : all_faces) p *= bdf(f, z);
  return p;
}

// The null faces enter squared because of their square-root scale; the
// weighted product w * rho_Pf * rho_nPf^2 * rho_Sf * rho_nFf^2 * rho_Ff is
// bounded above and below on all of spacetime (comparability of the bdf
// system with the global scale w).
inline double comparability_product(const SpacetimePoint& z) {
  const BdfVector v = bdfs(z);
  return w_scale(z) * v[Face::Pf] * v[Face::nPf] * v[Face::nPf] * v[Face::Sf] *
         v[Face::nFf] * v[Face::nFf] * v[Face::Ff];
}

// Combined null-face scale used by the blended frames.
inline double rho_null(const SpacetimePoint& z) {
  return bdf(Face::nPf, z) * bdf(Face::nFf, z);
}

// ---------------------------------------------------------------------------
// Cutoffs

// Clamped quintic smoothstep: 0 for u <= 0, 1 for u >= 1, C^2 join.
inline double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// Smooth transition supported on [lo, hi].
inline double smoothstep_on(double s, double lo, double hi) {
  return smoothstep((s - lo) / (hi - lo));
}

// Cutoff selecting the far timelike/null region: vanishes for r <= 1 and for
// |t| <= r/4, equals one for r >= 2 and |t| >= r/2.
inline double null_cutoff_chi(const SpacetimePoint& z) {
  const double r = z.r();
  if (r <= 1.0) return 0.0;
  const double radial = smoothstep(r - 1.0);
  const double cone = smoothstep((std::abs(z.t) - 0.25 * r) / (0.25 * r));
  return radial * cone;
}

// ---------------------------------------------------------------------------
// Blended frames

enum class FrameRole { time, spatial, lightcone, angular };

inline constexpr std::string_view frame_role_name(FrameRole role) {
  switch (role) {
    case FrameRole::time: return "time";
    case FrameRole::spatial: return "spatial";
    case FrameRole::lightcone: return "lightcone";
    case FrameRole::angular: return "angular";
  }
  return "?";
}

struct FrameVector {
  FrameRole role;
  int index;                   // which spatial/angular slot (0 otherwise)
  Eigen::VectorXd components;  // length 1 + d, ordered (t, x_1, .., x_d)
};

// Spanning set of vector fields adapted to the compactification: near the
// origin it is the coordinate frame; far out along timelike/null directions
// the coordinate fields are damped by rho_null, a stretched lightcone field
// resolves the null direction, and angular fields resolve the sphere.
struct DescFrame {
  double chi = 0.0;
  std::vector<FrameVector> vectors;
};

inline DescFrame desc_frame(const SpacetimePoint& z) {
  const int d = z.d();
  const double chi = null_cutoff_chi(z);
  const double rn = rho_null(z);
  const double mu = (1.0 - chi) + chi * rn;

  DescFrame frame;
  frame.chi = chi;

  auto push = [&](FrameRole role, int index, const Eigen::VectorXd& comp) {
    if (comp.norm() == 0.0) return;
    frame.vectors.push_back({role, index, comp});
  };

  Eigen::VectorXd time_field = Eigen::VectorXd::Zero(1 + d);
  time_field[0] = mu;
  push(FrameRole::time, 0, time_field);

  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(1 + d);
    v[1 + j] = mu;
    push(FrameRole::spatial, j, v);
  }

  if (chi > 0.0) {
    // chi > 0 forces r > 1 and |t| > r/4 > 0, so the unit radial direction
    // and the sign of t are both well defined.
    const double r = z.r();
    const Eigen::VectorXd xhat = z.x / r;
    const double st = (z.t > 0.0) ? 1.0 : -1.0;

    Eigen::VectorXd cone = Eigen::VectorXd::Zero(1 + d);
    cone[0] = chi / rn * st;
    cone.tail(d) = (chi / rn) * xhat;
    push(FrameRole::lightcone, 0, cone);

    if (d >= 2) {
      // Orthonormal basis of the tangent space of the sphere at xhat by
      // Householder reflection of the coordinate basis.
      Eigen::VectorXd e0 = Eigen::VectorXd::Zero(d);
      e0[0] = 1.0;
      Eigen::VectorXd u = xhat - e0;
      const double un = u.norm();
      for (int k = 1; k < d; ++k) {
        Eigen::VectorXd ek = Eigen::VectorXd::Zero(d);
        ek[k] = 1.0;
        Eigen::VectorXd tang =
            (un < 1e-14) ? ek
                         : (ek - (2.0 * u.dot(ek) / (un * un)) * u).eval();
        Eigen::VectorXd v = Eigen::VectorXd::Zero(1 + d);
        v.tail(d) = (chi / r) * tang;
        push(FrameRole::angular, k - 1, v);
      }
    }
  }

  return frame;
}

// ---------------------------------------------------------------------------
// Ray families into the faces
//
// Dyadic rays r_k = 2^k approaching a chosen face:
//   Sf:  t = c * r,   r = 2^k, |c| < 1
//   Ff:  t = 2^k,     r = c * t, 0 <= c < 1
//   Pf:  t = -2^k,    r = c * |t|, 0 <= c < 1
//   nFf: t = r + v,   r = 2^k   (v fixed offset)
//   nPf: t = -(r + v), r = 2^k

struct RayParams {
  double c = 0.0;     // slope for Sf/Ff/Pf families
  double v = 0.0;     // null offset for nFf/nPf families
  int axis = 0;       // spatial axis of the ray
  double sign = 1.0;  // spatial direction
};

inline SpacetimePoint ray(Face f, const RayParams& p, int k, int d = 1) {
  const double rk = std::ldexp(1.0, k);
  switch (f) {
    case Face::Sf:
      if (std::abs(p.c) >= 1.0)
        throw std::invalid_argument("Sf ray requires |c| < 1");
      return point_radial(p.c * rk, rk, d, p.axis, p.sign);
    case Face::Ff:
      if (p.c < 0.0 || p.c >= 1.0)
        throw std::invalid_argument("Ff ray requires 0 <= c < 1");
      return point_radial(rk, p.c * rk, d, p.axis, p.sign);
    case Face::Pf:
      if (p.c < 0.0 || p.c >= 1.0)
        throw std::invalid_argument("Pf ray requires 0 <= c < 1");
      return point_radial(-rk, p.c * rk, d, p.axis, p.sign);
    case Face::nFf:
      return point_radial(rk + p.v, rk, d, p.axis, p.sign);
    case Face::nPf:
      return point_radial(-(rk + p.v), rk, d, p.axis, p.sign);
  }
  throw std::invalid_argument("unknown face");
}

// Corner probe: t = r + r^beta with 0 < beta < 1 interpolates between the
// null face (beta -> 0) and the future cap (beta -> 1).
inline SpacetimePoint corner_probe(double beta, int k, int d = 1) {
  if (beta <= 0.0 || beta >= 1.0)
    throw std::invalid_argument("corner probe requires 0 < beta < 1");
  const double rk = std::ldexp(1.0, k);
  return point_radial(rk + std::pow(rk, beta), rk, d);
}

}  // namespace desclab
