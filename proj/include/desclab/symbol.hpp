#pragma once

// Principal symbol of the wave-type operator, its Hamiltonian field in raw
// phase-space coordinates, the fiber-projectivized flow used at fiber
// infinity, and a connectivity census of the characteristic set.
//
// Conventions, fixed across the library:
//   * base coordinates (t, x_1..x_d); covector zeta = (tau, xi);
//   * signature (-,+,..,+), so Minkowski has g^{-1} = diag(-1, 1, .., 1) and
//     p(z, zeta) = g^{-1}_z(zeta, zeta) + msq;
//   * the Hamiltonian field is dz/ds = dp/dzeta, dzeta/ds = -dp/dz;
//   * sheet "+" of the characteristic set is the component with tau < 0; on
//     it dt/ds = -2 tau > 0, i.e. the flow moves forward in coordinate time.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"
#include "metrics.hpp"

namespace desclab {

// ---------------------------------------------------------------------------
// Phase points and the raw Hamiltonian field

struct PhasePoint {
  SpacetimePoint z;
  double tau = 0.0;
  Eigen::VectorXd xi;  // spatial covector components, size d

  int d() const { return z.d(); }

  Eigen::VectorXd zeta() const {
    Eigen::VectorXd c(1 + xi.size());
    c[0] = tau;
    c.tail(xi.size()) = xi;
    return c;
  }
};

inline PhasePoint phase_point1(double t, double x, double tau, double xi) {
  PhasePoint p;
  p.z = point1(t, x);
  p.tau = tau;
  p.xi = Eigen::VectorXd::Constant(1, xi);
  return p;
}

inline double principal_symbol(const Metric& g, const PhasePoint& p,
                               double msq) {
  const Eigen::VectorXd zeta = p.zeta();
  return zeta.dot(g.ginv(p.z) * zeta) + msq;
}

struct PhaseVelocity {
  Eigen::VectorXd zdot;     // (dt/ds, dx/ds)
  Eigen::VectorXd zetadot;  // (dtau/ds, dxi/ds)
};

// Raw Hamiltonian field of p = g^{-1}(zeta, zeta) + msq.  The mass term is
// constant on the base and fiber-independent of z, so it does not enter.
inline PhaseVelocity hamiltonian_field_raw(const Metric& g,
                                           const PhasePoint& p) {
  const Eigen::VectorXd zeta = p.zeta();
  const int n = 1 + p.d();
  PhaseVelocity v;
  v.zdot = 2.0 * (g.ginv(p.z) * zeta);
  v.zetadot.resize(n);
  for (int mu = 0; mu < n; ++mu) {
    v.zetadot[mu] = -zeta.dot(g.dginv(p.z, mu) * zeta);
  }
  return v;
}

// Direction field: the raw Hamiltonian field normalized to unit length.  At
// (numerical) fixed points the zero vector is returned and flagged rather
// than treated as an error.
struct FieldSample {
  Eigen::VectorXd direction;  // unit 2(1+d)-vector, zero at fixed points
  double speed = 0.0;
  bool is_fixed_point = false;
};

inline FieldSample hamiltonian_field(const Metric& g, const PhasePoint& p,
                                     double fixed_tol = 1e-12) {
  const PhaseVelocity v = hamiltonian_field_raw(g, p);
  const int n = 1 + p.d();
  Eigen::VectorXd w(2 * n);
  w.head(n) = v.zdot;
  w.tail(n) = v.zetadot;
  FieldSample out;
  out.speed = w.norm();
  const double scale = 1.0 + p.zeta().norm() + p.zeta().squaredNorm();
  if (out.speed <= fixed_tol * scale) {
    out.is_fixed_point = true;
    out.direction = Eigen::VectorXd::Zero(2 * n);
  } else {
    out.direction = w / out.speed;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Null-coordinate helpers (d = 1)
//
// u = t + x, v = t - x;  zeta = a du + b dv with a = (tau+xi)/2,
// b = (tau-xi)/2.  The change is a cotangent lift, hence canonical, and for
// Minkowski p = -4ab + msq.

struct NullCoords {
  double u = 0, v = 0, a = 0, b = 0;
};

inline NullCoords to_null(double t, double x, double tau, double xi) {
  return {t + x, t - x, 0.5 * (tau + xi), 0.5 * (tau - xi)};
}

inline void from_null(const NullCoords& n, double& t, double& x, double& tau,
                      double& xi) {
  t = 0.5 * (n.u + n.v);
  x = 0.5 * (n.u - n.v);
  tau = n.a + n.b;
  xi = n.a - n.b;
}

// Velocities transform the same (linear) way.
inline NullCoords null_velocity(const PhaseVelocity& w) {
  return {w.zdot[0] + w.zdot[1], w.zdot[0] - w.zdot[1],
          0.5 * (w.zetadot[0] + w.zetadot[1]),
          0.5 * (w.zetadot[0] - w.zetadot[1])};
}

// ---------------------------------------------------------------------------
// Fiber-projectivized flow at fiber infinity (d = 1)
//
// At infinite frequency only the direction of the covector matters and the
// mass term drops out.  The state is (t, x, theta) with
// zeta / |zeta| = (cos theta, sin theta); the field is the degree-zero
// rescaling of the Hamiltonian field.

struct CosphereState {
  double t = 0, x = 0, theta = 0;
};

inline Eigen::Vector3d cosphere_field(const Metric& g,
                                      const CosphereState& s) {
  PhasePoint p = phase_point1(s.t, s.x, std::cos(s.theta), std::sin(s.theta));
  const PhaseVelocity w = hamiltonian_field_raw(g, p);
  // Angular part of the fiber velocity; the radial part only rescales the
  // fiber and is dropped by the projectivization.
  const double thetadot =
      std::cos(s.theta) * w.zetadot[1] - std::sin(s.theta) * w.zetadot[0];
  return {w.zdot[0], w.zdot[1], thetadot};
}

// Reciprocal frequency scale measured in the degenerate boundary frame.  The
// tangential-null frequency is amplified by 1/rho at the null faces, so a
// finite raw covector carried along a light ray registers as fiber-infinite
// (the returned coordinate tends to zero), while covectors at the caps keep
// their scattering-frame size.  d = 1.
inline double fiber_infinity_coordinate(const PhasePoint& p) {
  if (p.d() != 1) throw std::invalid_argument("fiber coordinate needs d == 1");
  const NullCoords n = to_null(p.z.t, p.z.x[0], p.tau, p.xi[0]);
  const double rho = std::max(rho_null(p.z), 1e-300);
  const double a_amp = n.a * rho;
  const double b_amp = n.b / rho;
  return 1.0 / std::sqrt(1.0 + a_amp * a_amp + b_amp * b_amp);
}

// ---------------------------------------------------------------------------
// Characteristic-set connectivity (d = 1)
//
// Samples {p = 0} on a fiber grid at a fixed base point and counts connected
// pieces by joining zero crossings of grid edges through shared cells.  In
// addition to the raw piece count, pieces are grouped by the sign of tau:
// the sheet labels "+1" (tau < 0 throughout), "-1" (tau > 0), "0" (mixed).
// When msq + Re(lambda) vanishes the pieces meet at the fiber origin; the
// origin is excised, the raw pieces are reported honestly (four rays when
// d = 1) and the contact is flagged.

struct CharOpts {
  int grid_n = 201;             // grid points per fiber axis
  double near_df_fraction = 0;  // >0: keep only |zeta| >= fraction * radius
  double zero_section_tol = 1e-12;
};

struct CharacteristicReport {
  int pieces = 0;
  int sheets = 0;                // distinct sheet labels among the pieces
  bool zero_section = false;     // pieces meet at the fiber origin
  std::vector<int> piece_sheet;  // per piece: +1, -1 or 0 (mixed)
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void join(std::size_t i, std::size_t j) {
    i = find(i);
    j = find(j);
    if (i != j) parent_[i] = j;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

inline CharacteristicReport characteristic_components(
    const Metric& g, const SpacetimePoint& z, double msq_plus_relambda,
    double shell_radius, const CharOpts& opts = {}) {
  if (g.dim() != 1) {
    throw std::invalid_argument("characteristic_components needs d == 1");
  }
  const int n = opts.grid_n;
  if (n < 16) throw std::invalid_argument("grid too coarse");
  const double R = shell_radius;
  const Eigen::MatrixXd gi = g.ginv(z);
  const double c = msq_plus_relambda;

  CharacteristicReport rep;
  rep.zero_section = std::abs(c) <= opts.zero_section_tol;
  double inner = opts.near_df_fraction * R;
  if (rep.zero_section) inner = std::max(inner, 0.05 * R);

  const auto coord = [&](int i) { return -R + 2.0 * R * i / (n - 1); };
  const auto pvalue = [&](int i, int j) {
    Eigen::Vector2d zeta(coord(i), coord(j));
    return zeta.dot(gi * zeta) + c;
  };
  Eigen::MatrixXd val(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) val(i, j) = pvalue(i, j);

  // Edge node ids: tau-direction edges first, then xi-direction edges.
  const std::size_t nv = static_cast<std::size_t>(n - 1) * n;
  const auto ev = [&](int i, int j) {  // between (i,j) and (i+1,j)
    return static_cast<std::size_t>(i) * n + j;
  };
  const auto eh = [&](int i, int j) {  // between (i,j) and (i,j+1)
    return nv + static_cast<std::size_t>(i) * (n - 1) + j;
  };
  const std::size_t total = nv + static_cast<std::size_t>(n) * (n - 1);
  detail::UnionFind uf(total);
  std::vector<std::uint8_t> used(total, 0);
  // tau of the interpolated crossing per used edge.
  std::vector<double> tau_at(total, 0.0);

  const auto pos = [&](double p) { return p > 0.0; };
  const auto mark = [&](std::size_t id, double p0, double p1, double tau0,
                        double tau1) {
    const double tstar = (p0 == p1) ? 0.5 : p0 / (p0 - p1);
    used[id] = 1;
    tau_at[id] = tau0 + tstar * (tau1 - tau0);
  };

  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const double tc = 0.5 * (coord(i) + coord(i + 1));
      const double xc = 0.5 * (coord(j) + coord(j + 1));
      const double rad = std::hypot(tc, xc);
      if (rad > R || rad < inner) continue;
      const double v00 = val(i, j), v10 = val(i + 1, j);
      const double v01 = val(i, j + 1), v11 = val(i + 1, j + 1);
      std::size_t ids[4];
      int m = 0;
      if (pos(v00) != pos(v10)) {
        mark(ev(i, j), v00, v10, coord(i), coord(i + 1));
        ids[m++] = ev(i, j);
      }
      if (pos(v01) != pos(v11)) {
        mark(ev(i, j + 1), v01, v11, coord(i), coord(i + 1));
        ids[m++] = ev(i, j + 1);
      }
      if (pos(v00) != pos(v01)) {
        mark(eh(i, j), v00, v01, coord(i), coord(i));
        ids[m++] = eh(i, j);
      }
      if (pos(v10) != pos(v11)) {
        mark(eh(i + 1, j), v10, v11, coord(i + 1), coord(i + 1));
        ids[m++] = eh(i + 1, j);
      }
      for (int k = 1; k < m; ++k) uf.join(ids[0], ids[k]);
    }
  }

  // Collect components with min/max tau.
  std::vector<std::size_t> roots;
  std::vector<double> tmin, tmax;
  std::vector<int> root_index(total, -1);
  for (std::size_t id = 0; id < total; ++id) {
    if (!used[id]) continue;
    const std::size_t r = uf.find(id);
    if (root_index[r] < 0) {
      root_index[r] = static_cast<int>(roots.size());
      roots.push_back(r);
      tmin.push_back(tau_at[id]);
      tmax.push_back(tau_at[id]);
    } else {
      const int k = root_index[r];
      tmin[k] = std::min(tmin[k], tau_at[id]);
      tmax[k] = std::max(tmax[k], tau_at[id]);
    }
  }
  rep.pieces = static_cast<int>(roots.size());
  bool has_plus = false, has_minus = false, has_mixed = false;
  for (std::size_t k = 0; k < roots.size(); ++k) {
    int label = 0;
    if (tmax[k] < 0) label = +1;
    else if (tmin[k] > 0) label = -1;
    rep.piece_sheet.push_back(label);
    if (label == +1) has_plus = true;
    else if (label == -1) has_minus = true;
    else has_mixed = true;
  }
  rep.sheets = (has_plus ? 1 : 0) + (has_minus ? 1 : 0) + (has_mixed ? 1 : 0);
  return rep;
}

}  // namespace desclab
