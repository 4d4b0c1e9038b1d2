#pragma once

// Consolidated verification battery: ten numbered checks, each exercising
// one quantitative claim end to end with fixed parameters and tolerances.
// The same battery backs the standalone checker binary and the `report`
// subcommand; every check reports a one-line detail with the measured
// values next to their bounds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "desclab/charts.hpp"
#include "desclab/discrete_op.hpp"
#include "desclab/fit.hpp"
#include "desclab/flow.hpp"
#include "desclab/fourier.hpp"
#include "desclab/geometry.hpp"
#include "desclab/grid.hpp"
#include "desclab/metrics.hpp"
#include "desclab/selfadjoint.hpp"
#include "desclab/solve.hpp"
#include "desclab/symbol.hpp"
#include "desclab/thresholds.hpp"

namespace desclab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AcceptanceOpts {
  std::set<int> only;  // empty: run all ten
};

namespace acceptance_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Lazily shared heavy artifacts (criteria 5 and 7 both need the census).
struct Context {
  MetricPtr mink1 = make_minkowski(1);
  std::optional<std::vector<RadialSet>> census;
  std::optional<ConnectionReport> connections;

  const std::vector<RadialSet>& census_ref() {
    if (!census) census = find_radial_sets(*mink1, 1.0);
    return *census;
  }
  const ConnectionReport& connections_ref() {
    if (!connections) connections = sample_connections(*mink1, +1);
    return *connections;
  }
};

// --- 1: weighted threshold families clear every bound with floor N-1 ----

inline CriterionResult criterion_families() {
  CriterionResult r{1, "threshold-families", true, ""};
  std::ostringstream d;
  for (double N : {1.1, 2.0, 5.0, 10.0}) {
    const SlackReport fut = slacks(family_future_weighted(N), CaseId::one);
    const SlackReport past = slacks(family_past_weighted(N), CaseId::two);
    // The binding lower-bound slack is N-1 with exact arithmetic; the
    // remaining (upper) slacks must stay strictly positive.
    if (fut.min_lower_slack != N - 1.0 || !fut.all_strict) r.pass = false;
    if (past.min_lower_slack != N - 1.0 || !past.all_strict) r.pass = false;
  }
  const SlackReport unit = slacks(family_future_weighted(1.0), CaseId::one);
  if (unit.min_slack != 0.0 || unit.all_strict) r.pass = false;
  d << "binding lower slack == N-1 bitwise for N in {1.1,2,5,10}, both "
       "weighted families strict; N=1 floor slack "
    << num(unit.min_slack);
  r.detail = d.str();
  return r;
}

// --- 2: the two constant-order systems are jointly infeasible ------------

inline CriterionResult criterion_incompatibility() {
  CriterionResult r{2, "two-sheet-incompatibility", true, ""};
  ThresholdSystem sys;
  sys.add_case(CaseId::one);
  sys.add_case(CaseId::two);
  const ThresholdSolveReport rep = solve_threshold_system(sys);
  const FeasibilityCertificate& c = rep.certificate;
  r.pass = !rep.feasible && std::abs(rep.sigma) <= 1e-8 &&
           c.residual < 1e-8 && std::abs(c.weight_sum - 1.0) < 1e-9 &&
           c.y.minCoeff() >= 0.0 && c.bound_value <= 1e-8;
  std::ostringstream d;
  d << "joint system infeasible, best min slack " << num(rep.sigma)
    << "; certificate residual " << num(c.residual)
    << " (bound 1e-8), certified max " << num(c.bound_value);
  r.detail = d.str();
  return r;
}

// --- 3: decay pentuple of the radiating metric ---------------------------

inline CriterionResult criterion_pentuple() {
  CriterionResult r{3, "radiating-decay-pentuple", true, ""};
  auto met = make_vaidya(desk_vaidya_params(), 1);
  struct Case {
    Face face;
    RayParams p;
    double alpha;
  };
  const std::vector<Case> battery = {
      {Face::Sf, {.c = 0.0}, 1.0},  {Face::Sf, {.c = 0.3}, 1.0},
      {Face::Ff, {.c = 0.3}, 1.0},  {Face::Pf, {.c = 0.3}, 1.0},
      {Face::nFf, {.v = 0.0}, 4.0}, {Face::nFf, {.v = 5.0}, 4.0},
      {Face::nPf, {.v = 0.0}, 4.0}, {Face::nPf, {.v = -5.0}, 4.0},
  };
  double by_face[5] = {0, 0, 0, 0, 0};
  for (const Case& c : battery) {
    const DecayFit f = decay_fit(*met, c.face, c.p);
    if (std::abs(f.alpha - c.alpha) > 0.15 || f.residual >= 0.05)
      r.pass = false;
    by_face[face_index(c.face)] = f.alpha;
  }
  std::ostringstream d;
  d << "fitted orders (Pf,nPf,Sf,nFf,Ff) = (" << num(by_face[0]) << ","
    << num(by_face[1]) << "," << num(by_face[2]) << "," << num(by_face[3])
    << "," << num(by_face[4]) << ") vs (1,4,1,4,1) +- 0.15, residuals < 0.05";
  r.detail = d.str();
  return r;
}

// --- 4: coordinate choice controls the null-face order -------------------

inline CriterionResult criterion_contrast() {
  CriterionResult r{4, "compactification-contrast", true, ""};
  auto naive = make_schwarzschild_naive(1.0, 1);
  auto push = make_schwarzschild_tortoise(1.0, 1);
  const DecayFit f0 = decay_fit(*naive, Face::nFf, {.v = 0.0});
  const DecayFit fn = decay_fit(*push, Face::nFf, {.v = 0.0});
  const DecayFit fp = decay_fit(*push, Face::nPf, {.v = 0.0});
  if (std::abs(f0.alpha) > 0.1) r.pass = false;
  if (fn.alpha < 3.8 || fn.residual >= 0.05) r.pass = false;
  if (fp.alpha < 3.8) r.pass = false;
  double worst_one = 0.0;
  for (auto [face, c] : {std::pair{Face::Sf, 0.0}, {Face::Sf, 0.3},
                         {Face::Ff, 0.3}, {Face::Pf, 0.3}}) {
    const DecayFit f = decay_fit(*push, face, {.c = c});
    worst_one = std::max(worst_one, std::abs(f.alpha - 1.0));
  }
  if (worst_one > 0.2) r.pass = false;
  std::ostringstream d;
  d << "static-coordinate null-face order " << num(f0.alpha)
    << " (|.| <= 0.1); retarded-time orders nFf " << num(fn.alpha) << ", nPf "
    << num(fp.alpha) << " (>= 3.8); cap/spacelike orders within "
    << num(worst_one) << " of 1 (bound 0.2)";
  r.detail = d.str();
  return r;
}

// --- 5: the census finds and classifies every critical family ------------

inline CriterionResult criterion_census(Context& ctx) {
  CriterionResult r{5, "radial-set-census", true, ""};
  const std::vector<RadialSet>& census = ctx.census_ref();
  if (census.size() != 16) r.pass = false;
  double min_eig = std::numeric_limits<double>::infinity();
  double min_df_dist = std::numeric_limits<double>::infinity();
  int n_stable = 0;
  for (const RadialSet& rs : census) {
    if (rs.stable) ++n_stable;
    switch (rs.key.family) {
      case SetFamily::R:
        if (rs.on_df) r.pass = false;
        min_df_dist = std::min(min_df_dist, rs.df_distance);
        break;
      case SetFamily::N:
        if (rs.class_sigma != Stability::saddle) r.pass = false;
        if (rs.class_df != Stability::sink && rs.class_df != Stability::source)
          r.pass = false;
        break;
      case SetFamily::C:
      case SetFamily::K:
        if (rs.class_sigma != Stability::saddle ||
            rs.class_df != Stability::saddle)
          r.pass = false;
        break;
      default:
        r.pass = false;
    }
    min_eig = std::min(min_eig, min_used_magnitude(rs.eigen_sigma, 1e-4));
  }
  if (min_df_dist <= 0.1) r.pass = false;
  if (min_eig <= 1e-6) r.pass = false;
  if (n_stable != static_cast<int>(census.size())) r.pass = false;
  std::ostringstream d;
  d << census.size()
    << " families (expect 16); finite-frequency families at fiber coordinate "
       ">= "
    << num(min_df_dist) << " (bound 0.1); smallest tracked |eigenvalue| "
    << num(min_eig) << " (bound 1e-6); " << n_stable
    << " classifications stable under step halving";
  r.detail = d.str();
  return r;
}

// --- 6: black-hole null geodesic endpoints under the two charts ----------

inline CriterionResult criterion_endpoints() {
  CriterionResult r{6, "geodesic-endpoints", true, ""};
  const double m = 1.0;
  const double v_star = -(4.0 + 2.0 * std::log(2.0));
  auto naive = make_schwarzschild_naive(m, 1);
  PushforwardMetric tort(make_schwarzschild_naive(m, 1), make_tortoise(m));
  const PhasePoint start = phase_point1(0.0, 4.0, -1.0, 2.0);

  IntegrateOpts opts;
  opts.msq = 0.0;
  opts.max_length = 1e11;
  opts.max_steps = 5000;

  // Static-time chart: the outgoing null ray degenerates into the corner.
  const Trajectory tn = integrate_bichar(*naive, start, opts);
  const double corner_nFf = tn.back().bdf[Face::nFf];
  const double corner_Ff = tn.back().bdf[Face::Ff];
  if (tn.termination != Termination::boundary || corner_nFf >= 0.05 ||
      corner_Ff >= 0.05)
    r.pass = false;

  // Retarded-time chart: the same ray resolves into the null-face interior
  // at the right retarded time.  The long flat tail amplifies per-step
  // fiber error by ~4*arc, so the tolerance is tightened accordingly.
  IntegrateOpts long_opts = opts;
  long_opts.rtol = 1e-13;
  long_opts.atol = 1e-15;
  long_opts.max_steps = 40000;
  const Trajectory tt = integrate_bichar(tort, start, long_opts);
  const double end_nFf = tt.back().bdf[Face::nFf];
  const double end_Ff = tt.back().bdf[Face::Ff];
  const double v_hat = tt.back().p.z.t - tt.back().p.z.r();
  const double v_err = std::abs(v_hat - v_star);
  if (tt.termination != Termination::boundary || end_nFf >= 0.05 ||
      end_Ff <= 0.5 || v_err >= 0.01 * std::abs(v_star))
    r.pass = false;

  // Conservation of the retarded time along both versions of the ray.
  IntegrateOpts short_naive = opts;
  short_naive.max_length = 1e3;
  const Trajectory sn = integrate_bichar(*naive, start, short_naive);
  double worst_naive = 0.0;
  for (const TrajectorySample& s : sn.samples) {
    const double rr = s.p.z.r();
    const double v = s.p.z.t - (rr + 2.0 * m * std::log(rr - 2.0 * m));
    worst_naive = std::max(worst_naive, std::abs(v - v_star));
  }
  IntegrateOpts short_tort = short_naive;
  short_tort.rtol = 1e-12;
  short_tort.atol = 1e-14;
  const Trajectory st = integrate_bichar(tort, start, short_tort);
  double worst_tort = 0.0;
  for (const TrajectorySample& s : st.samples) {
    const SpacetimePoint z = tort.map().inverse(s.p.z);
    worst_tort =
        std::max(worst_tort, std::abs(tort.map().v_star(z.t, z.r()) - v_star));
  }
  if (worst_naive >= 1e-6 || worst_tort >= 1e-6) r.pass = false;

  std::ostringstream d;
  d << "static chart corner bdfs (" << num(corner_nFf) << "," << num(corner_Ff)
    << ") < 0.05; retarded chart lands at null-face bdf " << num(end_nFf)
    << " with |vhat - vstar| = " << num(v_err) << " (bound "
    << num(0.01 * std::abs(v_star)) << "); conservation drift "
    << num(worst_naive) << "/" << num(worst_tort) << " (bound 1e-6)";
  r.detail = d.str();
  return r;
}

// --- 7: the propagation order runs through the estimate chain ------------

inline CriterionResult criterion_order(Context& ctx) {
  CriterionResult r{7, "propagation-order", true, ""};
  const auto key = [](SetFamily f, int sheet, int time) {
    SetKey k;
    k.family = f;
    k.sheet_sign = sheet;
    k.time_sign = time;
    return k;
  };
  const std::vector<SetKey> chain = {
      key(SetFamily::N, +1, -1), key(SetFamily::C, +1, -1),
      key(SetFamily::K, +1, -1), key(SetFamily::K, +1, +1),
      key(SetFamily::C, +1, +1), key(SetFamily::N, +1, +1)};
  std::vector<SetKey> with, against;
  try {
    with = propagation_order(ctx.census_ref(), ctx.connections_ref().edges, +1,
                             FlowDirection::with_flow);
    against = propagation_order(ctx.census_ref(), ctx.connections_ref().edges,
                                +1, FlowDirection::against_flow);
  } catch (const CycleError&) {
    r.pass = false;
    r.detail = "connection graph unexpectedly cyclic";
    return r;
  }
  std::vector<SetKey> reversed(chain.rbegin(), chain.rend());
  if (with != chain || against != reversed) r.pass = false;
  std::ostringstream d;
  d << "with-flow order";
  for (const SetKey& k : with) d << " " << set_label(k);
  d << " (expected N+- C+- K+- K++ C++ N++); against-flow order is its exact "
       "reverse: "
    << (against == reversed ? "yes" : "NO");
  r.detail = d.str();
  return r;
}

// --- 8: exact free inverse, norm bound, and stable rapid decay -----------

inline CriterionResult criterion_free_resolvent() {
  CriterionResult r{8, "free-resolvent", true, ""};
  const std::complex<double> li(0.0, 1.0);
  // The box is wide relative to the source so the top grid frequency stays
  // moderate; the symbol magnitude bounds the FFT round-off amplification
  // in the round-trip residual.
  const GridSpec s1 = GridSpec::square(40.0, 1024, BoundaryRule::periodic);
  const GridField f1 = gaussian_field(s1, 2.0);
  if (outer_tail_fraction(f1) >= 1e-10) r.pass = false;

  const GridField u1 = free_resolvent(f1, li);
  const GridField res = apply_free_operator(u1, li);
  const double roundtrip = (res.values - f1.values).norm() / f1.values.norm();
  if (roundtrip >= 1e-12) r.pass = false;

  double worst_ratio = 0.0;
  for (const std::complex<double> lam :
       {std::complex<double>{0, 1}, {0, -1}, {0, 0.5}, {0, -0.5}, {1, 1},
        {1, -1}}) {
    const GridField u = free_resolvent(f1, lam);
    worst_ratio = std::max(
        worst_ratio, u.norm2() * std::abs(lam.imag()) / f1.norm2());
  }
  if (worst_ratio > 1.0 + 1e-12) r.pass = false;

  const GridSpec s2 = GridSpec::square(80.0, 2048, BoundaryRule::periodic);
  const GridField f2 = gaussian_field(s2, 2.0);
  const GridField u2 = free_resolvent(f2, li);
  const double drift = seminorm_table(u1).max_rel_change(seminorm_table(u2));
  if (drift >= 0.05) r.pass = false;

  std::ostringstream d;
  d << "round-trip residual " << num(roundtrip)
    << " (bound 1e-12); worst shifted-norm ratio " << num(worst_ratio)
    << " (bound 1); rapid-decay seminorm drift under box doubling "
    << num(drift) << " (bound 0.05)";
  r.detail = d.str();
  return r;
}

// --- 9: sparse and spectral solvers agree at second order ----------------

inline CriterionResult criterion_cross_check() {
  CriterionResult r{9, "solver-cross-check", true, ""};
  auto mink = make_minkowski(1);
  const std::complex<double> lambda(0.0, -1.0);
  const double T = 12.8;
  const double tol[2] = {0.05, 0.015};
  double errs[2] = {0, 0};
  int idx = 0;
  for (double h : {0.1, 0.05}) {
    const int n = static_cast<int>(std::lround(2 * T / h));
    GridSpec pg = GridSpec::square(T, n, BoundaryRule::periodic);
    GridSpec dg = GridSpec::square(T, n, BoundaryRule::dirichlet_zero);
    GridField f = gaussian_field(pg, 1.0);
    GridField uf = free_resolvent(f, lambda);
    uf.spec.boundary = BoundaryRule::dirichlet_zero;
    GridField fd = f;
    fd.spec = dg;
    DiscreteOperator op(mink, 0.0, 0.0, dg, StencilMode::staggered_symmetric);
    SolveReport rep;
    const GridField us = curved_resolvent(op, fd, lambda, &rep);
    if (rep.residual >= 1e-8) r.pass = false;
    errs[idx] = window_rel_error(us, uf, 0.5);
    if (errs[idx] >= tol[idx]) r.pass = false;
    ++idx;
  }
  const double slope = std::log2(errs[0] / errs[1]);
  if (slope < 1.8) r.pass = false;
  std::ostringstream d;
  d << "interior-window disagreement " << num(errs[0]) << " at h=0.1 (bound "
       "0.05), "
    << num(errs[1]) << " at h=0.05 (bound 0.015); convergence slope "
    << num(slope) << " (bound 1.8)";
  r.detail = d.str();
  return r;
}

// --- 10: discrete self-adjointness surrogate -----------------------------

inline CriterionResult criterion_selfadjoint() {
  CriterionResult r{10, "selfadjoint-surrogate", true, ""};
  auto mink = make_minkowski(1);
  const GridSpec g256 = GridSpec::square(6.4, 256, BoundaryRule::dirichlet_zero);
  DiscreteOperator op_m(mink, 0.0, 0.0, g256, StencilMode::staggered_symmetric);
  const DeficiencyReport rm = deficiency_check(op_m);

  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  const GridSpec g512 = GridSpec::square(6.4, 512, BoundaryRule::dirichlet_zero);
  DiscreteOperator op_v(vaid, 0.25, 0.0, g512, StencilMode::staggered_symmetric);
  const DeficiencyReport rv = deficiency_check(op_v);

  const double smin = std::min({rm.sigma_min_minus, rm.sigma_min_plus,
                                rv.sigma_min_minus, rv.sigma_min_plus});
  if (!rm.pass() || !rv.pass() || smin < 0.999) r.pass = false;

  // The deliberately non-symmetric stencil loses symmetry at second order:
  // halving the spacing shrinks the defect by >= 3.5.
  double defects[2] = {0, 0};
  int idx = 0;
  for (double h : {0.1, 0.05}) {
    const int n = static_cast<int>(std::lround(12.8 / h));
    const GridSpec gs = GridSpec::square(6.4, n, BoundaryRule::dirichlet_zero);
    const GridField u = sample_field(gs, [](double t, double x) {
      return std::complex<double>(
          std::exp(-((t - 0.7) * (t - 0.7) + (x - 1.9) * (x - 1.9)) / 0.5),
          0.0);
    });
    const GridField v = sample_field(gs, [](double t, double x) {
      const double g =
          std::exp(-((t + 0.9) * (t + 0.9) + (x - 2.6) * (x - 2.6)) / 0.8);
      return std::complex<double>(g, 0.3 * g);
    });
    DiscreteOperator naiv(vaid, 0.25, 0.0, gs, StencilMode::pointwise_naive);
    defects[idx++] = naiv.symmetry_defect(u, v);
  }
  const double ratio = defects[0] / defects[1];
  if (!(ratio >= 3.5)) r.pass = false;

  std::ostringstream d;
  d << "smallest shifted singular value " << num(smin)
    << " (bound 0.999) over flat 256^2 and radiating 512^2; "
       "non-symmetric-stencil defect halving ratio "
    << num(ratio) << " (bound 3.5)";
  r.detail = d.str();
  return r;
}

}  // namespace acceptance_detail

inline std::vector<CriterionResult> run_acceptance(
    const AcceptanceOpts& opts = {},
    const std::function<void(const CriterionResult&)>& on_result = {}) {
  namespace ad = acceptance_detail;
  ad::Context ctx;
  const auto wanted = [&](int id) {
    return opts.only.empty() || opts.only.count(id) > 0;
  };
  std::vector<CriterionResult> out;
  const auto add = [&](CriterionResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  if (wanted(1)) add(ad::criterion_families());
  if (wanted(2)) add(ad::criterion_incompatibility());
  if (wanted(3)) add(ad::criterion_pentuple());
  if (wanted(4)) add(ad::criterion_contrast());
  if (wanted(5)) add(ad::criterion_census(ctx));
  if (wanted(6)) add(ad::criterion_endpoints());
  if (wanted(7)) add(ad::criterion_order(ctx));
  if (wanted(8)) add(ad::criterion_free_resolvent());
  if (wanted(9)) add(ad::criterion_cross_check());
  if (wanted(10)) add(ad::criterion_selfadjoint());
  return out;
}

inline bool all_pass(const std::vector<CriterionResult>& results) {
  for (const CriterionResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace desclab
