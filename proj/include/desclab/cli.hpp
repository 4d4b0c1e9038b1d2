#pragma once

// Command-line orchestration.  Every subcommand reads one key=value
// configuration (file via --config, overridden by flags), runs a module
// battery single-threaded, prints its primary artifact (JSON or CSV) to
// stdout, and optionally writes the artifact files under --out.  Checks are
// fail-closed: a failed verdict exits nonzero with a one-line error JSON on
// stderr naming the failing check.  Identical configuration produces
// byte-identical artifacts.

#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "desclab/acceptance.hpp"
#include "desclab/config.hpp"
#include "desclab/io.hpp"

namespace desclab {

namespace cli_detail {

struct Ctx {
  Config cfg;
  std::ostream& out;
  std::ostream& err;
  std::optional<std::filesystem::path> out_dir;
  std::string command;

  int fail(const std::string& message) {
    ordered_json j;
    j["error"] = message;
    j["command"] = command;
    err << j.dump() << "\n";
    return 1;
  }

  void artifact(const std::string& name, const std::string& content) const {
    if (out_dir) write_text(*out_dir / name, content);
  }

  void emit_json(const std::string& artifact_name, ordered_json& j) {
    j["config"] = cfg.effective();
    const std::string text = json_str(j);
    out << text;
    artifact(artifact_name, text);
  }
};

// ---------------------------------------------------------------------------
// Config-driven object construction

inline MetricPtr metric_from_config(Config& cfg) {
  MetricSpec spec;
  spec.kind = cfg.get_string("metric.kind", "minkowski");
  spec.d = cfg.get_int("metric.d", 1);
  spec.mass = cfg.get_double("metric.mass", 1.0);
  spec.amp = cfg.get_double("metric.amplitude", spec.amp);
  spec.order = cfg.get_double("metric.order", spec.order);
  spec.radius = cfg.get_double("metric.radius", spec.radius);
  spec.tortoise_scale =
      cfg.get_double("metric.tortoise_scale", spec.tortoise_scale);
  spec.covector = cfg.get_string("metric.covector", spec.covector);
  spec.vaidya.mass_initial =
      cfg.get_double("metric.mass_initial", spec.vaidya.mass_initial);
  spec.vaidya.mass_mid =
      cfg.get_double("metric.mass_mid", spec.vaidya.mass_mid);
  spec.vaidya.mass_final =
      cfg.get_double("metric.mass_final", spec.vaidya.mass_final);
  spec.vaidya.v0 = cfg.get_double("metric.v0", spec.vaidya.v0);
  spec.vaidya.v1 = cfg.get_double("metric.v1", spec.vaidya.v1);
  spec.vaidya.r_core = cfg.get_double("metric.r_core", spec.vaidya.r_core);
  spec.vaidya.t_band = cfg.get_double("metric.t_band", spec.vaidya.t_band);
  return make_metric(spec);
}

inline GridSpec grid_from_config(Config& cfg, double def_extent, int def_n,
                                 BoundaryRule rule) {
  GridSpec gs = GridSpec::square(cfg.get_double("grid.extent", def_extent),
                                 cfg.get_int("grid.n", def_n), rule);
  return gs;
}

inline std::complex<double> lambda_from_config(Config& cfg, double def_re,
                                               double def_im) {
  return {cfg.get_double("lambda.re", def_re),
          cfg.get_double("lambda.im", def_im)};
}

// ---------------------------------------------------------------------------
// JSON fragments for module reports

inline ordered_json tuple_json(const OrderTuple& o) {
  ordered_json j;
  j["m"] = o.m;
  for (Face f : all_faces)
    j["s_" + std::string(face_name(f))] = o.s_at(f);
  return j;
}

inline ordered_json slack_json(const SlackReport& rep) {
  ordered_json j;
  j["case"] = std::string(case_name(rep.case_id));
  ordered_json by_form;
  for (FormId f : all_forms)
    by_form[std::string(form_name(f))] = rep.slack[form_index(f)];
  j["slacks"] = by_form;
  j["min_slack"] = rep.min_slack;
  j["min_lower_slack"] = rep.min_lower_slack;
  j["min_upper_slack"] = rep.min_upper_slack;
  j["argmin"] = std::string(form_name(rep.argmin));
  j["all_strict"] = rep.all_strict;
  return j;
}

inline ordered_json radial_set_json(const RadialSet& rs) {
  ordered_json j;
  j["label"] = set_label(rs.key);
  j["family"] = std::string(1, family_letter(rs.key.family));
  j["sheet_sign"] = rs.key.sheet_sign;
  j["time_sign"] = rs.key.time_sign;
  j["chart"] = rs.canonical.chart.label();
  j["coords"] = {rs.canonical.coords[0], rs.canonical.coords[1],
                 rs.canonical.coords[2], rs.canonical.coords[3]};
  j["eigen_full"] = {rs.eigen_full[0], rs.eigen_full[1], rs.eigen_full[2],
                     rs.eigen_full[3]};
  j["eigen_sigma"] = rs.eigen_sigma;
  j["eigen_sigma_df"] = rs.eigen_sigma_df;
  j["neutral_sigma"] = rs.neutral_sigma;
  j["neutral_df"] = rs.neutral_df;
  j["class_sigma"] = stability_name(rs.class_sigma);
  j["class_df"] = stability_name(rs.class_df);
  j["on_fiber_infinity"] = rs.on_df;
  j["fiber_coordinate"] = rs.df_distance;
  j["stable_under_halving"] = rs.stable;
  j["max_imag"] = rs.max_imag;
  j["n_representatives"] = rs.reps.size();
  return j;
}

inline ordered_json deficiency_json(const DeficiencyReport& rep) {
  ordered_json j;
  j["sigma_min_minus"] = rep.sigma_min_minus;
  j["sigma_min_plus"] = rep.sigma_min_plus;
  j["hermiticity_defect"] = rep.hermiticity_defect;
  j["eigen_estimate"] = rep.eigen_estimate;
  j["iterations"] = rep.iterations;
  j["method"] = rep.method;
  j["verdict"] = rep.verdict;
  return j;
}

// ---------------------------------------------------------------------------
// geometry check

inline int cmd_geometry_check(Ctx& ctx) {
  ctx.cfg.get_int("seed", 0);
  ctx.cfg.reject_unknown_keys();

  ordered_json checks = ordered_json::array();
  bool all = true;
  const auto add = [&](const std::string& name, bool pass, double measured,
                       const std::string& bound) {
    ordered_json c;
    c["name"] = name;
    c["pass"] = pass;
    c["measured"] = measured;
    c["bound"] = bound;
    checks.push_back(c);
    all = all && pass;
  };

  // Deterministic point cloud spanning thirteen decades and all quadrants.
  std::vector<SpacetimePoint> cloud;
  std::vector<double> mags = {0.0};
  for (int i = 0; i <= 12; ++i) mags.push_back(std::pow(10.0, 0.5 * i));
  for (int d : {1, 2, 3})
    for (double ta : mags)
      for (double ts : {-1.0, 1.0})
        for (double ra : mags) cloud.push_back(point_radial(ts * ta, ra, d));

  double lo = 1.0, hi = 0.0;
  for (const SpacetimePoint& z : cloud)
    for (Face f : all_faces) {
      const double rho = bdf(f, z);
      lo = std::min(lo, rho);
      hi = std::max(hi, rho);
    }
  add("bdf_positive", lo > 0.0, lo, "> 0");
  add("bdf_at_most_one", hi <= 1.0, hi, "<= 1");

  double swap_err = 0.0;
  for (const SpacetimePoint& z : cloud)
    for (Face f : all_faces)
      swap_err = std::max(
          swap_err,
          std::abs(bdf(f, z.time_reflected()) - bdf(time_reflected(f), z)));
  add("time_reflection_swaps_bdfs", swap_err == 0.0, swap_err, "== 0");

  double plo = 1e300, phi = 0.0;
  for (const SpacetimePoint& z : cloud) {
    const double p = comparability_product(z);
    plo = std::min(plo, p);
    phi = std::max(phi, p);
  }
  add("weighted_product_lower", plo >= 1e-2, plo, ">= 0.01");
  add("weighted_product_upper", phi <= 1e2, phi, "<= 100");

  // Own-face decay orders along the dyadic ray families.
  const auto slope_of = [](const std::function<double(int)>& f) {
    std::vector<double> xs, ys;
    for (int k = 10; k <= 20; ++k) {
      xs.push_back(std::ldexp(1.0, k));
      ys.push_back(f(k));
    }
    return fit_loglog(xs, ys).slope;
  };
  double worst_cap = 0.0;
  for (auto [face, c] : {std::pair{Face::Sf, 0.0}, {Face::Sf, 0.3},
                         {Face::Ff, 0.3}, {Face::Pf, 0.3}}) {
    const double s = slope_of(
        [&, face = face, c = c](int k) { return bdf(face, ray(face, {.c = c}, k)); });
    worst_cap = std::max(worst_cap, std::abs(s + 1.0));
  }
  add("cap_ray_decay_order_one", worst_cap <= 0.05, worst_cap,
      "slope within 0.05 of -1");

  double worst_null = 0.0;
  for (auto [face, v] : {std::pair{Face::nFf, 0.0}, {Face::nFf, 5.0},
                         {Face::nPf, 0.0}, {Face::nPf, -5.0}}) {
    const double s = slope_of(
        [&, face = face, v = v](int k) { return bdf(face, ray(face, {.v = v}, k)); });
    worst_null = std::max(worst_null, std::abs(s + 0.5));
  }
  add("null_ray_decay_order_half", worst_null <= 0.05, worst_null,
      "slope within 0.05 of -1/2");

  double worst_prod = 0.0;
  for (double beta : {0.25, 0.5, 0.75}) {
    const double s = slope_of([&](int k) {
      const SpacetimePoint z = corner_probe(beta, k);
      const double rn = bdf(Face::nFf, z);
      return rn * rn * bdf(Face::Ff, z);
    });
    worst_prod = std::max(worst_prod, std::abs(s + 1.0));
  }
  add("corner_weighted_product_order_one", worst_prod <= 0.05, worst_prod,
      "slope within 0.05 of -1");

  ordered_json j;
  j["command"] = ctx.command;
  j["checks"] = checks;
  j["verdict"] = all ? "PASS" : "FAIL";
  ctx.emit_json("geometry_check.json", j);
  if (!all) return ctx.fail("geometry check failed");
  return 0;
}

// ---------------------------------------------------------------------------
// metric decay

inline int cmd_metric_decay(Ctx& ctx, const std::string& face_filter) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const std::vector<double> slopes =
      ctx.cfg.get_list("ray.slopes", {0.0, 0.3});
  const std::vector<double> offsets = ctx.cfg.get_list("ray.offsets", {0.0});
  const int k_lo = ctx.cfg.get_int("ray.k_lo", 10);
  const int k_hi = ctx.cfg.get_int("ray.k_hi", 20);
  ctx.cfg.reject_unknown_keys();

  std::optional<Face> only;
  if (!face_filter.empty()) {
    only = face_from_name(face_filter);
    if (!only) return ctx.fail("unknown face: " + face_filter);
  }

  CsvTable csv({"face", "c_or_v_or_beta", "alpha", "residual", "n_samples"});
  const auto fit_family = [&](Face face, const RayParams& p) {
    if (only && face != *only) return;
    try {
      const DecayFit f = decay_fit(*met, face, p, k_lo, k_hi);
      csv.add_row()
          .cell(std::string(face_name(face)))
          .cell(f.param)
          .cell(f.alpha)
          .cell(f.residual)
          .cell(f.n_samples);
    } catch (const std::runtime_error&) {
      // Family not usable for this metric (domain or exact flatness).
    }
  };
  for (double c : slopes) fit_family(Face::Sf, {.c = c});
  for (double c : slopes)
    if (c > 0.0) {
      fit_family(Face::Ff, {.c = c});
      fit_family(Face::Pf, {.c = c});
    }
  for (double v : offsets) {
    fit_family(Face::nFf, {.v = v});
    fit_family(Face::nPf, {.v = v});
  }

  if (csv.n_rows() == 0)
    return ctx.fail("no ray family produced a usable decay fit");

  const std::string text = csv.str();
  ctx.out << text;
  ctx.artifact("decay.csv", text);
  if (ctx.out_dir) {
    ordered_json meta;
    meta["command"] = ctx.command;
    meta["rows"] = csv.n_rows();
    meta["config"] = ctx.cfg.effective();
    write_json(*ctx.out_dir / "decay.json", meta);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// flow trace

inline int cmd_flow_trace(Ctx& ctx) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const PhasePoint start = phase_point1(
      ctx.cfg.get_double("flow.t", 0.0), ctx.cfg.get_double("flow.x", 4.0),
      ctx.cfg.get_double("flow.tau", -1.0), ctx.cfg.get_double("flow.xi", 2.0));
  IntegrateOpts opts;
  opts.msq = ctx.cfg.get_double("flow.msq", 0.0);
  opts.h0 = ctx.cfg.get_double("flow.h0", opts.h0);
  opts.rtol = ctx.cfg.get_double("flow.rtol", opts.rtol);
  opts.atol = ctx.cfg.get_double("flow.atol", opts.atol);
  opts.bdf_stop = ctx.cfg.get_double("flow.bdf_stop", opts.bdf_stop);
  opts.max_length = ctx.cfg.get_double("flow.max_length", opts.max_length);
  opts.max_steps = ctx.cfg.get_int("flow.max_steps", opts.max_steps);
  opts.reverse = ctx.cfg.get_bool("flow.reverse", false);
  const int stride = ctx.cfg.get_int("flow.stride", 1);
  ctx.cfg.reject_unknown_keys();
  if (met->dim() != 1) return ctx.fail("flow trace expects metric.d = 1");
  if (stride < 1) return ctx.fail("flow.stride must be >= 1");

  const Trajectory tr = integrate_bichar(*met, start, opts);

  CsvTable csv({"s", "chart", "t", "x", "tau", "xi", "rho_Pf", "rho_nPf",
                "rho_Sf", "rho_nFf", "rho_Ff", "p"});
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 &&
        i + 1 != tr.samples.size())
      continue;
    const TrajectorySample& s = tr.samples[i];
    auto& row = csv.add_row();
    row.cell(s.s).cell(std::string("raw"));
    row.cell(s.p.z.t).cell(s.p.z.x[0]).cell(s.p.tau).cell(s.p.xi[0]);
    for (Face f : all_faces) row.cell(s.bdf[f]);
    row.cell(s.symbol);
  }
  const std::string text = csv.str();
  ctx.out << text;
  ctx.artifact("trace.csv", text);
  if (ctx.out_dir) {
    ordered_json meta;
    meta["command"] = ctx.command;
    meta["termination"] = termination_name(tr.termination);
    meta["length"] = tr.length;
    meta["samples"] = tr.samples.size();
    meta["symbol_drift"] = tr.symbol_drift;
    meta["min_bdf"] = tr.min_bdf;
    meta["config"] = ctx.cfg.effective();
    write_json(*ctx.out_dir / "trace.json", meta);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// flow radial-sets

inline int cmd_flow_radial_sets(Ctx& ctx) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const double msq = ctx.cfg.get_double("flow.msq", 1.0);
  CensusOpts census;
  census.newton_tol =
      ctx.cfg.get_double("census.newton_tol", census.newton_tol);
  census.fd_delta = ctx.cfg.get_double("census.fd_delta", census.fd_delta);
  census.merge_radius =
      ctx.cfg.get_double("census.merge_radius", census.merge_radius);
  census.neutral_tol =
      ctx.cfg.get_double("census.neutral_tol", census.neutral_tol);
  ctx.cfg.reject_unknown_keys();

  const std::vector<RadialSet> sets = find_radial_sets(*met, msq, census);
  ordered_json j;
  j["command"] = ctx.command;
  j["msq"] = msq;
  j["count"] = sets.size();
  ordered_json arr = ordered_json::array();
  for (const RadialSet& rs : sets) arr.push_back(radial_set_json(rs));
  j["sets"] = arr;
  ctx.emit_json("radial_sets.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// flow order

inline int cmd_flow_order(Ctx& ctx, int sheet, const std::string& direction) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const double msq = ctx.cfg.get_double("flow.msq", 1.0);
  ctx.cfg.reject_unknown_keys();
  if (sheet != 1 && sheet != -1)
    return ctx.fail("--sheet must be +1 or -1");
  FlowDirection dir;
  if (direction == "with")
    dir = FlowDirection::with_flow;
  else if (direction == "against")
    dir = FlowDirection::against_flow;
  else
    return ctx.fail("--direction must be 'with' or 'against'");

  const std::vector<RadialSet> census = find_radial_sets(*met, msq);
  const ConnectionReport conn = sample_connections(*met, sheet);

  std::vector<SetKey> order;
  try {
    order = propagation_order(census, conn.edges, sheet, dir);
  } catch (const CycleError& e) {
    ordered_json j;
    j["error"] = "connection graph is cyclic";
    ordered_json cyc = ordered_json::array();
    for (const SetKey& k : e.cycle) cyc.push_back(set_label(k));
    j["cycle"] = cyc;
    j["command"] = ctx.command;
    ctx.err << j.dump() << "\n";
    return 1;
  }

  ordered_json j;
  j["command"] = ctx.command;
  j["sheet"] = sheet;
  j["direction"] = direction;
  ordered_json ord = ordered_json::array();
  for (const SetKey& k : order) ord.push_back(set_label(k));
  j["order"] = ord;
  ordered_json edges = ordered_json::array();
  for (const FlowEdge& e : conn.edges) {
    ordered_json ej;
    ej["from"] = set_label(e.from);
    ej["to"] = set_label(e.to);
    ej["count"] = e.count;
    edges.push_back(ej);
  }
  j["edges"] = edges;
  ctx.emit_json("order.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// thresholds

inline OrderTuple tuple_from_config(Config& cfg) {
  OrderTuple o;
  o.m = cfg.get_double("thresholds.m", 4.0);
  o.s_at(Face::Pf) = cfg.get_double("thresholds.s_Pf", 8.0);
  o.s_at(Face::nPf) = cfg.get_double("thresholds.s_nPf", 8.0);
  o.s_at(Face::Sf) = cfg.get_double("thresholds.s_Sf", 4.0);
  o.s_at(Face::nFf) = cfg.get_double("thresholds.s_nFf", 2.0);
  o.s_at(Face::Ff) = cfg.get_double("thresholds.s_Ff", 2.0);
  return o;
}

inline int parse_cases(const std::string& which, std::vector<CaseId>& cases) {
  if (which == "one")
    cases = {CaseId::one};
  else if (which == "two")
    cases = {CaseId::two};
  else if (which == "both")
    cases = {CaseId::one, CaseId::two};
  else
    return 1;
  return 0;
}

inline int cmd_thresholds_check(Ctx& ctx, const std::string& which) {
  ctx.cfg.get_int("seed", 0);
  const OrderTuple o = tuple_from_config(ctx.cfg);
  ctx.cfg.reject_unknown_keys();
  std::vector<CaseId> cases;
  if (parse_cases(which, cases))
    return ctx.fail("--case must be 'one', 'two' or 'both'");

  ordered_json j;
  j["command"] = ctx.command;
  j["tuple"] = tuple_json(o);
  ordered_json arr = ordered_json::array();
  bool pass = true;
  for (CaseId c : cases) {
    const SlackReport rep = slacks(o, c);
    arr.push_back(slack_json(rep));
    pass = pass && rep.all_strict;
  }
  j["cases"] = arr;
  j["pass"] = pass;
  ctx.emit_json("thresholds_check.json", j);
  if (!pass) return ctx.fail("order tuple violates a threshold inequality");
  return 0;
}

inline int cmd_thresholds_solve(Ctx& ctx, const std::string& which) {
  ctx.cfg.get_int("seed", 0);
  const double box_lo = ctx.cfg.get_double("thresholds.box_lo", -10.0);
  const double box_hi = ctx.cfg.get_double("thresholds.box_hi", 10.0);
  ctx.cfg.reject_unknown_keys();
  std::vector<CaseId> cases;
  if (parse_cases(which, cases))
    return ctx.fail("--case must be 'one', 'two' or 'both'");

  ThresholdSystem sys;
  for (CaseId c : cases) sys.add_case(c);
  sys.lo = Eigen::VectorXd::Constant(6, box_lo);
  sys.hi = Eigen::VectorXd::Constant(6, box_hi);
  const ThresholdSolveReport rep = solve_threshold_system(sys);

  ordered_json j;
  j["command"] = ctx.command;
  j["cases"] = which;
  j["feasible"] = rep.feasible;
  j["max_min_slack"] = rep.sigma;
  if (rep.feasible) {
    j["optimizer"] = tuple_json(rep.optimizer);
    ordered_json rows;
    for (std::size_t i = 0; i < sys.rows.size(); ++i)
      rows[sys.rows[i].label] = rep.row_slacks[i];
    j["row_slacks"] = rows;
  } else {
    const FeasibilityCertificate& c = rep.certificate;
    ordered_json cert;
    ordered_json weights;
    for (std::size_t i = 0; i < sys.rows.size(); ++i)
      weights[sys.rows[i].label] = c.y[static_cast<long>(i)];
    cert["weights"] = weights;
    cert["weight_sum"] = c.weight_sum;
    cert["residual"] = c.residual;
    cert["certified_bound"] = c.bound_value;
    j["certificate"] = cert;
  }
  ctx.emit_json("thresholds_solve.json", j);
  return 0;
}

inline int cmd_thresholds_family(Ctx& ctx, double N) {
  ctx.cfg.get_int("seed", 0);
  ctx.cfg.reject_unknown_keys();
  if (!(N >= 1.0)) return ctx.fail("--n must be >= 1");

  const OrderTuple fut = family_future_weighted(N);
  const OrderTuple past = family_past_weighted(N);
  const SlackReport fs = slacks(fut, CaseId::one);
  const SlackReport ps = slacks(past, CaseId::two);
  const bool floor_exact =
      fs.min_lower_slack == N - 1.0 && ps.min_lower_slack == N - 1.0;
  const bool pass = N > 1.0 ? (fs.all_strict && ps.all_strict && floor_exact)
                            : (fs.min_slack == 0.0 && ps.min_slack == 0.0);

  ordered_json j;
  j["command"] = ctx.command;
  j["n"] = N;
  ordered_json fj;
  fj["tuple"] = tuple_json(fut);
  fj["report"] = slack_json(fs);
  j["future_weighted"] = fj;
  ordered_json pj;
  pj["tuple"] = tuple_json(past);
  pj["report"] = slack_json(ps);
  j["past_weighted"] = pj;
  j["lower_floor"] = N - 1.0;
  j["lower_floor_exact"] = floor_exact;
  j["pass"] = pass;
  ctx.emit_json("thresholds_family.json", j);
  if (!pass) return ctx.fail("weighted family check failed");
  return 0;
}

inline int cmd_thresholds_variable(Ctx& ctx, double N, bool swapped) {
  ctx.cfg.get_int("seed", 0);
  ctx.cfg.reject_unknown_keys();
  const auto order_of = [&](SheetSign sheet, FormId) {
    const bool future = (sheet == SheetSign::plus) != swapped;
    return future ? family_future_weighted(N) : family_past_weighted(N);
  };
  const VariableOrderReport rep = check_variable_orders(order_of);

  ordered_json j;
  j["command"] = ctx.command;
  j["n"] = N;
  j["swapped"] = swapped;
  for (int si = 0; si < 2; ++si) {
    ordered_json by_form;
    for (FormId f : all_forms)
      by_form[std::string(form_name(f))] =
          rep.slack[static_cast<std::size_t>(si)][form_index(f)];
    j[si == 0 ? "sheet_plus" : "sheet_minus"] = by_form;
  }
  j["min_slack"] = rep.min_slack;
  j["pass"] = rep.pass;
  ctx.emit_json("thresholds_variable.json", j);
  if (!rep.pass)
    return ctx.fail("variable-order assignment violates a threshold");
  return 0;
}

// ---------------------------------------------------------------------------
// resolvent free

inline int cmd_resolvent_free(Ctx& ctx) {
  ctx.cfg.get_int("seed", 0);
  const GridSpec gs =
      grid_from_config(ctx.cfg, 16.0, 256, BoundaryRule::periodic);
  const std::complex<double> lambda = lambda_from_config(ctx.cfg, 0.0, 1.0);
  const double msq = ctx.cfg.get_double("operator.msq", 0.0);
  const double width = ctx.cfg.get_double("source.width", 1.2);
  ctx.cfg.reject_unknown_keys();
  gs.validate_fourier();
  if (lambda.imag() == 0.0)
    return ctx.fail("lambda.im must be nonzero for the shifted inverse");

  const GridField f = gaussian_field(gs, width);
  const GridField u = free_resolvent(f, lambda, msq);
  const GridField res = apply_free_operator(u, lambda, msq);
  const double roundtrip = (res.values - f.values).norm() / f.values.norm();
  const double norm_ratio = u.norm2() * std::abs(lambda.imag()) / f.norm2();
  const bool bound_ok = norm_ratio <= 1.0 + 1e-9;
  const bool pass = bound_ok && roundtrip < 1e-12;

  CsvTable csv({"N", "a_t", "a_x", "value"});
  for (const auto& e : seminorm_table(u).entries)
    csv.add_row().cell(e.N).cell(e.a_t).cell(e.a_x).cell(e.value);

  ordered_json j;
  j["command"] = ctx.command;
  j["grid"] = {{"extent", gs.T}, {"n", gs.n_t}};
  j["lambda"] = {lambda.real(), lambda.imag()};
  j["msq"] = msq;
  j["source_tail_fraction"] = outer_tail_fraction(f);
  j["roundtrip_residual"] = roundtrip;
  j["norm_ratio"] = norm_ratio;
  j["bound_ok"] = bound_ok;
  j["pass"] = pass;
  ctx.emit_json("resolvent_free.json", j);
  ctx.artifact("seminorms.csv", csv.str());
  if (ctx.out_dir) write_field(*ctx.out_dir / "free_solution", u);
  if (!pass) return ctx.fail("free resolvent bound check failed");
  return 0;
}

// ---------------------------------------------------------------------------
// resolvent curved

inline int cmd_resolvent_curved(Ctx& ctx, bool compare_fourier,
                                double compare_tol) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const GridSpec gs =
      grid_from_config(ctx.cfg, 12.8, 256, BoundaryRule::dirichlet_zero);
  const std::complex<double> lambda = lambda_from_config(ctx.cfg, 0.0, -1.0);
  const double msq = ctx.cfg.get_double("operator.msq", 0.0);
  const double amp = ctx.cfg.get_double("operator.amplitude", 0.0);
  const std::string stencil =
      ctx.cfg.get_string("operator.stencil", "staggered_symmetric");
  const double width = ctx.cfg.get_double("source.width", 1.0);
  ctx.cfg.reject_unknown_keys();
  StencilMode mode;
  if (stencil == "staggered_symmetric")
    mode = StencilMode::staggered_symmetric;
  else if (stencil == "pointwise_naive")
    mode = StencilMode::pointwise_naive;
  else
    return ctx.fail("operator.stencil must be staggered_symmetric or "
                    "pointwise_naive");
  if (lambda.imag() == 0.0)
    return ctx.fail("lambda.im must be nonzero for the shifted inverse");

  GridField f = gaussian_field(gs, width);
  DiscreteOperator op(met, msq, amp, gs, mode);
  SolveReport rep;
  const GridField u = curved_resolvent(op, f, lambda, &rep);
  bool pass = rep.residual < 1e-8 && rep.bound_ok;

  ordered_json j;
  j["command"] = ctx.command;
  j["grid"] = {{"extent", gs.T}, {"n", gs.n_t}, {"h", gs.h_t()}};
  j["lambda"] = {lambda.real(), lambda.imag()};
  j["stencil"] = stencil_mode_name(mode);
  j["unknowns"] = rep.unknowns;
  j["residual"] = rep.residual;
  j["norm_ratio"] = rep.norm_ratio;
  j["bound_ok"] = rep.bound_ok;

  if (compare_fourier) {
    GridSpec pg = gs;
    pg.boundary = BoundaryRule::periodic;
    pg.validate_fourier();
    GridField fp = f;
    fp.spec = pg;
    GridField uf = free_resolvent(fp, lambda, msq);
    uf.spec = gs;
    const double window_err = window_rel_error(u, uf, 0.5);
    j["window_rel_error"] = window_err;
    j["window_tol"] = compare_tol;
    pass = pass && window_err < compare_tol;
  }
  j["pass"] = pass;
  ctx.emit_json("resolvent_curved.json", j);
  if (ctx.out_dir) write_field(*ctx.out_dir / "curved_solution", u);
  if (!pass) return ctx.fail("curved resolvent check failed");
  return 0;
}

// ---------------------------------------------------------------------------
// selfadjoint check

inline int cmd_selfadjoint_check(Ctx& ctx) {
  ctx.cfg.get_int("seed", 0);
  MetricPtr met = metric_from_config(ctx.cfg);
  const GridSpec gs =
      grid_from_config(ctx.cfg, 6.4, 256, BoundaryRule::dirichlet_zero);
  const double msq = ctx.cfg.get_double("operator.msq", 0.0);
  const double amp = ctx.cfg.get_double("operator.amplitude", 0.0);
  const std::string stencil =
      ctx.cfg.get_string("operator.stencil", "staggered_symmetric");
  ctx.cfg.reject_unknown_keys();
  StencilMode mode;
  if (stencil == "staggered_symmetric")
    mode = StencilMode::staggered_symmetric;
  else if (stencil == "pointwise_naive")
    mode = StencilMode::pointwise_naive;
  else
    return ctx.fail("operator.stencil must be staggered_symmetric or "
                    "pointwise_naive");

  DiscreteOperator op(met, msq, amp, gs, mode);
  const DeficiencyReport rep = deficiency_check(op);

  ordered_json j;
  j["command"] = ctx.command;
  j["grid"] = {{"extent", gs.T}, {"n", gs.n_t}};
  j["stencil"] = stencil_mode_name(mode);
  ordered_json rj = deficiency_json(rep);
  for (auto& [k, v] : rj.items()) j[k] = v;
  ctx.emit_json("selfadjoint_check.json", j);
  if (!rep.pass())
    return ctx.fail("self-adjointness surrogate fell below the verdict "
                    "threshold");
  return 0;
}

// ---------------------------------------------------------------------------
// report

inline int cmd_report(Ctx& ctx, const std::vector<int>& only) {
  ctx.cfg.get_int("seed", 0);
  ctx.cfg.reject_unknown_keys();
  AcceptanceOpts opts;
  for (int id : only) {
    if (id < 1 || id > 10)
      return ctx.fail("--only accepts criterion ids 1..10");
    opts.only.insert(id);
  }

  const std::vector<CriterionResult> results = run_acceptance(opts);
  ordered_json j;
  j["command"] = ctx.command;
  ordered_json arr = ordered_json::array();
  int passed = 0;
  std::string first_fail;
  for (const CriterionResult& r : results) {
    ordered_json cj;
    cj["id"] = r.id;
    cj["name"] = r.name;
    cj["pass"] = r.pass;
    cj["detail"] = r.detail;
    arr.push_back(cj);
    if (r.pass)
      ++passed;
    else if (first_fail.empty())
      first_fail = r.name;
  }
  j["criteria"] = arr;
  j["passed"] = passed;
  j["total"] = results.size();
  j["verdict"] = passed == static_cast<int>(results.size()) ? "PASS" : "FAIL";
  ctx.emit_json("report.json", j);
  if (!first_fail.empty())
    return ctx.fail("criterion failed: " + first_fail);
  return 0;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Entry point.  `args` excludes the program name.

inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  namespace cd = cli_detail;

  CLI::App app{"desc-laboratory: compactified phase-space flow, threshold, "
               "and resolvent checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::function<int(cd::Ctx&)> action;
  std::string command_name;

  const auto leaf = [&](CLI::App* parent, const std::string& name,
                        const std::string& desc) {
    CLI::App* c = parent->add_subcommand(name, desc);
    c->add_option("--config", config_path,
                  "key = value configuration file (sections become dotted "
                  "key prefixes)")
        ->check(CLI::ExistingFile);
    c->add_option("--out", out_dir, "directory for artifact files");
    return c;
  };
  const auto override_opt = [&](CLI::App* cmd, const std::string& flag,
                                const std::string& key,
                                const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag,
        [&overrides, key](const std::string& v) {
          overrides.emplace_back(key, v);
        },
        desc);
  };
  const auto set_action = [&](CLI::App* cmd, const std::string& name,
                              std::function<int(cd::Ctx&)> fn) {
    cmd->callback([&action, &command_name, name, fn]() {
      action = fn;
      command_name = name;
    });
  };

  // geometry check
  CLI::App* geometry =
      app.add_subcommand("geometry", "compactification invariants");
  geometry->require_subcommand(1);
  {
    CLI::App* c = leaf(geometry, "check",
                       "boundary-function, reflection, and decay invariants");
    set_action(c, "geometry check", cd::cmd_geometry_check);
  }

  // metric decay
  CLI::App* metric = app.add_subcommand("metric", "metric zoo diagnostics");
  metric->require_subcommand(1);
  {
    CLI::App* c = leaf(metric, "decay",
                       "decay-order fits of the frame-contracted perturbation "
                       "along dyadic ray families (CSV)");
    override_opt(c, "--metric", "metric.kind", "metric kind");
    override_opt(c, "--mass", "metric.mass", "black-hole mass");
    static std::string face_filter;
    face_filter.clear();
    c->add_option("--face", face_filter,
                  "restrict to one face (Pf, nPf, Sf, nFf, Ff)");
    set_action(c, "metric decay", [](cd::Ctx& ctx) {
      return cd::cmd_metric_decay(ctx, face_filter);
    });
  }

  // flow trace | radial-sets | order
  CLI::App* flow = app.add_subcommand("flow", "Hamiltonian flow tools");
  flow->require_subcommand(1);
  {
    CLI::App* c = leaf(flow, "trace",
                       "integrate one trajectory and emit it as CSV");
    override_opt(c, "--metric", "metric.kind", "metric kind");
    override_opt(c, "--mass", "metric.mass", "black-hole mass");
    override_opt(c, "--t", "flow.t", "start time");
    override_opt(c, "--x", "flow.x", "start position");
    override_opt(c, "--tau", "flow.tau", "start time-frequency");
    override_opt(c, "--xi", "flow.xi", "start space-frequency");
    override_opt(c, "--msq", "flow.msq", "mass-squared of the symbol");
    override_opt(c, "--max-length", "flow.max_length", "arc-length budget");
    override_opt(c, "--stride", "flow.stride", "emit every k-th sample");
    set_action(c, "flow trace", cd::cmd_flow_trace);
  }
  {
    CLI::App* c = leaf(flow, "radial-sets",
                       "census of the critical families of the rescaled flow "
                       "(JSON)");
    override_opt(c, "--msq", "flow.msq", "mass-squared of the symbol");
    set_action(c, "flow radial-sets", cd::cmd_flow_radial_sets);
  }
  {
    CLI::App* c = leaf(flow, "order",
                       "topological propagation order from sampled "
                       "connections (JSON)");
    static int sheet;
    static std::string direction;
    sheet = 1;
    direction = "with";
    c->add_option("--sheet", sheet, "sheet sign (+1 or -1)");
    c->add_option("--direction", direction, "'with' or 'against' the flow");
    set_action(c, "flow order", [](cd::Ctx& ctx) {
      return cd::cmd_flow_order(ctx, sheet, direction);
    });
  }

  // thresholds check | solve | family | variable
  CLI::App* thresholds =
      app.add_subcommand("thresholds", "order-inequality systems");
  thresholds->require_subcommand(1);
  static std::string th_case;
  th_case = "one";
  {
    CLI::App* c = leaf(thresholds, "check",
                       "evaluate all eight named slacks at one order tuple");
    override_opt(c, "--m", "thresholds.m", "base order m");
    override_opt(c, "--s-pf", "thresholds.s_Pf", "weight at Pf");
    override_opt(c, "--s-npf", "thresholds.s_nPf", "weight at nPf");
    override_opt(c, "--s-sf", "thresholds.s_Sf", "weight at Sf");
    override_opt(c, "--s-nff", "thresholds.s_nFf", "weight at nFf");
    override_opt(c, "--s-ff", "thresholds.s_Ff", "weight at Ff");
    c->add_option("--case", th_case, "'one', 'two' or 'both'");
    set_action(c, "thresholds check", [](cd::Ctx& ctx) {
      return cd::cmd_thresholds_check(ctx, th_case);
    });
  }
  static std::string solve_case;
  solve_case = "both";
  {
    CLI::App* c = leaf(thresholds, "solve",
                       "maximize the minimum slack; emits a Farkas-style "
                       "certificate when infeasible");
    c->add_option("--case", solve_case, "'one', 'two' or 'both'");
    set_action(c, "thresholds solve", [](cd::Ctx& ctx) {
      return cd::cmd_thresholds_solve(ctx, solve_case);
    });
  }
  static double family_n;
  family_n = 2.0;
  {
    CLI::App* c = leaf(thresholds, "family",
                       "the weighted admissible family at parameter N");
    c->add_option("--n", family_n, "family parameter N >= 1");
    set_action(c, "thresholds family", [](cd::Ctx& ctx) {
      return cd::cmd_thresholds_family(ctx, family_n);
    });
  }
  static double variable_n;
  static bool variable_swapped;
  variable_n = 2.0;
  variable_swapped = false;
  {
    CLI::App* c = leaf(thresholds, "variable",
                       "sheet-dependent order assignment across all sixteen "
                       "slots");
    c->add_option("--n", variable_n, "family parameter N >= 1");
    c->add_flag("--swapped", variable_swapped,
                "swap the weightings between the sheets (inadmissible "
                "fixture)");
    set_action(c, "thresholds variable", [](cd::Ctx& ctx) {
      return cd::cmd_thresholds_variable(ctx, variable_n, variable_swapped);
    });
  }

  // resolvent free | curved
  CLI::App* resolvent =
      app.add_subcommand("resolvent", "shifted wave-operator inverses");
  resolvent->require_subcommand(1);
  {
    CLI::App* c = leaf(resolvent, "free",
                       "exact Fourier inverse on the periodic box, with "
                       "norm bound and rapid-decay seminorms");
    override_opt(c, "--n", "grid.n", "grid points per axis (power of two)");
    override_opt(c, "--extent", "grid.extent", "box half-width");
    override_opt(c, "--lambda-re", "lambda.re", "Re lambda");
    override_opt(c, "--lambda-im", "lambda.im", "Im lambda (nonzero)");
    set_action(c, "resolvent free", cd::cmd_resolvent_free);
  }
  static bool compare_fourier;
  static double compare_tol;
  compare_fourier = false;
  compare_tol = 0.05;
  {
    CLI::App* c = leaf(resolvent, "curved",
                       "sparse direct solve of the shifted curved operator "
                       "on the Dirichlet box");
    override_opt(c, "--metric", "metric.kind", "metric kind");
    override_opt(c, "--n", "grid.n", "grid points per axis");
    override_opt(c, "--extent", "grid.extent", "box half-width");
    override_opt(c, "--lambda-re", "lambda.re", "Re lambda");
    override_opt(c, "--lambda-im", "lambda.im", "Im lambda (nonzero)");
    c->add_flag("--compare-fourier", compare_fourier,
                "also compare against the periodic Fourier inverse on the "
                "interior window");
    c->add_option("--compare-tol", compare_tol,
                  "window disagreement tolerance for --compare-fourier");
    set_action(c, "resolvent curved", [](cd::Ctx& ctx) {
      return cd::cmd_resolvent_curved(ctx, compare_fourier, compare_tol);
    });
  }

  // selfadjoint check
  CLI::App* selfadjoint =
      app.add_subcommand("selfadjoint", "discrete symmetry diagnostics");
  selfadjoint->require_subcommand(1);
  {
    CLI::App* c = leaf(selfadjoint, "check",
                       "smallest singular value of the shifted symmetrized "
                       "operator");
    override_opt(c, "--metric", "metric.kind", "metric kind");
    override_opt(c, "--n", "grid.n", "grid points per axis");
    override_opt(c, "--stencil", "operator.stencil",
                 "staggered_symmetric or pointwise_naive");
    set_action(c, "selfadjoint check", cd::cmd_selfadjoint_check);
  }

  // report
  static std::vector<int> report_only;
  report_only.clear();
  {
    CLI::App* c = leaf(&app, "report",
                       "run the consolidated verification battery and emit "
                       "one JSON summary");
    c->add_option("--only", report_only,
                  "restrict to these criterion ids (1..10)")
        ->delimiter(',');
    set_action(c, "report", [](cd::Ctx& ctx) {
      return cd::cmd_report(ctx, report_only);
    });
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  cd::Ctx ctx{Config{}, out, err, std::nullopt, command_name};
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) return ctx.fail("cannot open config file: " + config_path);
      ctx.cfg = Config::parse(in);
    }
    for (const auto& [k, v] : overrides) ctx.cfg.set(k, v);
    if (!out_dir.empty()) {
      ctx.out_dir = std::filesystem::path(out_dir);
      std::filesystem::create_directories(*ctx.out_dir);
    }
    return action(ctx);
  } catch (const std::exception& e) {
    return ctx.fail(e.what());
  }
}

}  // namespace desclab
