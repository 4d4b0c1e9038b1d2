#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "desclab/charts.hpp"
#include "desclab/flow.hpp"
#include "desclab/metrics.hpp"
#include "desclab/symbol.hpp"

using namespace desclab;
using Catch::Approx;

namespace {

SetKey key(SetFamily f, int sheet, int time) { return SetKey{f, sheet, time}; }

bool has_edge(const ConnectionReport& r, const SetKey& a, const SetKey& b) {
  for (const FlowEdge& e : r.edges) {
    if (e.from == a && e.to == b) return true;
  }
  return false;
}

bool has_sequence(const ConnectionReport& r, const std::vector<SetKey>& seq) {
  for (const OrbitHits& o : r.orbits) {
    if (o.sequence == seq) return true;
  }
  return false;
}

Eigen::Vector4d raw_state(const TrajectorySample& s) {
  return {s.p.z.t, s.p.z.x[0], s.p.tau, s.p.xi[0]};
}

}  // namespace

// ---------------------------------------------------------------------------
// Principal symbol and raw Hamiltonian field

TEST_CASE("principal symbol closed-form values") {
  auto mink = make_minkowski(1);
  CHECK(principal_symbol(*mink, phase_point1(0.3, -0.2, 1.0, 0.0), 1.0) ==
        Approx(0.0).margin(1e-14));
  CHECK(principal_symbol(*mink, phase_point1(0.3, -0.2, 0.0, 1.0), 0.0) ==
        Approx(1.0).epsilon(1e-14));

  auto schw = make_schwarzschild_naive(1.0, 1);
  CHECK(principal_symbol(*schw, phase_point1(0.0, 4.0, 1.0, 1.0), 0.0) ==
        Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("Hamiltonian field annihilates the symbol") {
  // The identity dp/ds = dp_z . zdot + dp_zeta . zetadot = 0 holds
  // algebraically; both contributions are assembled from the same metric
  // derivatives, so their sum must vanish to rounding.
  struct Probe {
    MetricPtr m;
    PhasePoint p;
  };
  std::vector<Probe> probes;
  probes.push_back({make_schwarzschild_naive(1.0, 1),
                    phase_point1(0.5, 5.0, 0.7, -1.3)});
  probes.push_back({make_vaidya(desk_vaidya_params(), 1),
                    phase_point1(1.2, 25.0, 0.7, -1.3)});
  probes.push_back({make_schwarzschild_ef(1.0, 1),
                    phase_point1(-0.4, 6.0, -1.1, 0.3)});
  for (const Probe& pr : probes) {
    const Eigen::VectorXd zeta = pr.p.zeta();
    const PhaseVelocity w = hamiltonian_field_raw(*pr.m, pr.p);
    double along_base = 0, along_fiber = 0;
    for (int mu = 0; mu < 2; ++mu) {
      along_base += zeta.dot(pr.m->dginv(pr.p.z, mu) * zeta) * w.zdot[mu];
    }
    along_fiber = (2.0 * (pr.m->ginv(pr.p.z) * zeta)).dot(w.zetadot);
    const double scale =
        1.0 + std::abs(along_base) + std::abs(along_fiber);
    CHECK(std::abs(along_base + along_fiber) / scale < 1e-12);
  }
}

TEST_CASE("direction field flags fixed points instead of failing") {
  auto mink = make_minkowski(1);
  const FieldSample moving =
      hamiltonian_field(*mink, phase_point1(0.0, 0.0, -1.0, 0.5));
  CHECK_FALSE(moving.is_fixed_point);
  CHECK(moving.direction.norm() == Approx(1.0).epsilon(1e-12));

  const FieldSample frozen =
      hamiltonian_field(*mink, phase_point1(0.0, 0.0, 0.0, 0.0));
  CHECK(frozen.is_fixed_point);
  CHECK(frozen.direction.norm() == 0.0);
}

TEST_CASE("null coordinates are a canonical change") {
  const double t = 0.7, x = -1.3, tau = 0.4, xi = 2.1;
  const NullCoords n = to_null(t, x, tau, xi);
  double t2, x2, tau2, xi2;
  from_null(n, t2, x2, tau2, xi2);
  CHECK(t2 == Approx(t).epsilon(1e-15));
  CHECK(x2 == Approx(x).epsilon(1e-15));
  CHECK(tau2 == Approx(tau).epsilon(1e-15));
  CHECK(xi2 == Approx(xi).epsilon(1e-15));

  auto mink = make_minkowski(1);
  const double msq = 0.7;
  const double p = principal_symbol(*mink, phase_point1(t, x, tau, xi), msq);
  CHECK(p == Approx(-4.0 * n.a * n.b + msq).epsilon(1e-14));
}

TEST_CASE("projectivized flow is straight on the flat background") {
  auto mink = make_minkowski(1);
  const CosphereState s{3.0, -2.0, 2.2};
  const Eigen::Vector3d v = cosphere_field(*mink, s);
  CHECK(v[0] == Approx(-2.0 * std::cos(2.2)).epsilon(1e-14));
  CHECK(v[1] == Approx(2.0 * std::sin(2.2)).epsilon(1e-14));
  CHECK(v[2] == Approx(0.0).margin(1e-15));
}

// ---------------------------------------------------------------------------
// Boundary charts

TEST_CASE("chart round trips") {
  std::vector<ChartCopy> copies = {
      {ChartId::cap, +1, +1, +1},          {ChartId::cap, -1, +1, +1},
      {ChartId::null_face, +1, +1, +1},    {ChartId::null_face, -1, +1, +1},
      {ChartId::null_face, +1, -1, -1},    {ChartId::corner_cap, +1, +1, +1},
      {ChartId::corner_cap, -1, -1, +1},   {ChartId::corner_spatial, +1, +1, +1},
      {ChartId::corner_spatial, +1, -1, -1}};
  std::map<ChartId, Eigen::Vector4d> interior = {
      {ChartId::cap, {0.25, 0.3, -1.2, 0.4}},
      {ChartId::null_face, {0.3, 1.5, -0.4, 0.2}},
      {ChartId::corner_cap, {0.2, 0.3, -0.25, 0.3}},
      {ChartId::corner_spatial, {0.2, 0.3, -0.25, 0.3}}};
  for (const ChartCopy& copy : copies) {
    const Eigen::Vector4d c = interior.at(copy.id);
    const PhasePoint p = chart_to_raw(copy, c);
    const Eigen::Vector4d back = chart_from_raw(copy, p);
    INFO(copy.label());
    CHECK((back - c).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rescaled field matches the flat closed forms") {
  auto mink = make_minkowski(1);
  const auto field = [&](const ChartCopy& c, const Eigen::Vector4d& v) {
    return chart_field(*mink, c, v);
  };

  SECTION("cap: (2 sigma tau, 2(xi + tau y), 0, 0)") {
    const ChartCopy cap{ChartId::cap, +1, +1, +1};
    const Eigen::Vector4d in(0.2, 0.3, -1.2, 0.4);
    const Eigen::Vector4d f = field(cap, in);
    CHECK(f[0] == Approx(2 * 0.2 * -1.2).epsilon(1e-12));
    CHECK(f[1] == Approx(2 * (0.4 + -1.2 * 0.3)).epsilon(1e-11));
    CHECK(std::abs(f[2]) + std::abs(f[3]) < 1e-12);

    const Eigen::Vector4d on_face = field(cap, {0.0, 0.3, -1.2, 0.4});
    CHECK(on_face[0] == Approx(0.0).margin(1e-8));
    CHECK(on_face[1] == Approx(0.08).epsilon(1e-7));
  }

  SECTION("null face: (-2 rho, 4 mt, 2 q, 4 mt)") {
    const ChartCopy nf{ChartId::null_face, +1, +1, +1};
    const Eigen::Vector4d in(0.3, 1.5, -0.4, 0.2);
    const Eigen::Vector4d f = field(nf, in);
    CHECK(f[0] == Approx(-0.6).epsilon(1e-11));
    CHECK(f[1] == Approx(0.8).epsilon(1e-11));
    CHECK(f[2] == Approx(-0.8).epsilon(1e-11));
    CHECK(f[3] == Approx(0.8).epsilon(1e-11));

    const Eigen::Vector4d fb = field(nf, {0.0, 1.5, 0.0, 0.2});
    CHECK(fb[0] == Approx(0.0).margin(1e-8));
    CHECK(fb[1] == Approx(0.8).epsilon(1e-7));
    CHECK(fb[2] == Approx(0.0).margin(1e-8));
    CHECK(fb[3] == Approx(0.8).epsilon(1e-7));
  }

  SECTION("cap-side corner: (2 h1 (1-al), -4 h2, 2 qa (1-al), 4 al (1-al))") {
    const ChartCopy cc{ChartId::corner_cap, +1, +1, +1};
    const Eigen::Vector4d f = field(cc, {0.2, 0.3, -0.25, 0.3});
    CHECK(f[0] == Approx(2 * 0.2 * 0.7).epsilon(1e-10));
    CHECK(f[1] == Approx(-4 * 0.3).epsilon(1e-10));
    CHECK(f[2] == Approx(2 * -0.25 * 0.7).epsilon(1e-10));
    CHECK(f[3] == Approx(4 * 0.3 * 0.7).epsilon(1e-10));

    const Eigen::Vector4d fb = field(cc, {0.0, 0.0, 0.0, 0.3});
    CHECK(std::abs(fb[0]) + std::abs(fb[1]) + std::abs(fb[2]) < 1e-7);
    CHECK(fb[3] == Approx(0.84).epsilon(1e-6));
  }

  SECTION("spatial corner: (-2 k1 (1+ak), 4 k2, -2 qk (1+ak), -4 ak (1+ak))") {
    const ChartCopy ks{ChartId::corner_spatial, +1, +1, +1};
    const Eigen::Vector4d f = field(ks, {0.2, 0.3, -0.25, 0.3});
    CHECK(f[0] == Approx(-2 * 0.2 * 1.3).epsilon(1e-10));
    CHECK(f[1] == Approx(4 * 0.3).epsilon(1e-10));
    CHECK(f[2] == Approx(-2 * -0.25 * 1.3).epsilon(1e-10));
    CHECK(f[3] == Approx(-4 * 0.3 * 1.3).epsilon(1e-10));

    const Eigen::Vector4d fb = field(ks, {0.0, 0.0, 0.0, 0.3});
    CHECK(fb[3] == Approx(-1.56).epsilon(1e-6));
  }

  SECTION("reflected copies transport the field with the right signs") {
    const Eigen::Vector4d in(0.3, 1.5, -0.4, 0.2);
    const Eigen::Vector4d base = field({ChartId::null_face, +1, +1, +1}, in);
    // A time or sheet reflection alone is anti-symplectic: reversed flow.
    const Eigen::Vector4d t_rev = field({ChartId::null_face, -1, +1, +1}, in);
    const Eigen::Vector4d s_rev = field({ChartId::null_face, +1, +1, -1}, in);
    // Their composition is symplectic: the flow is preserved.
    const Eigen::Vector4d ts = field({ChartId::null_face, -1, +1, -1}, in);
    CHECK((t_rev + base).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((s_rev + base).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((ts - base).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("rescaled symbol in the charts") {
  auto mink = make_minkowski(1);
  const ChartCopy nf{ChartId::null_face, +1, +1, +1};
  CHECK(chart_symbol(*mink, nf, {0.3, 1.5, -0.4, 0.2}, 1.0) ==
        Approx(-4 * 0.2 + 0.16).epsilon(1e-11));
  CHECK(chart_symbol(*mink, nf, {0.0, 1.5, 0.0, 0.2}, 1.0) ==
        Approx(-0.8).epsilon(1e-6));
  const ChartCopy cc{ChartId::corner_cap, +1, +1, +1};
  CHECK(chart_symbol(*mink, cc, {0.0, 0.0, 0.0, 0.3}, 1.0) ==
        Approx(-1.2).epsilon(1e-6));
  const ChartCopy cap{ChartId::cap, +1, +1, +1};
  CHECK(chart_symbol(*mink, cap, {0.0, 0.5, -1.5, 0.75}, 1.0) ==
        Approx(-1.5 * 1.5 + 0.75 * 0.75 + 1.0).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// Radial-set census

TEST_CASE("census finds the sixteen critical families of the flat flow") {
  auto mink = make_minkowski(1);
  const std::vector<RadialSet> census = find_radial_sets(*mink, 1.0);
  REQUIRE(census.size() == 16);

  std::map<std::string, const RadialSet*> by_label;
  for (const RadialSet& rs : census) by_label[set_label(rs.key)] = &rs;
  REQUIRE(by_label.size() == 16);

  const auto get = [&](const char* label) -> const RadialSet& {
    REQUIRE(by_label.count(label) == 1);
    return *by_label.at(label);
  };

  SECTION("cap family: sources and sinks at finite fiber") {
    for (const char* l : {"R++", "R+-", "R-+", "R--"}) {
      const RadialSet& rs = get(l);
      CHECK_FALSE(rs.on_df);
      CHECK(rs.df_distance > 0.1);
      CHECK(rs.neutral_sigma == 1);
      CHECK(rs.stable);
      CHECK(min_used_magnitude(rs.eigen_sigma, 1e-4) > 0.5);
    }
    CHECK(get("R++").class_sigma == Stability::sink);
    CHECK(get("R+-").class_sigma == Stability::source);
    CHECK(get("R-+").class_sigma == Stability::source);
    CHECK(get("R--").class_sigma == Stability::sink);
  }

  SECTION("null-face family: saddle within the characteristic set, "
          "sink/source within fiber infinity") {
    const RadialSet& npp = get("N++");
    CHECK(npp.on_df);
    CHECK(npp.eigen_full[0] == Approx(-2.0).margin(2e-3));
    CHECK(npp.eigen_full[1] == Approx(0.0).margin(2e-3));
    CHECK(npp.eigen_full[2] == Approx(2.0).margin(2e-3));
    CHECK(npp.eigen_full[3] == Approx(4.0).margin(2e-3));
    REQUIRE(npp.eigen_sigma.size() == 3);
    CHECK(npp.eigen_sigma.front() == Approx(-2.0).margin(2e-3));
    CHECK(npp.eigen_sigma.back() == Approx(2.0).margin(2e-3));
    CHECK(npp.neutral_sigma == 1);
    CHECK(npp.class_sigma == Stability::saddle);
    REQUIRE(npp.eigen_sigma_df.size() == 2);
    CHECK(npp.neutral_df == 1);
    CHECK(npp.class_df == Stability::sink);

    CHECK(get("N+-").class_sigma == Stability::saddle);
    CHECK(get("N+-").class_df == Stability::source);
    CHECK(get("N-+").class_df == Stability::source);
    CHECK(get("N--").class_df == Stability::sink);

    // Representatives from both the left and right face copies merge.
    std::set<int> sides;
    for (const RadialSetRep& r : npp.reps) sides.insert(r.chart.space_sign);
    CHECK(sides.size() == 2);
  }

  SECTION("corner families: saddles in both restrictions") {
    const RadialSet& cpp = get("C++");
    CHECK(cpp.eigen_full[0] == Approx(-4.0).margin(2e-3));
    CHECK(cpp.eigen_full[1] == Approx(2.0).margin(2e-3));
    CHECK(cpp.eigen_full[2] == Approx(2.0).margin(2e-3));
    CHECK(cpp.eigen_full[3] == Approx(4.0).margin(2e-3));

    const RadialSet& kpp = get("K++");
    CHECK(kpp.eigen_full[0] == Approx(-4.0).margin(2e-3));
    CHECK(kpp.eigen_full[1] == Approx(-2.0).margin(2e-3));
    CHECK(kpp.eigen_full[2] == Approx(-2.0).margin(2e-3));
    CHECK(kpp.eigen_full[3] == Approx(4.0).margin(2e-3));

    for (const char* l : {"C++", "C+-", "C-+", "C--", "K++", "K+-", "K-+",
                          "K--"}) {
      const RadialSet& rs = get(l);
      CHECK(rs.on_df);
      CHECK(rs.class_sigma == Stability::saddle);
      CHECK(rs.class_df == Stability::saddle);
      CHECK(rs.neutral_sigma == 0);
      CHECK(rs.neutral_df == 0);
      CHECK(rs.stable);
      CHECK(min_used_magnitude(rs.eigen_sigma_df, 1e-4) > 1.0);
      CHECK(rs.max_imag < 1e-4);
    }
  }

  SECTION("all families classify stably and real") {
    for (const RadialSet& rs : census) {
      CHECK(rs.stable);
      CHECK(rs.max_imag < 1e-4);
      CHECK(min_used_magnitude(rs.eigen_sigma, 1e-4) > 1e-4);
    }
  }

  SECTION("census is deterministic") {
    const std::vector<RadialSet> again = find_radial_sets(*mink, 1.0);
    REQUIRE(again.size() == census.size());
    for (std::size_t i = 0; i < census.size(); ++i) {
      CHECK(again[i].key == census[i].key);
      CHECK((again[i].canonical.coords - census[i].canonical.coords)
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK((again[i].eigen_full - census[i].eigen_full)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Characteristic-set connectivity

TEST_CASE("characteristic pieces, sheets, and the zero-section contact") {
  auto mink = make_minkowski(1);
  const SpacetimePoint z = point1(0.3, 0.7);

  SECTION("massive: two pieces, two sheets") {
    const CharacteristicReport r = characteristic_components(*mink, z, 1.0, 6.0);
    CHECK(r.pieces == 2);
    CHECK(r.sheets == 2);
    CHECK_FALSE(r.zero_section);
    const std::multiset<int> labels(r.piece_sheet.begin(), r.piece_sheet.end());
    CHECK(labels == std::multiset<int>({-1, +1}));
  }

  SECTION("massless: four rays meeting at the excised origin") {
    const CharacteristicReport r = characteristic_components(*mink, z, 0.0, 6.0);
    CHECK(r.pieces == 4);
    CHECK(r.sheets == 2);
    CHECK(r.zero_section);
  }

  SECTION("negative shift: pieces connect the sheets") {
    const CharacteristicReport r =
        characteristic_components(*mink, z, -0.5, 6.0);
    CHECK(r.pieces == 2);
    CHECK(r.sheets == 1);
    CHECK_FALSE(r.zero_section);
    for (int s : r.piece_sheet) CHECK(s == 0);
  }

  SECTION("near fiber infinity every zoo metric shows the two sheets") {
    CharOpts opts;
    opts.near_df_fraction = 0.7;
    struct Probe {
      MetricPtr m;
      SpacetimePoint z;
    };
    std::vector<Probe> zoo;
    zoo.push_back({make_minkowski(1), point1(0.3, 0.7)});
    zoo.push_back({make_schwarzschild_naive(1.0, 1), point1(0.0, 4.0)});
    zoo.push_back({make_schwarzschild_ef(1.0, 1), point1(0.0, 4.0)});
    zoo.push_back({make_vaidya(desk_vaidya_params(), 1), point1(0.3, 25.0)});
    zoo.push_back({make_bump_perturbation(1, 0.3, point1(0.0, 0.0), 2.0),
                   point1(0.0, 0.5)});
    zoo.push_back({make_symbol_perturbation(1, 0.4, 2.0), point1(1.0, 2.0)});
    for (const Probe& pr : zoo) {
      for (double c : {1.0, 0.0, -0.5}) {
        const CharacteristicReport r =
            characteristic_components(*pr.m, pr.z, c, 8.0, opts);
        INFO(pr.m->name() << " c=" << c);
        CHECK(r.sheets == 2);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Bicharacteristic integration

TEST_CASE("massless flat ray runs to fiber infinity along the null face") {
  auto mink = make_minkowski(1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  IntegrateOpts opts;
  opts.msq = 0.0;
  opts.max_length = 1e9;
  const Trajectory tr = integrate_bichar(
      *mink, phase_point1(0.0, 0.0, -inv_sqrt2, inv_sqrt2), opts);
  REQUIRE(tr.termination == Termination::boundary);
  const TrajectorySample& end = tr.back();
  CHECK(end.bdf[Face::nFf] < 2e-4);
  CHECK(fiber_infinity_coordinate(end.p) < 1e-3);
  CHECK(tr.symbol_drift <= 1e-6 * (1.0 + 0.0) * std::max(tr.length, 1.0));
  CHECK(tr.min_bdf >= 0.0);
}

TEST_CASE("massive flat ray stays at finite fiber and exits at the cap") {
  auto mink = make_minkowski(1);
  IntegrateOpts opts;
  opts.msq = 1.0;
  opts.max_length = 1e9;
  const Trajectory tr =
      integrate_bichar(*mink, phase_point1(0.0, 0.0, -std::sqrt(2.0), 1.0),
                       opts);
  REQUIRE(tr.termination == Termination::boundary);
  const TrajectorySample& end = tr.back();
  CHECK(end.bdf[Face::Ff] < 2e-4);
  CHECK(fiber_infinity_coordinate(end.p) > 0.1);
  CHECK(tr.symbol_drift <= 1e-6 * 1.0 * std::max(tr.length, 1.0));
}

TEST_CASE("integration reverses back to the start") {
  auto mink = make_minkowski(1);
  IntegrateOpts opts;
  opts.msq = 1.0;
  opts.max_length = 50.0;
  const PhasePoint start = phase_point1(0.3, -0.2, -std::sqrt(2.0), 1.0);
  const Trajectory fwd = integrate_bichar(*mink, start, opts);
  REQUIRE(fwd.termination == Termination::step_limit);

  IntegrateOpts back = opts;
  back.reverse = true;
  back.max_length = fwd.length;
  const Trajectory rev = integrate_bichar(*mink, fwd.back().p, back);
  const Eigen::Vector4d s0 = raw_state(fwd.samples.front());
  const Eigen::Vector4d s1 = raw_state(rev.back());
  CHECK((s1 - s0).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("black-hole null ray: static-time coordinates pile up at the "
          "corner, retarded-time coordinates resolve the null face") {
  const double m = 1.0;
  const double v_star_exact = -(4.0 + 2.0 * std::log(2.0));
  REQUIRE(v_star_exact == Approx(-5.386294361119891).epsilon(1e-15));

  auto naive = make_schwarzschild_naive(m, 1);
  const PhasePoint start = phase_point1(0.0, 4.0, -1.0, 2.0);
  REQUIRE(std::abs(principal_symbol(*naive, start, 0.0)) < 1e-12);

  IntegrateOpts opts;
  opts.msq = 0.0;
  opts.max_length = 1e11;
  opts.max_steps = 5000;

  SECTION("static-time chart: the ray degenerates into the corner") {
    const Trajectory tr = integrate_bichar(*naive, start, opts);
    REQUIRE(tr.termination == Termination::boundary);
    const BdfVector& b = tr.back().bdf;
    CHECK(b[Face::nFf] < 0.05);
    CHECK(b[Face::Ff] < 0.05);
  }

  SECTION("retarded time is conserved along the ray") {
    IntegrateOpts short_opts = opts;
    short_opts.max_length = 1e3;
    const Trajectory tr = integrate_bichar(*naive, start, short_opts);
    double worst = 0.0;
    for (const TrajectorySample& s : tr.samples) {
      const double r = s.p.z.r();
      const double v = s.p.z.t - (r + 2.0 * m * std::log(r - 2.0 * m));
      worst = std::max(worst, std::abs(v - v_star_exact));
    }
    CHECK(worst < 1e-6);
  }

  SECTION("retarded-time chart: the same ray lands inside the null face") {
    PushforwardMetric tort(make_schwarzschild_naive(m, 1), make_tortoise(m));
    // The change is the identity near the start, so the same raw data is
    // the same phase point in the new chart.
    REQUIRE(std::abs(principal_symbol(tort, start, 0.0)) < 1e-12);

    // On the flat tail the retarded time obeys d(v_hat)/ds = -4a, so any
    // persistent fiber error delta_a costs roughly 4 * delta_a * arc.  The
    // run below covers an arc of order 1e9, which turns the integrator's
    // per-step tolerance into the dominant endpoint error; 1e-13 leaves a
    // comfortable margin under the 1% acceptance band.
    IntegrateOpts long_opts = opts;
    long_opts.rtol = 1e-13;
    long_opts.atol = 1e-15;
    long_opts.max_steps = 40000;
    const Trajectory tr = integrate_bichar(tort, start, long_opts);
    REQUIRE(tr.termination == Termination::boundary);
    const TrajectorySample& end = tr.back();
    CHECK(end.bdf[Face::nFf] < 0.05);
    CHECK(end.bdf[Face::Ff] > 0.5);
    const double v_hat = end.p.z.t - end.p.z.r();
    CHECK(std::abs(v_hat - v_star_exact) < 0.01 * std::abs(v_star_exact));

    IntegrateOpts short_opts = opts;
    short_opts.max_length = 1e3;
    short_opts.rtol = 1e-12;
    short_opts.atol = 1e-14;
    const Trajectory ts = integrate_bichar(tort, start, short_opts);
    double worst = 0.0;
    for (const TrajectorySample& s : ts.samples) {
      const SpacetimePoint z = tort.map().inverse(s.p.z);
      worst = std::max(worst,
                       std::abs(tort.map().v_star(z.t, z.r()) - v_star_exact));
    }
    CHECK(worst < 1e-6);
  }
}

// ---------------------------------------------------------------------------
// Connections and the propagation order

TEST_CASE("sampled connections link the families in flow order") {
  auto mink = make_minkowski(1);
  const ConnectionReport conn = sample_connections(*mink, +1);

  const SetKey Nm = key(SetFamily::N, +1, -1), Np = key(SetFamily::N, +1, +1);
  const SetKey Cm = key(SetFamily::C, +1, -1), Cp = key(SetFamily::C, +1, +1);
  const SetKey Km = key(SetFamily::K, +1, -1), Kp = key(SetFamily::K, +1, +1);

  // Interior lifts connect the null-face family across.
  CHECK(has_edge(conn, Nm, Np));
  // The future-side dip through the cap corner and its past mirror.
  CHECK(has_edge(conn, Cp, Np));
  CHECK(has_edge(conn, Nm, Cm));
  // The corner-to-corner transit legs.
  CHECK(has_edge(conn, Kp, Cp));
  CHECK(has_edge(conn, Cm, Km));

  // Every sampled edge moves strictly forward along the estimate chain.
  for (const FlowEdge& e : conn.edges) {
    INFO(set_label(e.from) << " -> " << set_label(e.to));
    CHECK(chain_rank(e.from) < chain_rank(e.to));
  }

  // The two transit orbits show the full corner passage.
  CHECK(has_sequence(conn, {Nm, Kp, Cp, Np}));
  CHECK(has_sequence(conn, {Nm, Cm, Km, Np}));

  SECTION("second sheet mirrors the edges") {
    const ConnectionReport conn2 = sample_connections(*mink, -1);
    CHECK(has_edge(conn2, key(SetFamily::N, -1, +1), key(SetFamily::N, -1, -1)));
    CHECK(has_edge(conn2, key(SetFamily::C, -1, +1), key(SetFamily::K, -1, +1)));
    for (const FlowEdge& e : conn2.edges) {
      CHECK(chain_rank(e.from) < chain_rank(e.to));
    }
  }

  SECTION("sampling is deterministic") {
    const ConnectionReport again = sample_connections(*mink, +1);
    REQUIRE(again.edges.size() == conn.edges.size());
    for (std::size_t i = 0; i < conn.edges.size(); ++i) {
      CHECK(again.edges[i].from == conn.edges[i].from);
      CHECK(again.edges[i].to == conn.edges[i].to);
      CHECK(again.edges[i].count == conn.edges[i].count);
    }
  }
}

TEST_CASE("propagation order runs through the estimate chain") {
  auto mink = make_minkowski(1);
  const std::vector<RadialSet> census = find_radial_sets(*mink, 1.0);
  const ConnectionReport conn = sample_connections(*mink, +1);

  const std::vector<SetKey> chain = {
      key(SetFamily::N, +1, -1), key(SetFamily::C, +1, -1),
      key(SetFamily::K, +1, -1), key(SetFamily::K, +1, +1),
      key(SetFamily::C, +1, +1), key(SetFamily::N, +1, +1)};

  const std::vector<SetKey> with_flow =
      propagation_order(census, conn.edges, +1, FlowDirection::with_flow);
  CHECK(with_flow == chain);

  std::vector<SetKey> reversed = chain;
  std::reverse(reversed.begin(), reversed.end());
  const std::vector<SetKey> against =
      propagation_order(census, conn.edges, +1, FlowDirection::against_flow);
  CHECK(against == reversed);

  SECTION("second sheet") {
    const ConnectionReport conn2 = sample_connections(*mink, -1);
    const std::vector<SetKey> chain2 = {
        key(SetFamily::N, -1, +1), key(SetFamily::C, -1, +1),
        key(SetFamily::K, -1, +1), key(SetFamily::K, -1, -1),
        key(SetFamily::C, -1, -1), key(SetFamily::N, -1, -1)};
    CHECK(propagation_order(census, conn2.edges, -1,
                            FlowDirection::with_flow) == chain2);
  }

  SECTION("a cyclic edge set is reported, not silently ordered") {
    std::vector<FlowEdge> bad;
    bad.push_back({key(SetFamily::N, +1, -1), key(SetFamily::C, +1, -1), 1});
    bad.push_back({key(SetFamily::C, +1, -1), key(SetFamily::N, +1, -1), 1});
    try {
      propagation_order(census, bad, +1, FlowDirection::with_flow);
      FAIL("expected CycleError");
    } catch (const CycleError& e) {
      CHECK(e.cycle.size() >= 2);
    }
  }
}
