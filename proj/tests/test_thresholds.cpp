#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "desclab/simplex.hpp"
#include "desclab/thresholds.hpp"

using namespace desclab;

namespace {

OrderTuple make_tuple(double m, double sPf, double snPf, double sSf,
                      double snFf, double sFf) {
  OrderTuple o;
  o.m = m;
  o.s_at(Face::Pf) = sPf;
  o.s_at(Face::nPf) = snPf;
  o.s_at(Face::Sf) = sSf;
  o.s_at(Face::nFf) = snFf;
  o.s_at(Face::Ff) = sFf;
  return o;
}

}  // namespace

TEST_CASE("threshold slacks match a hand-computed table") {
  // (m; s_Pf, s_nPf, s_Sf, s_nFf, s_Ff) = (2; 0.5, -0.5, 1, 0.25, -1).
  const OrderTuple o = make_tuple(2.0, 0.5, -0.5, 1.0, 0.25, -1.0);
  const SlackReport rep = slacks(o, CaseId::one);

  CHECK(rep.slack[form_index(FormId::N_plus)] == 0.75);
  CHECK(rep.slack[form_index(FormId::C_plus)] == 3.25);
  CHECK(rep.slack[form_index(FormId::A_plus)] == 2.25);
  CHECK(rep.slack[form_index(FormId::K_minus)] == -1.5);
  CHECK(rep.slack[form_index(FormId::N_minus)] == -1.5);
  CHECK(rep.slack[form_index(FormId::C_minus)] == 0.5);
  CHECK(rep.slack[form_index(FormId::A_minus)] == -3.0);
  CHECK(rep.slack[form_index(FormId::K_plus)] == 0.75);

  CHECK(rep.min_slack == -3.0);
  CHECK(rep.argmin == FormId::A_minus);
  CHECK_FALSE(rep.all_strict);

  // Direction pattern: N+, C+, A+, K- are lower bounds in case 1, the rest
  // upper bounds; case 2 flips every direction.
  for (FormId f : all_forms) {
    const Direction d1 = form_direction(f, CaseId::one);
    const Direction d2 = form_direction(f, CaseId::two);
    CHECK(d1 != d2);
    const bool lower1 = (f == FormId::N_plus || f == FormId::C_plus ||
                         f == FormId::A_plus || f == FormId::K_minus);
    CHECK((d1 == Direction::lower) == lower1);
  }
}

TEST_CASE("weighted families produce the documented tuples and slacks") {
  const OrderTuple fam = family_future_weighted(2.0);
  CHECK(fam.m == 4.0);
  CHECK(fam.s_at(Face::Pf) == 8.0);
  CHECK(fam.s_at(Face::nPf) == 8.0);
  CHECK(fam.s_at(Face::Sf) == 4.0);
  CHECK(fam.s_at(Face::nFf) == 2.0);
  CHECK(fam.s_at(Face::Ff) == 2.0);

  const SlackReport rep = slacks(fam, CaseId::one);
  CHECK(rep.slack[form_index(FormId::N_plus)] == 1.0);
  CHECK(rep.slack[form_index(FormId::C_plus)] == 1.0);
  CHECK(rep.slack[form_index(FormId::A_plus)] == 5.5);
  CHECK(rep.slack[form_index(FormId::K_minus)] == 3.0);
  CHECK(rep.slack[form_index(FormId::N_minus)] == 5.0);
  CHECK(rep.slack[form_index(FormId::C_minus)] == 5.0);
  CHECK(rep.slack[form_index(FormId::A_minus)] == 0.5);
  CHECK(rep.slack[form_index(FormId::K_plus)] == 3.0);
  CHECK(rep.min_slack == 0.5);
  CHECK(rep.all_strict);

  // The past-weighted family is the time mirror of the future-weighted one.
  const OrderTuple past = family_past_weighted(2.0);
  CHECK(past.s_at(Face::Pf) == 2.0);
  CHECK(past.s_at(Face::nPf) == 2.0);
  CHECK(past.s_at(Face::Sf) == 4.0);
  CHECK(past.s_at(Face::nFf) == 8.0);
  CHECK(past.s_at(Face::Ff) == 8.0);
  const SlackReport prep = slacks(past, CaseId::two);
  CHECK(prep.min_slack == 0.5);
}

TEST_CASE("family floor: minimum lower slack equals N-1 bitwise") {
  // For the future-weighted family under the case-1 directions the four
  // lower slacks are N-1, N-1, 3N-1/2, 2N-1; the binding value N-1 comes
  // out of the arithmetic exactly, with no rounding slop, even for N = 1.1.
  for (double N : {1.1, 2.0, 5.0, 10.0}) {
    const SlackReport rep = slacks(family_future_weighted(N), CaseId::one);
    CHECK(rep.min_lower_slack == N - 1.0);
    // Mirrored statement for the past-weighted family under case 2.
    const SlackReport mrep = slacks(family_past_weighted(N), CaseId::two);
    CHECK(mrep.min_upper_slack == rep.min_upper_slack);
    CHECK(mrep.min_lower_slack == N - 1.0);
  }
  // N = 1 sits exactly on the boundary: minimum slack 0, not strict.
  const SlackReport unit = slacks(family_future_weighted(1.0), CaseId::one);
  CHECK(unit.min_slack == 0.0);
  CHECK_FALSE(unit.all_strict);
}

TEST_CASE("case 2 is the bitwise time mirror of case 1") {
  std::mt19937 rng(20260823u);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    OrderTuple o;
    o.m = U(rng);
    for (double& s : o.s) s = U(rng);
    const SlackReport two = slacks(o, CaseId::two);
    const SlackReport one_m = slacks(o.time_mirrored(), CaseId::one);
    for (FormId f : all_forms) {
      CHECK(two.slack[form_index(f)] ==
            one_m.slack[form_index(time_mirrored(f))]);
    }
    CHECK(two.min_slack == one_m.min_slack);
  }
}

TEST_CASE("simplex: textbook problem with known optimum and duals") {
  // min -x1 - 2 x2  s.t.  x1 + x2 + s1 = 4,  x1 + 3 x2 + s2 = 6,  x >= 0.
  Eigen::MatrixXd A(2, 4);
  A << 1, 1, 1, 0,
       1, 3, 0, 1;
  Eigen::VectorXd b(2), c(4);
  b << 4, 6;
  c << -1, -2, 0, 0;
  const LpResult r = lp_solve_standard(A, b, c);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK_THAT(r.objective, Catch::Matchers::WithinAbs(-5.0, 1e-12));
  CHECK_THAT(r.x[0], Catch::Matchers::WithinAbs(3.0, 1e-12));
  CHECK_THAT(r.x[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(r.y[0], Catch::Matchers::WithinAbs(-0.5, 1e-12));
  CHECK_THAT(r.y[1], Catch::Matchers::WithinAbs(-0.5, 1e-12));
  CHECK_THAT(b.dot(r.y), Catch::Matchers::WithinAbs(r.objective, 1e-12));
}

TEST_CASE("simplex: infeasible and unbounded problems are classified") {
  {
    Eigen::MatrixXd A(1, 2);
    A << 1, 1;
    Eigen::VectorXd b(1), c(2);
    b << -1;  // x1 + x2 = -1 has no nonnegative solution
    c << 1, 1;
    CHECK(lp_solve_standard(A, b, c).status == LpStatus::infeasible);
  }
  {
    Eigen::MatrixXd A(1, 2);
    A << 1, -1;
    Eigen::VectorXd b(1), c(2);
    b << 0;  // x1 = x2 free to grow
    c << -1, 0;
    CHECK(lp_solve_standard(A, b, c).status == LpStatus::unbounded);
  }
  {
    // Degenerate face of optima: Bland's rule still terminates.
    Eigen::MatrixXd A(1, 3);
    A << 1, 1, 1;
    Eigen::VectorXd b(1), c(3);
    b << 1;
    c << -1, -1, 0;
    const LpResult r = lp_solve_standard(A, b, c);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK_THAT(r.objective, Catch::Matchers::WithinAbs(-1.0, 1e-12));
  }
}

TEST_CASE("solver finds a strictly admissible tuple for one case") {
  ThresholdSystem sys;
  sys.add_case(CaseId::one);
  const ThresholdSolveReport rep = solve_threshold_system(sys);
  REQUIRE(rep.feasible);
  CHECK(rep.sigma > 0.5);

  // The reported optimum is consistent: recomputing every row slack at the
  // optimizer reproduces sigma as the minimum.
  double mn = std::numeric_limits<double>::infinity();
  for (double s : rep.row_slacks) mn = std::min(mn, s);
  CHECK_THAT(mn, Catch::Matchers::WithinAbs(rep.sigma, 1e-9));
  const SlackReport sl = slacks(rep.optimizer, CaseId::one);
  CHECK_THAT(sl.min_slack, Catch::Matchers::WithinAbs(rep.sigma, 1e-9));

  // No random probe inside the box beats the reported optimum.
  std::mt19937 rng(7u);
  for (int trial = 0; trial < 200; ++trial) {
    OrderTuple o;
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    o.m = U(rng);
    for (double& s : o.s) s = U(rng);
    CHECK(slacks(o, CaseId::one).min_slack <= rep.sigma + 1e-9);
  }
}

TEST_CASE("joint two-case system is exactly borderline") {
  ThresholdSystem sys;
  sys.add_case(CaseId::one);
  sys.add_case(CaseId::two);
  const ThresholdSolveReport rep = solve_threshold_system(sys);
  CHECK_FALSE(rep.feasible);
  CHECK_THAT(rep.sigma, Catch::Matchers::WithinAbs(0.0, 1e-9));

  // The borderline point (m; s) = (1/2; -1/2,...) attains slack zero in all
  // sixteen rows simultaneously.
  const OrderTuple border = make_tuple(0.5, -0.5, -0.5, -0.5, -0.5, -0.5);
  CHECK(slacks(border, CaseId::one).min_slack == 0.0);
  CHECK(slacks(border, CaseId::one).slack ==
        std::array<double, 8>{0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(slacks(border, CaseId::two).min_slack == 0.0);

  // Certificate: a convex combination of rows whose value over the whole
  // box never exceeds zero.
  const FeasibilityCertificate& cert = rep.certificate;
  CHECK_THAT(cert.weight_sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK(cert.y.minCoeff() >= 0.0);
  CHECK(cert.residual < 1e-8);
  CHECK(cert.bound_value <= 1e-8);
  CHECK_THAT(cert.bound_value, Catch::Matchers::WithinAbs(rep.sigma, 1e-7));
}

TEST_CASE("incompatible side constraints yield a negative certificate") {
  // Case-1 directions plus two extra requirements:
  //   m >= 2 s_Sf + 2   and   s_nPf <= s_Sf - 1.
  // The K- lower bound and N- upper bound force s_Sf < s_nPf, which the
  // second extra row pushes to a fixed deficit: the best achievable minimum
  // slack is exactly -1/2.
  ThresholdSystem sys;
  sys.add_case(CaseId::one);
  Eigen::VectorXd a1 = Eigen::VectorXd::Zero(6);
  a1[0] = 1.0;                              // m
  a1[1 + face_index(Face::Sf)] = -2.0;      // -2 s_Sf
  sys.add_lower(a1, 2.0, "m_vs_sSf");
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(6);
  a2[1 + face_index(Face::nPf)] = 1.0;
  a2[1 + face_index(Face::Sf)] = -1.0;
  sys.add_upper(a2, -1.0, "snPf_vs_sSf");

  const ThresholdSolveReport rep = solve_threshold_system(sys);
  CHECK_FALSE(rep.feasible);
  CHECK_THAT(rep.sigma, Catch::Matchers::WithinAbs(-0.5, 1e-7));

  const FeasibilityCertificate& cert = rep.certificate;
  CHECK_THAT(cert.weight_sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK(cert.y.minCoeff() >= 0.0);
  CHECK(cert.residual < 1e-8);
  CHECK_THAT(cert.bound_value, Catch::Matchers::WithinAbs(-0.5, 1e-6));

  // Sanity: evaluating the certified combination at random box points never
  // exceeds the certified bound (up to roundoff).
  std::mt19937 rng(11u);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x(6);
    for (int j = 0; j < 6; ++j) x[j] = U(rng);
    double combo = 0.0;
    for (int i = 0; i < cert.y.size(); ++i)
      combo += cert.y[i] * sys.rows[static_cast<std::size_t>(i)].value(x);
    CHECK(combo <= cert.bound_value + 1e-7);
  }
}

TEST_CASE("solver requires finite box bounds") {
  ThresholdSystem sys;
  sys.add_case(CaseId::one);
  sys.lo[0] = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_threshold_system(sys), std::invalid_argument);
  sys.lo[0] = 3.0;
  sys.hi[0] = 3.0;  // empty interior
  CHECK_THROWS_AS(solve_threshold_system(sys), std::invalid_argument);
}

TEST_CASE("variable-order check covers sixteen sheet/form slots") {
  // Admissible assignment: future-weighted orders on the upper sheet,
  // past-weighted on the lower sheet, both at N = 2.
  const auto good = [](SheetSign sheet, FormId) {
    return sheet == SheetSign::plus ? family_future_weighted(2.0)
                                    : family_past_weighted(2.0);
  };
  const VariableOrderReport rep = check_variable_orders(good);
  CHECK(rep.pass);
  CHECK(rep.min_slack == 0.5);
  for (int si = 0; si < 2; ++si)
    for (double s : rep.slack[static_cast<std::size_t>(si)]) CHECK(s >= 0.5);

  // Swapping the weightings between the sheets violates several bounds.
  const auto bad = [](SheetSign sheet, FormId) {
    return sheet == SheetSign::plus ? family_past_weighted(2.0)
                                    : family_future_weighted(2.0);
  };
  const VariableOrderReport brep = check_variable_orders(bad);
  CHECK_FALSE(brep.pass);
  CHECK(brep.min_slack < 0.0);
}
