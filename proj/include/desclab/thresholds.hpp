#pragma once

// Two-sided threshold-inequality systems for weighted order tuples.
//
// An order tuple assigns an overall weight m and one weight per boundary
// face. Eight named linear forms (four per time direction) compare m against
// face-weight thresholds; the admissible windows come in two mutually
// time-reflected direction patterns ("case 1" / "case 2"). Feasibility of a
// system of such constraints over a box of tuples is decided exactly by a
// small linear program maximizing the minimum slack; infeasible systems are
// returned with a nonnegative-combination certificate.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desclab/geometry.hpp"
#include "desclab/simplex.hpp"

namespace desclab {

// ---------------------------------------------------------------------------
// Order tuples

// Variable order data (m; s_Pf, s_nPf, s_Sf, s_nFf, s_Ff).
struct OrderTuple {
  double m = 0.0;
  std::array<double, 5> s{};  // indexed by face_index

  double s_at(Face f) const { return s[face_index(f)]; }
  double& s_at(Face f) { return s[face_index(f)]; }

  OrderTuple time_mirrored() const {
    OrderTuple o = *this;
    for (Face f : all_faces) o.s[face_index(time_reflected(f))] = s_at(f);
    return o;
  }

  // Vector layout (m, s_Pf, s_nPf, s_Sf, s_nFf, s_Ff) used by the solver.
  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd x(6);
    x[0] = m;
    for (int i = 0; i < 5; ++i) x[1 + i] = s[i];
    return x;
  }
  static OrderTuple from_vector(const Eigen::VectorXd& x) {
    OrderTuple o;
    o.m = x[0];
    for (int i = 0; i < 5; ++i) o.s[i] = x[1 + i];
    return o;
  }
};

// Weighted families: overall weight 2N, face weights emphasizing one time
// direction. future_weighted(N) = (2N; 4N, 4N, 2N, N, N).
inline OrderTuple family_future_weighted(double N) {
  OrderTuple o;
  o.m = 2.0 * N;
  o.s_at(Face::Pf) = 4.0 * N;
  o.s_at(Face::nPf) = 4.0 * N;
  o.s_at(Face::Sf) = 2.0 * N;
  o.s_at(Face::nFf) = N;
  o.s_at(Face::Ff) = N;
  return o;
}

inline OrderTuple family_past_weighted(double N) {
  return family_future_weighted(N).time_mirrored();
}

// ---------------------------------------------------------------------------
// The eight forms

enum class FormId {
  N_plus,
  C_plus,
  A_plus,
  K_plus,
  N_minus,
  C_minus,
  A_minus,
  K_minus
};

inline constexpr std::array<FormId, 8> all_forms = {
    FormId::N_plus, FormId::C_plus, FormId::A_plus, FormId::K_plus,
    FormId::N_minus, FormId::C_minus, FormId::A_minus, FormId::K_minus};

inline constexpr std::string_view form_name(FormId f) {
  switch (f) {
    case FormId::N_plus: return "N_plus";
    case FormId::C_plus: return "C_plus";
    case FormId::A_plus: return "A_plus";
    case FormId::K_plus: return "K_plus";
    case FormId::N_minus: return "N_minus";
    case FormId::C_minus: return "C_minus";
    case FormId::A_minus: return "A_minus";
    case FormId::K_minus: return "K_minus";
  }
  return "?";
}

inline constexpr std::size_t form_index(FormId f) {
  return static_cast<std::size_t>(f);
}

inline constexpr FormId time_mirrored(FormId f) {
  switch (f) {
    case FormId::N_plus: return FormId::N_minus;
    case FormId::C_plus: return FormId::C_minus;
    case FormId::A_plus: return FormId::A_minus;
    case FormId::K_plus: return FormId::K_minus;
    case FormId::N_minus: return FormId::N_plus;
    case FormId::C_minus: return FormId::C_plus;
    case FormId::A_minus: return FormId::A_plus;
    case FormId::K_minus: return FormId::K_plus;
  }
  return f;
}

// Threshold value compared against m.
inline double threshold_value(FormId f, const OrderTuple& o) {
  const double sPf = o.s_at(Face::Pf), snPf = o.s_at(Face::nPf),
               sSf = o.s_at(Face::Sf), snFf = o.s_at(Face::nFf),
               sFf = o.s_at(Face::Ff);
  switch (f) {
    case FormId::N_plus: return 1.0 + snFf;
    case FormId::C_plus: return 1.0 - snFf + 2.0 * sFf;
    case FormId::A_plus: return 0.5 + snFf - sSf;
    case FormId::K_plus: return 1.0 - snFf + 2.0 * sSf;
    case FormId::N_minus: return 1.0 + snPf;
    case FormId::C_minus: return 1.0 - snPf + 2.0 * sPf;
    case FormId::A_minus: return 0.5 + snPf - sSf;
    case FormId::K_minus: return 1.0 - snPf + 2.0 * sSf;
  }
  return 0.0;
}

enum class CaseId { one, two };

inline constexpr std::string_view case_name(CaseId c) {
  return c == CaseId::one ? "case1" : "case2";
}

enum class Direction { lower, upper };  // lower: m > T; upper: m < T

inline Direction form_direction(FormId f, CaseId c) {
  bool lower;
  switch (f) {
    case FormId::N_plus:
    case FormId::C_plus:
    case FormId::A_plus:
    case FormId::K_minus:
      lower = true;
      break;
    default:
      lower = false;
      break;
  }
  if (c == CaseId::two) lower = !lower;
  return lower ? Direction::lower : Direction::upper;
}

// Signed slack of one form: positive iff the strict inequality holds.
inline double form_slack(FormId f, CaseId c, const OrderTuple& o) {
  const double T = threshold_value(f, o);
  return form_direction(f, c) == Direction::lower ? o.m - T : T - o.m;
}

struct SlackReport {
  CaseId case_id = CaseId::one;
  std::array<double, 8> slack{};  // indexed by form_index
  double min_slack = 0.0;
  double min_lower_slack = 0.0;
  double min_upper_slack = 0.0;
  FormId argmin = FormId::N_plus;
  bool all_strict = false;
};

inline SlackReport slacks(const OrderTuple& o, CaseId c) {
  SlackReport rep;
  rep.case_id = c;
  double mn = std::numeric_limits<double>::infinity();
  double mn_lo = mn, mn_hi = mn;
  for (FormId f : all_forms) {
    const double s = form_slack(f, c, o);
    rep.slack[form_index(f)] = s;
    if (s < mn) {
      mn = s;
      rep.argmin = f;
    }
    if (form_direction(f, c) == Direction::lower)
      mn_lo = std::min(mn_lo, s);
    else
      mn_hi = std::min(mn_hi, s);
  }
  rep.min_slack = mn;
  rep.min_lower_slack = mn_lo;
  rep.min_upper_slack = mn_hi;
  rep.all_strict = mn > 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Feasibility systems
//
// Every constraint is an affine form a^T x - c compared against the shared
// slack, x = (m, s_Pf, s_nPf, s_Sf, s_nFf, s_Ff). The solver maximizes the
// minimum slack over a bounded box of tuples.

struct ConstraintRow {
  Eigen::VectorXd a;  // size 6
  double c = 0.0;
  std::string label;

  double value(const Eigen::VectorXd& x) const { return a.dot(x) - c; }
};

// The affine form of one named threshold inequality.
inline ConstraintRow form_row(FormId f, CaseId cs) {
  // T(x) = t0 + tvec . x  (no m dependence).
  Eigen::VectorXd tvec = Eigen::VectorXd::Zero(6);
  double t0 = 0.0;
  auto sidx = [](Face fc) { return 1 + static_cast<int>(face_index(fc)); };
  switch (f) {
    case FormId::N_plus:
      t0 = 1.0;
      tvec[sidx(Face::nFf)] = 1.0;
      break;
    case FormId::C_plus:
      t0 = 1.0;
      tvec[sidx(Face::nFf)] = -1.0;
      tvec[sidx(Face::Ff)] = 2.0;
      break;
    case FormId::A_plus:
      t0 = 0.5;
      tvec[sidx(Face::nFf)] = 1.0;
      tvec[sidx(Face::Sf)] = -1.0;
      break;
    case FormId::K_plus:
      t0 = 1.0;
      tvec[sidx(Face::nFf)] = -1.0;
      tvec[sidx(Face::Sf)] = 2.0;
      break;
    case FormId::N_minus:
      t0 = 1.0;
      tvec[sidx(Face::nPf)] = 1.0;
      break;
    case FormId::C_minus:
      t0 = 1.0;
      tvec[sidx(Face::nPf)] = -1.0;
      tvec[sidx(Face::Pf)] = 2.0;
      break;
    case FormId::A_minus:
      t0 = 0.5;
      tvec[sidx(Face::nPf)] = 1.0;
      tvec[sidx(Face::Sf)] = -1.0;
      break;
    case FormId::K_minus:
      t0 = 1.0;
      tvec[sidx(Face::nPf)] = -1.0;
      tvec[sidx(Face::Sf)] = 2.0;
      break;
  }
  ConstraintRow row;
  if (form_direction(f, cs) == Direction::lower) {
    row.a = Eigen::VectorXd::Zero(6);
    row.a[0] = 1.0;
    row.a -= tvec;
    row.c = t0;
  } else {
    row.a = tvec;
    row.a[0] -= 1.0;
    row.c = -t0;
  }
  row.label = std::string(form_name(f)) + "/" + std::string(case_name(cs));
  return row;
}

struct ThresholdSystem {
  std::vector<ConstraintRow> rows;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(6, -10.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(6, 10.0);

  void add_case(CaseId c) {
    for (FormId f : all_forms) rows.push_back(form_row(f, c));
  }

  // a^T x >= rhs as a slack-coupled row.
  void add_lower(const Eigen::VectorXd& a, double rhs, std::string label) {
    rows.push_back({a, rhs, std::move(label)});
  }

  // a^T x <= rhs.
  void add_upper(const Eigen::VectorXd& a, double rhs, std::string label) {
    rows.push_back({-a, -rhs, std::move(label)});
  }
};

struct FeasibilityCertificate {
  Eigen::VectorXd y;     // one weight per row, >= 0, sums to one
  Eigen::VectorXd u, v;  // upper/lower bound multipliers, >= 0
  double residual = 0.0;     // || sum_i y_i a_i - u + v ||_inf
  double weight_sum = 0.0;   // sum of y
  double bound_value = 0.0;  // certified max of the min slack (<= 0)
};

struct ThresholdSolveReport {
  bool feasible = false;
  double sigma = 0.0;  // optimal value of the max-min-slack program
  OrderTuple optimizer;
  std::vector<double> row_slacks;  // at the optimizer
  FeasibilityCertificate certificate;  // meaningful when infeasible
};

// Maximize the minimum slack of all rows over the box [lo, hi]. The system
// is strictly feasible iff the optimum is positive; otherwise the returned
// certificate exhibits a convex combination of rows bounded above by the
// (nonpositive) optimum over the whole box.
inline ThresholdSolveReport solve_threshold_system(const ThresholdSystem& sys) {
  const int nr = static_cast<int>(sys.rows.size());
  if (nr == 0) throw std::invalid_argument("threshold system has no rows");
  for (int j = 0; j < 6; ++j) {
    if (!(sys.lo[j] < sys.hi[j]) || !std::isfinite(sys.lo[j]) ||
        !std::isfinite(sys.hi[j]))
      throw std::invalid_argument(
          "threshold system requires finite box bounds lo < hi");
  }

  // Standard form variables: [x' (6) | sigma+ | sigma- | row slacks (nr) |
  // bound slacks (6)], x = lo + x'.
  const int nx = 6, ncols = nx + 2 + nr + nx;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nr + nx, ncols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nr + nx);
  for (int i = 0; i < nr; ++i) {
    const auto& row = sys.rows[i];
    A.block(i, 0, 1, nx) = row.a.transpose();
    A(i, nx) = -1.0;      // sigma+
    A(i, nx + 1) = 1.0;   // sigma-
    A(i, nx + 2 + i) = -1.0;
    b[i] = row.c - row.a.dot(sys.lo);
  }
  for (int j = 0; j < nx; ++j) {
    A(nr + j, j) = 1.0;
    A(nr + j, nx + 2 + nr + j) = 1.0;
    b[nr + j] = sys.hi[j] - sys.lo[j];
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(ncols);
  c[nx] = -1.0;  // maximize sigma
  c[nx + 1] = 1.0;

  const LpResult lp = lp_solve_standard(A, b, c);
  if (lp.status == LpStatus::unbounded)
    throw std::runtime_error("threshold system: unbounded (missing bounds?)");
  if (lp.status == LpStatus::infeasible)
    throw std::runtime_error("threshold system: LP infeasible unexpectedly");

  ThresholdSolveReport rep;
  rep.sigma = -lp.objective;
  Eigen::VectorXd x = sys.lo + lp.x.head(nx);
  rep.optimizer = OrderTuple::from_vector(x);
  rep.row_slacks.resize(nr);
  for (int i = 0; i < nr; ++i) rep.row_slacks[i] = sys.rows[i].value(x);
  rep.feasible = rep.sigma > 1e-9;

  if (!rep.feasible) {
    // Row multipliers y from the equality duals; mu = sum y_i a_i is then
    // split into box multipliers so that mu - u + v = 0 identically.
    Eigen::VectorXd y = lp.y.head(nr);
    for (int i = 0; i < nr; ++i) y[i] = std::max(y[i], 0.0);
    const double ys = y.sum();
    if (ys > 1e-12) y /= ys;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(nx);
    for (int i = 0; i < nr; ++i) mu += y[i] * sys.rows[i].a;
    Eigen::VectorXd u(nx), v(nx);
    for (int j = 0; j < nx; ++j) {
      u[j] = std::max(mu[j], 0.0);
      v[j] = std::max(-mu[j], 0.0);
    }
    FeasibilityCertificate cert;
    cert.y = y;
    cert.u = u;
    cert.v = v;
    cert.weight_sum = y.sum();
    cert.residual = (mu - u + v).cwiseAbs().maxCoeff();
    double yc = 0.0;
    for (int i = 0; i < nr; ++i) yc += y[i] * sys.rows[i].c;
    cert.bound_value = sys.hi.dot(u) - sys.lo.dot(v) - yc;
    rep.certificate = cert;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Variable-order checks: sixteen (sheet, form) slots, each carrying its own
// order tuple. The positive-imaginary sheet uses the case-1 directions, the
// negative sheet the case-2 directions.

enum class SheetSign { plus, minus };

inline constexpr std::string_view sheet_name(SheetSign s) {
  return s == SheetSign::plus ? "plus" : "minus";
}

struct VariableOrderReport {
  std::array<std::array<double, 8>, 2> slack{};  // [sheet][form]
  double min_slack = std::numeric_limits<double>::infinity();
  bool pass = false;
};

inline VariableOrderReport check_variable_orders(
    const std::function<OrderTuple(SheetSign, FormId)>& order_of) {
  VariableOrderReport rep;
  for (int si = 0; si < 2; ++si) {
    const SheetSign sheet = si == 0 ? SheetSign::plus : SheetSign::minus;
    const CaseId cs = sheet == SheetSign::plus ? CaseId::one : CaseId::two;
    for (FormId f : all_forms) {
      const OrderTuple o = order_of(sheet, f);
      const double s = form_slack(f, cs, o);
      rep.slack[si][form_index(f)] = s;
      rep.min_slack = std::min(rep.min_slack, s);
    }
  }
  rep.pass = rep.min_slack > 0.0;
  return rep;
}

}  // namespace desclab
