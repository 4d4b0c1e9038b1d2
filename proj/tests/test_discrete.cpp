#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "desclab/discrete_op.hpp"
#include "desclab/fit.hpp"
#include "desclab/fourier.hpp"
#include "desclab/metrics.hpp"
#include "desclab/selfadjoint.hpp"
#include "desclab/solve.hpp"

using namespace desclab;
using Catch::Matchers::WithinAbs;

namespace {

GridField offset_gaussian(const GridSpec& s, double t0, double x0, double w,
                          std::complex<double> amp = {1.0, 0.0}) {
  return sample_field(s, [=](double t, double x) {
    return amp * std::exp(-((t - t0) * (t - t0) + (x - x0) * (x - x0)) / w);
  });
}

Eigen::VectorXd stencil_row(const DiscreteOperator& op, int i, int j) {
  long r = 0;
  REQUIRE(op.interior_index(i, j, r));
  const auto& P = op.real_part();
  Eigen::VectorXd row = Eigen::VectorXd::Zero(P.cols());
  for (int k = 0; k < P.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(P, k); it; ++it)
      if (it.row() == r) row[it.col()] = it.value();
  return row;
}

}  // namespace

TEST_CASE("flat-metric stencil is the exact five-point wave stencil") {
  auto mink = make_minkowski(1);
  // Rectangular spacings so all coefficients are distinct.
  GridSpec gs;
  gs.T = 3.2;
  gs.X = 3.2;
  gs.n_t = 8;
  gs.n_x = 16;
  gs.boundary = BoundaryRule::dirichlet_zero;
  DiscreteOperator op(mink, 0.0, 0.0, gs, StencilMode::staggered_symmetric);
  const double ht = gs.h_t(), hx = gs.h_x();
  Eigen::VectorXd row = stencil_row(op, 3, 5);
  long c = 0;
  op.interior_index(4, 5, c);
  CHECK_THAT(row[c], WithinAbs(1.0 / (ht * ht), 1e-13));
  op.interior_index(2, 5, c);
  CHECK_THAT(row[c], WithinAbs(1.0 / (ht * ht), 1e-13));
  op.interior_index(3, 6, c);
  CHECK_THAT(row[c], WithinAbs(-1.0 / (hx * hx), 1e-13));
  op.interior_index(3, 4, c);
  CHECK_THAT(row[c], WithinAbs(-1.0 / (hx * hx), 1e-13));
  op.interior_index(3, 5, c);
  CHECK_THAT(row[c], WithinAbs(-2.0 / (ht * ht) + 2.0 / (hx * hx), 1e-13));
  CHECK((row.array() != 0.0).count() == 5);
}

TEST_CASE("staggered stencil is exactly symmetric; naive stencil is O(h^2)") {
  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  double defects[2];
  int idx = 0;
  for (double h : {0.1, 0.05}) {
    const int n = static_cast<int>(std::lround(12.8 / h));
    GridSpec gs = GridSpec::square(6.4, n, BoundaryRule::dirichlet_zero);
    GridField u = offset_gaussian(gs, 0.7, 1.9, 0.5);
    GridField v = offset_gaussian(gs, -0.9, 2.6, 0.8, {1.0, 0.3});

    DiscreteOperator stag(vaid, 0.25, 0.0, gs,
                          StencilMode::staggered_symmetric);
    CHECK(stag.matrix_asymmetry() < 1e-12);
    CHECK(stag.symmetry_defect(u, v) < 1e-10);

    DiscreteOperator naiv(vaid, 0.25, 0.0, gs, StencilMode::pointwise_naive);
    defects[idx++] = naiv.symmetry_defect(u, v);
  }
  CHECK(defects[0] > 0.0);
  CHECK(defects[1] > 0.0);
  CHECK(defects[0] / defects[1] >= 3.5);  // second-order decay of the defect
}

TEST_CASE("flat-metric symmetry defect vanishes for interior fields") {
  auto mink = make_minkowski(1);
  GridSpec gs = GridSpec::square(6.4, 128, BoundaryRule::dirichlet_zero);
  DiscreteOperator op(mink, 0.0, 0.0, gs, StencilMode::staggered_symmetric);
  GridField u = offset_gaussian(gs, 0.4, -1.0, 0.6);
  GridField v = offset_gaussian(gs, -0.5, 0.8, 0.7, {0.2, 1.0});
  CHECK(op.symmetry_defect(u, v) < 1e-10);
}

TEST_CASE("first-order term is Hermitian by construction") {
  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  GridSpec gs = GridSpec::square(6.4, 128, BoundaryRule::dirichlet_zero);
  DiscreteOperator op(vaid, 0.25, 0.6, gs, StencilMode::staggered_symmetric);
  GridField u = offset_gaussian(gs, 0.0, 1.0, 0.6);
  GridField v = offset_gaussian(gs, 1.0, 0.0, 0.7, {0.2, 1.0});
  CHECK(op.symmetry_defect(u, v) < 1e-10);

  // With u = v the defect reduces to 2 |Im <Pu, u>|.
  const double d = op.symmetry_defect(u, u);
  const std::complex<double> q = op.inner(op.apply(u), u);
  CHECK_THAT(d, WithinAbs(2.0 * std::abs(q.imag()), 1e-12));
}

TEST_CASE("sparse and Fourier resolvents agree at second order") {
  auto mink = make_minkowski(1);
  const std::complex<double> lambda(0.0, -1.0);
  const double T = 12.8, tol[2] = {0.05, 0.015};
  double errs[2];
  int idx = 0;
  for (double h : {0.1, 0.05}) {
    const int n = static_cast<int>(std::lround(2 * T / h));
    GridSpec pg = GridSpec::square(T, n, BoundaryRule::periodic);
    GridSpec dg = GridSpec::square(T, n, BoundaryRule::dirichlet_zero);
    GridField f = gaussian_field(pg, 1.0);
    REQUIRE(outer_tail_fraction(f) < 1e-10);
    GridField uf = free_resolvent(f, lambda);
    uf.spec.boundary = BoundaryRule::dirichlet_zero;
    GridField fd = f;
    fd.spec = dg;
    DiscreteOperator op(mink, 0.0, 0.0, dg, StencilMode::staggered_symmetric);
    SolveReport rep;
    GridField us = curved_resolvent(op, fd, lambda, &rep);
    CHECK(rep.residual < 1e-8);
    errs[idx] = window_rel_error(us, uf, 0.5);
    CHECK(errs[idx] < tol[idx]);
    ++idx;
  }
  CHECK(std::log2(errs[0] / errs[1]) >= 1.8);
}

TEST_CASE("curved solves satisfy the imaginary-shift norm bound") {
  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  GridSpec gs = GridSpec::square(6.4, 128, BoundaryRule::dirichlet_zero);
  GridField f = gaussian_field(gs, 0.6);
  DiscreteOperator op(vaid, 0.25, 0.4, gs, StencilMode::staggered_symmetric);
  const std::complex<double> lams[] = {{0, 1}, {0, -1}, {0, 0.5},
                                       {0, -0.5}, {1, 1}, {1, -1}};
  for (const auto& lam : lams) {
    SolveReport rep;
    curved_resolvent(op, f, lam, &rep);
    CHECK(rep.residual < 1e-8);
    CHECK(rep.norm_ratio <= 1.0 + 1e-9);
    CHECK(rep.bound_ok);
  }
  CHECK_THROWS_AS(curved_resolvent(op, f, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("curved solutions decay toward the spatial edge") {
  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  const std::complex<double> lambda(0.0, 1.0);
  double slopes[2];
  int idx = 0;
  for (double T : {6.4, 9.6}) {
    const int n = static_cast<int>(std::lround(2 * T / 0.1));
    GridSpec gs = GridSpec::square(T, n, BoundaryRule::dirichlet_zero);
    GridField f = gaussian_field(gs, 0.6);
    DiscreteOperator op(vaid, 0.25, 0.0, gs,
                        StencilMode::staggered_symmetric);
    GridField u = curved_resolvent(op, f, lambda);
    std::vector<double> xs, logmax;
    for (int j = 0; j < gs.n_x; ++j) {
      const double x = gs.x_of(j);
      if (x < 2.0 || x > T - 1.0) continue;
      double mx = 0.0;
      for (int i = 0; i < gs.n_t; ++i)
        mx = std::max(mx, std::abs(u.at(i, j)));
      xs.push_back(x);
      logmax.push_back(std::log(mx));
    }
    slopes[idx++] = fit_line(xs, logmax).slope;
  }
  CHECK(slopes[0] < -0.1);
  CHECK(slopes[1] < -0.1);
  // Larger box, less reflection contamination, steeper measured decay.
  CHECK(std::abs(slopes[1]) > std::abs(slopes[0]));
}

TEST_CASE("deficiency surrogate passes for symmetric discretizations") {
  auto mink = make_minkowski(1);
  GridSpec gs = GridSpec::square(6.4, 256, BoundaryRule::dirichlet_zero);
  DiscreteOperator op(mink, 0.0, 0.0, gs, StencilMode::staggered_symmetric);
  DeficiencyReport rep = deficiency_check(op);
  CHECK(rep.pass());
  CHECK(rep.sigma_min_minus >= 0.999);
  CHECK(rep.sigma_min_minus == rep.sigma_min_plus);
  CHECK(rep.method == "real_shift_invert");
  // The square flat box has exact zero modes, so sigma_min is exactly 1.
  CHECK_THAT(rep.sigma_min_minus, WithinAbs(1.0, 1e-9));

  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  DiscreteOperator vop(vaid, 0.25, 0.0, gs, StencilMode::staggered_symmetric);
  DeficiencyReport vrep = deficiency_check(vop);
  CHECK(vrep.pass());
  CHECK(vrep.sigma_min_minus >= 0.999);
  CHECK(vrep.hermiticity_defect < 1e-10);
}

TEST_CASE("deficiency reports are deterministic") {
  auto vaid = make_vaidya(grid_vaidya_params(), 1);
  GridSpec gs = GridSpec::square(6.4, 64, BoundaryRule::dirichlet_zero);
  DiscreteOperator op1(vaid, 0.25, 0.0, gs, StencilMode::staggered_symmetric);
  DiscreteOperator op2(vaid, 0.25, 0.0, gs, StencilMode::staggered_symmetric);
  DeficiencyReport a = deficiency_check(op1);
  DeficiencyReport b = deficiency_check(op2);
  CHECK(a.sigma_min_minus == b.sigma_min_minus);
  CHECK(a.sigma_min_plus == b.sigma_min_plus);
  CHECK(a.eigen_estimate == b.eigen_estimate);
  CHECK(a.iterations == b.iterations);
  CHECK(a.verdict == b.verdict);
}

TEST_CASE("deliberate antisymmetric contamination is flagged") {
  // Couple two exact zero modes of the flat square-box operator with an
  // antisymmetric block of strength eps: the contaminated block contributes
  // a singular value of exactly 1 - eps to (S - i), dropping below the
  // 0.999 verdict threshold.
  const int n = 64;
  auto mink = make_minkowski(1);
  GridSpec gs = GridSpec::square(6.4, n, BoundaryRule::dirichlet_zero);
  DiscreteOperator op(mink, 0.0, 0.0, gs, StencilMode::staggered_symmetric);
  const int ni = n - 2;
  auto mode = [&](int a) {
    Eigen::VectorXd phi(static_cast<long>(ni) * ni);
    for (int i = 1; i <= ni; ++i)
      for (int j = 1; j <= ni; ++j)
        phi[static_cast<long>(i - 1) * ni + (j - 1)] =
            std::sin(M_PI * a * i / (n - 1.0)) *
            std::sin(M_PI * a * j / (n - 1.0));
    return phi;
  };
  const Eigen::VectorXd p1 = mode(3), p2 = mode(7);
  const Eigen::SparseMatrix<double> S = op.symmetrized_real();
  REQUIRE((S * p1).norm() / p1.norm() < 1e-10);  // exact zero modes
  REQUIRE((S * p2).norm() / p2.norm() < 1e-10);

  const double eps = 0.05;
  DeficiencyReport rep = contaminated_deficiency_check(op, p1, p2, eps);
  CHECK_FALSE(rep.pass());
  CHECK(rep.sigma_min_minus < 0.999);
  CHECK_THAT(rep.sigma_min_minus, WithinAbs(1.0 - eps, 1e-4));
  CHECK_THAT(rep.sigma_min_plus, WithinAbs(1.0 - eps, 1e-4));
}
