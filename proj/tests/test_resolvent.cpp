#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "desclab/fourier.hpp"
#include "desclab/grid.hpp"

using namespace desclab;
using Catch::Matchers::WithinAbs;

namespace {

GridField gaussian_poly(const GridSpec& spec) {
  return sample_field(spec, [](double t, double x) {
    const double g = std::exp(-0.5 * (t * t + x * x));
    return std::complex<double>((1.0 + 0.8 * t - 0.5 * x + 0.3 * t * x * x) *
                                    g,
                                0.2 * g);
  });
}

double rel_l2(const GridField& a, const GridField& b) {
  return (a.values - b.values).norm() / b.values.norm();
}

}  // namespace

TEST_CASE("grid helpers: frequencies, alignment, tail mass") {
  GridSpec s = GridSpec::square(8.0, 16, BoundaryRule::periodic);
  CHECK(s.h_t() == 1.0);
  CHECK(s.t_of(0) == -8.0);
  CHECK(s.t_of(8) == 0.0);
  CHECK_THAT(s.tau_of(1), WithinAbs(M_PI / 8.0, 1e-15));
  CHECK_THAT(s.tau_of(15), WithinAbs(-M_PI / 8.0, 1e-15));
  CHECK(s.power_of_two_counts());
  GridSpec bad = GridSpec::square(8.0, 12, BoundaryRule::periodic);
  CHECK_THROWS_AS(bad.validate_fourier(), std::invalid_argument);

  // A tight Gaussian is interior-supported; a fat one is not.
  GridSpec fine = GridSpec::square(8.0, 128, BoundaryRule::periodic);
  CHECK(outer_tail_fraction(gaussian_field(fine, 0.8)) < 1e-10);
  CHECK(outer_tail_fraction(gaussian_field(fine, 4.0)) > 1e-3);
}

TEST_CASE("spectral derivatives match closed forms") {
  GridSpec s = GridSpec::square(12.0, 256, BoundaryRule::periodic);
  GridField u = gaussian_field(s, 1.0);
  GridField dt = spectral_derivative(u, 1, 0);
  GridField dxx = spectral_derivative(u, 0, 2);
  GridField dt_exact = sample_field(s, [](double t, double x) {
    return std::complex<double>(-t * std::exp(-0.5 * (t * t + x * x)), 0.0);
  });
  GridField dxx_exact = sample_field(s, [](double t, double x) {
    return std::complex<double>((x * x - 1.0) *
                                    std::exp(-0.5 * (t * t + x * x)),
                                0.0);
  });
  CHECK(rel_l2(dt, dt_exact) < 1e-10);
  CHECK(rel_l2(dxx, dxx_exact) < 1e-10);
}

TEST_CASE("free resolvent inverts the discrete symbol exactly") {
  GridSpec s = GridSpec::square(16.0, 256, BoundaryRule::periodic);
  const std::complex<double> lambda(1.0, 1.0);

  // Apply then invert: recovers the input field.
  GridField phi = gaussian_poly(s);
  GridField f = apply_free_operator(phi, lambda);
  GridField back = free_resolvent(f, lambda);
  CHECK(rel_l2(back, phi) < 1e-10);

  // Invert then apply: residual at roundoff scale.
  GridField g = gaussian_field(s, 1.4);
  GridField u = free_resolvent(g, lambda);
  GridField res = apply_free_operator(u, lambda);
  CHECK(rel_l2(res, g) < 1e-12);
}

TEST_CASE("free resolvent norm bound from the imaginary shift") {
  GridSpec s = GridSpec::square(16.0, 256, BoundaryRule::periodic);
  GridField f = gaussian_field(s, 1.2);
  const std::complex<double> lams[] = {{0, 1}, {0, -1}, {0, 0.5},
                                       {0, -0.5}, {1, 1}, {1, -1}};
  for (const auto& lam : lams) {
    GridField u = free_resolvent(f, lam);
    CHECK(u.norm2() <= f.norm2() / std::abs(lam.imag()) + 1e-12);
  }
  CHECK_THROWS_AS(free_resolvent(f, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(free_resolvent_classical(f, {1.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("classical formula agrees under the shift translation") {
  // u = -F^{-1}[F f / (tau^2 - xi^2 + lambda_B)] with lambda_B = -lambda is
  // the same inverse as the standard convention (P + lambda) u = f.
  GridSpec s = GridSpec::square(16.0, 128, BoundaryRule::periodic);
  GridField f = gaussian_field(s, 1.0);
  const std::complex<double> lambda(0.3, -0.8);
  GridField a = free_resolvent(f, lambda);
  GridField b = free_resolvent_classical(f, -lambda);
  CHECK(rel_l2(a, b) < 1e-13);
}

TEST_CASE("weighted seminorm oracles") {
  GridSpec s = GridSpec::square(12.0, 256, BoundaryRule::periodic);
  GridField u = sample_field(s, [](double t, double x) {
    return std::complex<double>(std::exp(-(t * t + x * x)), 0.0);
  });

  // sup (1+|z|^2) e^{-|z|^2}: the function (1+s)e^{-s} of s = |z|^2 is
  // decreasing, so the sup sits at the origin with value exactly 1.
  CHECK(weighted_seminorm(u, 2.0, 0, 0) == 1.0);
  CHECK(weighted_seminorm(u, 0.0, 0, 0) == 1.0);

  // Monotone in the weight exponent.
  CHECK(weighted_seminorm(u, 4.0, 1, 0) >= weighted_seminorm(u, 2.0, 1, 0));

  GridField zero(s);
  CHECK(weighted_seminorm(zero, 4.0, 2, 0) == 0.0);

  CHECK_THROWS_AS(weighted_seminorm(u, 8.0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(weighted_seminorm(u, 2.0, 2, 2), std::invalid_argument);
}

TEST_CASE("resolvent seminorms stabilize when the box doubles") {
  const std::complex<double> lambda(0.0, 1.0);
  GridSpec small = GridSpec::square(20.0, 256, BoundaryRule::periodic);
  GridSpec big = GridSpec::square(40.0, 512, BoundaryRule::periodic);
  GridField f1 = gaussian_field(small, 2.0);
  GridField f2 = gaussian_field(big, 2.0);
  REQUIRE(outer_tail_fraction(f1) < 1e-10);
  GridField u1 = free_resolvent(f1, lambda);
  GridField u2 = free_resolvent(f2, lambda);
  SeminormTable t1 = seminorm_table(u1);
  SeminormTable t2 = seminorm_table(u2);
  CHECK(t1.max_rel_change(t2) < 0.05);
  // The battery covers N in {0,2,4} and |alpha| <= 2.
  CHECK(t1.entries.size() == 18);
}
