#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "kbrw/kinetic.hpp"
#include "oracles.hpp"

using namespace kbrw;

namespace {

Key suite(const char* label) { return Key{fixtures::kSuiteSeed}.child(label); }

std::vector<FourierPoint> radial(std::initializer_list<double> rs, const Orthogonal3& o = {}) {
  std::vector<FourierPoint> out;
  for (double r : rs) out.push_back({r, o});
  return out;
}

std::vector<FourierPoint> random_points(std::size_t n, Key key) {
  auto rng = key.stream();
  std::vector<FourierPoint> out(n);
  for (auto& p : out) p = {0.1 * std::pow(40.0, rng.uniform()), haar_rotation(rng)};
  return out;
}

double gaussian_datum(double r) { return std::exp(-0.5 * r * r); }

}  // namespace

TEST_CASE("q_plus: constant, r = 0 and the stable fixed point") {
  const auto iu = independent_uniform_kernel(1.0);
  const FourierPoint p{1.3, planar_rotation(0.4)};
  const auto one = q_plus(constant_one(), iu, p, 1000, suite("q1"));
  CHECK(one.mean == Complex(1.0, 0.0));
  CHECK(one.se_abs() == 0.0);
  const auto zero = q_plus(gaussian_cf(1.0), iu, {0.0, {}}, 1000, suite("q0"));
  CHECK(zero.mean == Complex(1.0, 0.0));
  for (double alpha : {0.5, 1.0, 1.8}) {
    const auto s = q_plus(stable_cf(alpha, 0.7), dirichlet_scalar_kernel(alpha), p, 2000, suite("qs"));
    CHECK(s.mean.real() == doctest::Approx(std::exp(-0.7 * std::pow(1.3, alpha))).epsilon(1e-12));
    CHECK(s.se_abs() <= 1e-14);
  }
  const auto a = q_plus(gaussian_cf(1.0), iu, p, 5000, suite("qx"), Exec::serial);
  const auto b = q_plus(gaussian_cf(1.0), iu, p, 5000, suite("qx"), Exec::parallel);
  CHECK(a.mean == b.mean);
}

TEST_CASE("solve_time: t = 0, constant datum, stationary datum") {
  const auto iu = independent_uniform_kernel(1.0);
  const auto grid = default_grid();
  CHECK(grid.size() == 20);
  const auto phi = gaussian_cf(1.0);
  const auto at0 = solve_time(phi, iu, 0.0, grid, 50, 10, suite("t0"));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(at0[i].mean == phi(grid[i]));
    CHECK(at0[i].se_abs() == 0.0);
  }
  const auto ones = solve_time(constant_one(), iu, 2.0, grid, 200, 100000, suite("t1"));
  for (const auto& e : ones) CHECK(e.mean == Complex(1.0, 0.0));

  for (double alpha : {0.5, 1.5}) {
    const auto stable = stable_cf(alpha, 0.4);
    const auto est = solve_time(stable, dirichlet_scalar_kernel(alpha), 1.5, grid, 200, 100000, suite("ts"));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(est[i].mean.real() == doctest::Approx(stable(grid[i]).real()).epsilon(1e-12));
      CHECK(est[i].se_abs() <= 1e-13);
    }
  }
}

TEST_CASE("solve_time: modulus, origin, common random numbers, executors, cap") {
  const auto iu = isotropic_kernel(independent_uniform_kernel(1.0));
  auto pts = random_points(6, suite("pts"));
  pts.push_back({0.0, {}});
  const auto phi = shifted_gaussian_cf({0.3, -0.2, 0.5}, 0.8);
  const auto full = solve_time(phi, iu, 1.0, pts, 3000, 100000, suite("crn"));
  for (const auto& e : full) CHECK(std::abs(e.mean) <= 1.0);
  CHECK(full.back().mean == Complex(1.0, 0.0));

  const std::vector<FourierPoint> prefix(pts.begin(), pts.begin() + 3);
  const auto part = solve_time(phi, iu, 1.0, prefix, 3000, 100000, suite("crn"));
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    CHECK(part[i].mean == full[i].mean);
    CHECK(part[i].se_re == full[i].se_re);
  }

  const auto serial = solve_time(phi, iu, 1.0, pts, 1000, 100000, suite("exec"), Exec::serial);
  const auto parallel = solve_time(phi, iu, 1.0, pts, 1000, 100000, suite("exec"), Exec::parallel);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(serial[i].mean == parallel[i].mean);

  try {
    solve_time(phi, iu, 10.0, pts, 100, 20, suite("cap"));
    FAIL("expected CapExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapExceeded);
  }
}

TEST_CASE("solve_time matches the RK4 oracle on the degenerate kernel") {
  const auto model = degenerate_kernel(1.0);
  const auto pts = radial({0.25, 0.5, 1.0, 2.0, 4.0});
  for (double t : {0.5, 1.0, 2.0}) {
    const auto est = solve_time(gaussian_cf(1.0), model, t, pts, 20000, 100000, suite("rk4"));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double truth = oracle::degenerate_solution(gaussian_datum, 0.5, t, pts[i].r);
      CHECK_MESSAGE(std::abs(est[i].mean.real() - truth) <= 3.0 * est[i].se_abs() + 1e-12,
                    "t " << t << " r " << pts[i].r);
      CHECK(est[i].mean.imag() == 0.0);
    }
  }
}

TEST_CASE("conjugate symmetry in exact mode") {
  // identity rotations: turning o by a half turn about e1 sends every argument to its negative
  const auto model = degenerate_kernel(1.0);
  const auto phi = shifted_gaussian_cf({0.2, 0.4, -0.7}, 0.6);
  const Orthogonal3 o = planar_rotation(0.9);
  const Orthogonal3 flip = o * axis_rotation({1, 0, 0}, std::numbers::pi);
  const std::vector<FourierPoint> pts{{1.1, o}, {1.1, flip}};
  const auto est = solve_time(phi, model, 1.0, pts, 500, 100000, suite("conj"));
  CHECK(std::abs(est[0].mean - std::conj(est[1].mean)) <= 1e-14);
}

TEST_CASE("ode residual: exact cases") {
  const auto pts = radial({0.5, 1.0, 2.0});
  const auto stat = ode_residual(stable_cf(1.5, 0.5), degenerate_kernel(1.5), 1.0, 0.05, pts, 200, 100000,
                                 suite("ode-stat"));
  CHECK(stat.max_abs_gap <= 1e-12);
  CHECK(stat.pass);
  const auto one = ode_residual(constant_one(), independent_uniform_kernel(1.0), 0.5, 0.05, pts, 200, 100000,
                                suite("ode-one"));
  CHECK(one.max_abs_gap == 0.0);
  for (const auto& l : one.lhs) CHECK(l.mean == Complex(0.0, 0.0));
  CHECK(one.pass);
  CHECK_THROWS_AS(ode_residual(constant_one(), degenerate_kernel(1.0), 0.01, 0.05, pts, 10, 100, suite("x")), Error);
}

TEST_CASE("ode allowance constant covers the RK4 third derivative") {
  double worst = 0.0;
  for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    worst = std::max(worst, oracle::degenerate_third_derivative(gaussian_datum, 0.5, r, 0.45, 0.55));
  }
  CHECK(worst == doctest::Approx(fixtures::kOdeThirdDerivative).epsilon(1e-3));
  CHECK(kOdeAllowanceC >= worst / 6.0);
}

TEST_CASE("ode residual: gaussian datum, degenerate and dirichlet kernels") {
  const auto pts = radial({0.5, 1.0, 2.0});
  OdeOptions opt;
  opt.allowance_c = kOdeAllowanceC;
  const auto det = ode_residual(gaussian_cf(1.0), degenerate_kernel(1.0), 0.5, 0.05, pts, 20000, 100000,
                                suite("ode-det"), opt);
  CHECK(det.pass);
  const auto dir = ode_residual(gaussian_cf(1.0), dirichlet_scalar_kernel(1.0), 0.5, 0.05, pts, 20000, 100000,
                                suite("ode-dir"), opt);
  CHECK(dir.pass);
  for (double a : dir.allowance) CHECK(a == doctest::Approx(kOdeAllowanceC * 0.05 * 0.05));
}

TEST_CASE("semigroup: h = 0, t = 0, and nested Monte Carlo") {
  const auto iu = independent_uniform_kernel(1.0);
  const auto pts = radial({0.5, 1.0, 2.0}, planar_rotation(0.2));
  const auto h0 = semigroup_check(gaussian_cf(1.0), iu, 0.4, 0.0, pts, 300, 4, 100000, suite("sg-h0"));
  CHECK(h0.pass);
  const auto t0 = semigroup_check(gaussian_cf(1.0), iu, 0.0, 0.4, pts, 300, 1, 100000, suite("sg-t0"));
  CHECK(t0.pass);
  // the nested side degenerates to a plain solve at time h on the outer trees
  const auto plain = solve_time(gaussian_cf(1.0), iu, 0.4, pts, 300, 100000, suite("sg-t0").child("nested"));
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(t0.rhs[i].mean - plain[i].mean) <= 1e-15);
  const auto main = semigroup_check(gaussian_cf(1.0), iu, 0.4, 0.4, pts, 4000, 8, 100000, suite("sg"));
  CHECK(main.pass);
  const auto serial = semigroup_check(gaussian_cf(1.0), iu, 0.4, 0.4, pts, 200, 4, 100000, suite("sg-x"), 3.0, 0.0,
                                      Exec::serial);
  const auto parallel = semigroup_check(gaussian_cf(1.0), iu, 0.4, 0.4, pts, 200, 4, 100000, suite("sg-x"), 3.0,
                                        0.0, Exec::parallel);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(serial.rhs[i].mean == parallel.rhs[i].mean);
}

TEST_CASE("matrix embedding: single node, origin, and n = 6 over random points") {
  const auto law = gaussian_law(1.0);
  const auto model = isotropic_kernel(independent_uniform_kernel(1.0));
  auto rng = suite("embed").stream();

  const auto root = simulate_generation(model, 0, suite("embed-root"));
  const FourierPoint p{1.7, haar_rotation(rng)};
  auto copy = rng;
  const auto single = embedded_matrix_cf(law, nodes_of(root), p, rng);
  const Vector3 x = law.sampler(copy);
  const Complex direct = std::exp(Complex(0.0, p.r * dot(p.o.axis(), x)));
  CHECK(std::abs(single.matrix_form - direct) <= 1e-12);
  CHECK(std::abs(single.product_form - direct) <= 1e-12);

  const auto slice = simulate_generation(model, 6, suite("embed-slice"));
  const auto origin = embedded_matrix_cf(law, nodes_of(slice), {0.0, p.o}, rng);
  CHECK(origin.matrix_form == Complex(1.0, 0.0));
  CHECK(origin.product_form == Complex(1.0, 0.0));

  double worst = 0.0;
  for (const auto& q : random_points(1000, suite("embed-points"))) {
    const auto e = embedded_matrix_cf(law, nodes_of(slice), q, rng);
    worst = std::max(worst, std::abs(e.matrix_form - e.product_form));
  }
  CHECK(worst <= 1e-10);

  const VelocityLaw blind{stable_cf(1.5, 1.0), {}};
  try {
    embedded_matrix_cf(blind, nodes_of(slice), p, rng);
    FAIL("expected MissingSampler");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSampler);
  }
}

TEST_CASE("vectorized Y_n: shared and independent draws") {
  const auto law = gaussian_law(1.0);
  const auto model = isotropic_kernel(independent_uniform_kernel(1.0));
  const auto slice = simulate_generation(model, 4, suite("yn-slice"));
  const auto pts = random_points(10, suite("yn-points"));

  const auto shared = vectorized_Yn_check(law, nodes_of(slice), pts, 16, suite("yn-shared"), DrawMode::shared);
  CHECK(shared.max_sample_gap <= 1e-10);
  CHECK(shared.pass);

  const auto indep =
      vectorized_Yn_check(law, nodes_of(slice), pts, 20000, suite("yn-indep"), DrawMode::independent);
  CHECK(indep.pass);
  // the closed-form side is the product of Gaussian factors exp(-r^2 l^2 / 2)
  double sum_l2 = 0.0;
  for (double l : slice.scales) sum_l2 += l * l;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(indep.rhs[i].mean.real() == doctest::Approx(std::exp(-0.5 * pts[i].r * pts[i].r * sum_l2)).epsilon(1e-12));
  }

  const auto origin =
      vectorized_Yn_check(law, nodes_of(slice), radial({0.0}), 100, suite("yn-0"), DrawMode::independent);
  CHECK(origin.lhs[0].mean == Complex(1.0, 0.0));
  CHECK(origin.rhs[0].mean == Complex(1.0, 0.0));

  const VelocityLaw blind{gaussian_cf(1.0), {}};
  CHECK_THROWS_AS(vectorized_Yn_check(blind, nodes_of(slice), pts, 10, suite("yn-x"), DrawMode::shared), Error);
}

TEST_CASE("sampler characteristic functions") {
  const auto grid = default_grid();
  for (const auto& law : {gaussian_law(1.0), shifted_gaussian_law({0.5, 0.0, -1.0}, 0.7),
                          isotropic_stable_law(1.5, 1.0), isotropic_stable_law(0.5, 0.3)}) {
    const auto r = sampler_cf_check(law, grid, 100000, suite("cf"));
    CHECK_MESSAGE(r.pass, law.char_fn.description);
    CHECK(r.max_abs_gap <= 4.0 / std::sqrt(1e5));
  }
  const VelocityLaw wrong{gaussian_cf(2.0), gaussian_law(1.0).sampler};
  CHECK_FALSE(sampler_cf_check(wrong, grid, 100000, suite("cf-wrong")).pass);

  const auto a = sampler_cf_check(gaussian_law(1.0), grid, 10000, suite("cf-x"), 4.0, Exec::serial);
  const auto b = sampler_cf_check(gaussian_law(1.0), grid, 10000, suite("cf-x"), 4.0, Exec::parallel);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(a.lhs[i].mean == b.lhs[i].mean);

  const VelocityLaw blind{gaussian_cf(1.0), {}};
  CHECK_THROWS_AS(sampler_cf_check(blind, grid, 100, suite("cf-blind")), Error);
}
