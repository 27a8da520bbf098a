#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "kbrw/error.hpp"
#include "kbrw/group.hpp"
#include "kbrw/stats.hpp"

using namespace kbrw;

namespace {

Key suite(const char* label) { return Key{fixtures::kSuiteSeed}.child(label); }

Similarity random_similarity(Stream& rng) { return {std::exp(rng.normal()), haar_rotation(rng)}; }

double gap(const Similarity& a, const Similarity& b) {
  return std::max(std::abs(a.scale - b.scale), max_abs_diff(a.rotation, b.rotation));
}

}  // namespace

TEST_CASE("compose: identity, scalars, inverses") {
  auto rng = suite("compose").stream();
  const Similarity g = random_similarity(rng);
  const Similarity e{};
  CHECK(gap(compose(e, g), g) == 0.0);
  const auto six = compose({2.0, Orthogonal3::identity()}, {3.0, Orthogonal3::identity()});
  CHECK(six.scale == 6.0);
  CHECK(six.rotation == Orthogonal3::identity());
  CHECK(gap(compose(g, g.inverse()), e) <= 1e-12);
}

TEST_CASE("compose is associative over random triples") {
  auto rng = suite("assoc").stream();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_similarity(rng), b = random_similarity(rng), c = random_similarity(rng);
    const auto l = compose(compose(a, b), c), r = compose(a, compose(b, c));
    worst = std::max({worst, std::abs(l.scale / r.scale - 1.0), max_abs_diff(l.rotation, r.rotation)});
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("haar rotations are proper, orthogonal, and uniform on the sphere") {
  auto rng = suite("haar").stream();
  const std::size_t n = 100000;
  Vector3 sum{};
  std::vector<double> z(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = haar_rotation(rng);
    worst = std::max(worst, o.residual());
    CHECK(o.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    const auto a = o.axis();
    for (int k = 0; k < 3; ++k) sum[k] += a[k];
    z[i] = a[2];
  }
  CHECK(worst <= 1e-12);
  CHECK(norm(scaled(sum, 1.0 / n)) <= 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(ks_one_sample(z, [](double x) { return (x + 1.0) / 2.0; }).p_value > 0.01);
}

TEST_CASE("haar rotations: a second column is uniform given the axis") {
  // The in-plane angle of o e1 around o e3 must be uniform, not just the axis.
  auto rng = suite("haar-angle").stream();
  std::vector<double> angles(50000);
  for (auto& a : angles) {
    const auto o = haar_rotation(rng);
    const auto f = frame_from_direction(o.axis()).o;
    const auto c1 = o.column(0);
    a = std::atan2(dot(c1, f.column(1)), dot(c1, f.column(0)));
  }
  CHECK(ks_one_sample(angles, [](double x) { return (x + std::numbers::pi) / (2 * std::numbers::pi); }).p_value >
        0.01);
}

TEST_CASE("planar rotations") {
  CHECK(planar_rotation(0.0) == Orthogonal3::identity());
  const auto q = planar_rotation(std::numbers::pi / 2).apply({1, 0, 0});
  CHECK(std::abs(q[0]) <= 1e-15);
  CHECK(std::abs(q[1] - 1.0) <= 1e-15);
  CHECK(q[2] == 0.0);
  for (double a : {0.3, -1.2, 2.9}) {
    for (double b : {0.7, 4.0}) {
      CHECK(max_abs_diff(planar_rotation(a) * planar_rotation(b), planar_rotation(a + b)) <= 1e-12);
    }
    CHECK(planar_rotation(a).axis() == Vector3{0, 0, 1});
  }
}

TEST_CASE("frame_from_direction: examples") {
  const auto e3 = frame_from_direction({0, 0, 1});
  CHECK(e3.r == 1.0);
  CHECK(max_abs_diff(e3.o, Orthogonal3::identity()) <= 1e-15);
  const auto zero = frame_from_direction({0, 0, 0});
  CHECK(zero.r == 0.0);
  CHECK(zero.o == Orthogonal3::identity());
  const auto x = frame_from_direction({2, 0, 0});
  CHECK(x.r == 2.0);
  const auto a = x.o.axis();
  CHECK(std::abs(a[0] - 1.0) <= 1e-12);
  CHECK(std::abs(a[1]) <= 1e-12);
  CHECK(std::abs(a[2]) <= 1e-12);
  CHECK(x.o.residual() <= 1e-12);
  CHECK(x.o.determinant() == doctest::Approx(1.0));
}

TEST_CASE("frame_from_direction: direction only, deterministic, stable near the antipode") {
  auto rng = suite("frames").stream();
  for (int i = 0; i < 2000; ++i) {
    Vector3 xi{rng.normal(), rng.normal(), rng.normal()};
    if (i % 100 == 0) xi = {1e-9 * rng.normal(), 1e-9 * rng.normal(), -1.0};  // next to -e3
    const auto p = frame_from_direction(xi);
    CHECK(p.r == doctest::Approx(norm(xi)).epsilon(1e-15));
    const auto d = scaled(xi, 1.0 / p.r);
    const auto a = p.o.axis();
    CHECK(std::max({std::abs(a[0] - d[0]), std::abs(a[1] - d[1]), std::abs(a[2] - d[2])}) <= 1e-12);
    CHECK(p.o.residual() <= 1e-12);
    CHECK(p.o.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    const double c = std::exp(3 * rng.normal());
    CHECK(max_abs_diff(frame_from_direction(scaled(xi, c)).o, p.o) <= 1e-12);
    CHECK(frame_from_direction(xi).o == p.o);
  }
}

TEST_CASE("from_entries validates orthogonality and accepts reflections") {
  CHECK_THROWS_AS(Orthogonal3::from_entries({1, 0, 0, 0, 1, 0, 0, 0, 1.001}), Error);
  const auto r = Orthogonal3::from_entries({1, 0, 0, 0, 1, 0, 0, 0, -1});
  CHECK(r.determinant() == -1.0);
  CHECK(r.residual() == 0.0);
}

TEST_CASE("long products keep the orthogonality residual small") {
  auto rng = suite("drift").stream();
  Orthogonal3 u{};
  for (int i = 0; i < 64; ++i) u = u * haar_rotation(rng);
  CHECK(u.residual() <= 1e-12);
}

TEST_CASE("axis_rotation fixes its axis and rotation_hash separates matrices") {
  const Vector3 axis{1, 2, 2};
  const auto o = axis_rotation(axis, 0.7);
  const auto v = o.apply(scaled(axis, 1.0 / 3.0));
  CHECK(std::abs(v[0] - 1.0 / 3.0) <= 1e-15);
  CHECK(std::abs(v[1] - 2.0 / 3.0) <= 1e-15);
  CHECK(o.residual() <= 1e-15);
  CHECK(rotation_hash(o) == rotation_hash(axis_rotation(axis, 0.7)));
  CHECK(rotation_hash(o) != rotation_hash(axis_rotation(axis, 0.7000001)));
  CHECK(rotation_hash(Orthogonal3::unchecked({-0.0, 1, 0, 1, 0, 0, 0, 0, 1})) ==
        rotation_hash(Orthogonal3::unchecked({0.0, 1, 0, 1, 0, 0, 0, 0, 1})));
}
