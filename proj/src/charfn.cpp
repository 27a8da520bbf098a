#include "kbrw/charfn.hpp"

#include <cmath>
#include <numbers>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CharFn constant_one() {
  return {[](double, const Orthogonal3&) { return Complex{1.0, 0.0}; }, "constant-one"};
}

CharFn gaussian_cf(double scale) {
  require(std::isfinite(scale) && scale > 0.0, "gaussian scale must be positive");
  const double half_var = 0.5 * scale * scale;
  return {[half_var](double r, const Orthogonal3&) { return Complex{std::exp(-half_var * r * r), 0.0}; },
          "gaussian(scale=" + fmt(scale) + ")"};
}

CharFn stable_cf(double alpha, double sigma) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 2.0, "stable index must lie in (0, 2]");
  require(std::isfinite(sigma) && sigma >= 0.0, "stable scale must be nonnegative");
  return {[alpha, sigma](double r, const Orthogonal3&) {
            return Complex{r == 0.0 ? 1.0 : std::exp(-sigma * std::pow(r, alpha)), 0.0};
          },
          "stable(alpha=" + fmt(alpha) + ",sigma=" + fmt(sigma) + ")"};
}

CharFn shifted_gaussian_cf(const Vector3& mean, double scale) {
  require(std::isfinite(scale) && scale > 0.0, "gaussian scale must be positive");
  const double half_var = 0.5 * scale * scale;
  return {[mean, half_var](double r, const Orthogonal3& o) {
            const double phase = r * dot(o.axis(), mean);
            return std::exp(Complex{-half_var * r * r, phase});
          },
          "shifted-gaussian(mean=[" + fmt(mean[0]) + "," + fmt(mean[1]) + "," + fmt(mean[2]) +
              "],scale=" + fmt(scale) + ")"};
}

Vector3 standard_normal3(Stream& rng) noexcept { return {rng.normal(), rng.normal(), rng.normal()}; }

VelocityLaw gaussian_law(double scale) {
  VelocityLaw law;
  law.char_fn = gaussian_cf(scale);
  law.sampler = [scale](Stream& rng) { return scaled(standard_normal3(rng), scale); };
  return law;
}

VelocityLaw shifted_gaussian_law(const Vector3& mean, double scale) {
  VelocityLaw law;
  law.char_fn = shifted_gaussian_cf(mean, scale);
  law.sampler = [mean, scale](Stream& rng) {
    const Vector3 g = standard_normal3(rng);
    return Vector3{mean[0] + scale * g[0], mean[1] + scale * g[1], mean[2] + scale * g[2]};
  };
  return law;
}

double positive_stable(double a, Stream& rng) noexcept {
  if (a >= 1.0) return 1.0;
  const double u = std::numbers::pi * rng.uniform_open();
  const double e = -std::log(rng.uniform_open());
  const double left = std::sin(a * u) / std::pow(std::sin(u), 1.0 / a);
  const double right = std::pow(std::sin((1.0 - a) * u) / e, (1.0 - a) / a);
  return left * right;
}

VelocityLaw isotropic_stable_law(double alpha, double sigma) {
  require(std::isfinite(sigma) && sigma > 0.0, "stable scale must be positive");
  VelocityLaw law;
  law.char_fn = stable_cf(alpha, sigma);
  const double factor = std::pow(sigma, 1.0 / alpha);
  law.sampler = [alpha, factor](Stream& rng) {
    const double a = positive_stable(0.5 * alpha, rng);
    return scaled(standard_normal3(rng), factor * std::sqrt(2.0 * a));
  };
  return law;
}

}  // namespace kbrw
