#pragma once

// Characteristic functions evaluated at Fourier arguments r o e3, and
// velocity laws that pair one with a sampler.

#include <complex>
#include <functional>
#include <string>

#include "kbrw/group.hpp"
#include "kbrw/rng.hpp"

namespace kbrw {

using Complex = std::complex<double>;

struct CharFn {
  std::function<Complex(double r, const Orthogonal3& o)> eval;
  std::string description;

  Complex operator()(double r, const Orthogonal3& o) const { return eval(r, o); }
  Complex operator()(const FourierPoint& p) const { return eval(p.r, p.o); }
};

CharFn constant_one();

/// exp(-scale^2 r^2 / 2), the centered Gaussian with covariance scale^2 I.
CharFn gaussian_cf(double scale);

/// exp(-sigma r^alpha), the isotropic alpha-stable law.
CharFn stable_cf(double alpha, double sigma);

/// exp(i r <o e3, mean> - scale^2 r^2 / 2).
CharFn shifted_gaussian_cf(const Vector3& mean, double scale);

struct VelocityLaw {
  CharFn char_fn;
  std::function<Vector3(Stream&)> sampler;  // empty when the law cannot be sampled

  bool has_sampler() const noexcept { return static_cast<bool>(sampler); }
};

VelocityLaw gaussian_law(double scale);
VelocityLaw shifted_gaussian_law(const Vector3& mean, double scale);

/// Isotropic stable vector with characteristic function exp(-sigma |xi|^alpha),
/// alpha in (0, 2], through X = sigma^(1/alpha) sqrt(2A) G with A positive
/// (alpha/2)-stable and G standard normal.
VelocityLaw isotropic_stable_law(double alpha, double sigma);

/// Positive stable variable with Laplace transform exp(-s^a), a in (0, 1]
/// (Kanter's representation; a = 1 is the point mass at 1).
double positive_stable(double a, Stream& rng) noexcept;

Vector3 standard_normal3(Stream& rng) noexcept;

}  // namespace kbrw
