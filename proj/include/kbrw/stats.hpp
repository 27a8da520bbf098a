#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kbrw/rng.hpp"
#include "kbrw/parallel.hpp"

namespace kbrw {

/// Monte-Carlo estimate of a real quantity.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Complex estimate; standard errors are kept per component.
struct ComplexEstimate {
  std::complex<double> mean{};
  double se_re = 0.0;
  double se_im = 0.0;
  std::size_t n_samples = 0;

  /// Root of the summed component variances, the scale for |gap| tests.
  double se_abs() const noexcept;
};

/// Streaming first and second moments about the first value seen, so a
/// constant stream has an exact mean and zero variance.
class Moments {
 public:
  void add(double x) noexcept {
    if (n_ == 0) shift_ = x;
    ++n_;
    const double d = x - shift_;
    sum_ += d;
    sum_sq_ += d * d;
  }
  void merge(const Moments& other) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept;
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const noexcept;
  Estimate estimate() const noexcept;

 private:
  std::size_t n_ = 0;
  double shift_ = 0.0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

/// Real and imaginary parts accumulated separately.
struct ComplexMoments {
  Moments re;
  Moments im;

  void add(std::complex<double> z) noexcept {
    re.add(z.real());
    im.add(z.imag());
  }
  void merge(const ComplexMoments& other) noexcept {
    re.merge(other.re);
    im.merge(other.im);
  }
  ComplexEstimate estimate() const noexcept;
};

Estimate estimate_mean(std::span<const double> xs);
ComplexEstimate estimate_mean(std::span<const std::complex<double>> zs);

/// Sample variance with a delta-method standard error from the fourth
/// central moment.
Estimate estimate_variance(std::span<const double> xs);

/// |a - b| <= z * sqrt(se_a^2 + se_b^2) + atol
bool agree(const Estimate& a, const Estimate& b, double z, double atol = 0.0);
bool agree(const ComplexEstimate& a, const ComplexEstimate& b, double z, double atol = 0.0);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// correction.
double kolmogorov_pvalue(double d, double effective_n);

TestResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf);
TestResult ks_two_sample(std::vector<double> xs, std::vector<double> ys);

double chi_square_sf(double statistic, double dof);

/// Goodness of fit of a histogram (counts[k] observations equal to k) against
/// a pmf on {0, 1, ...}; bins with
/// expected count below min_expected are pooled into the tail.
TestResult chi_square_gof(std::span<const std::size_t> counts,
                          const std::function<double(std::size_t)>& pmf,
                          double min_expected = 5.0);

/// Two-sample homogeneity test of integer-valued samples (2 x K contingency),
/// pooling sparse upper categories.
TestResult chi_square_two_sample(std::span<const std::size_t> xs,
                                 std::span<const std::size_t> ys, double min_expected = 5.0);

/// Energy-distance two-sample statistic n m / (n + m) * E_{n,m} with a
/// permutation p-value. Points are rows of length `dim`.
TestResult energy_distance_test(std::span<const double> xs, std::span<const double> ys,
                                std::size_t dim, std::size_t permutations, Key key,
                                Exec exec = Exec::parallel);

}  // namespace kbrw
