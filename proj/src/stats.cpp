#include "kbrw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "kbrw/error.hpp"

namespace kbrw {

double ComplexEstimate::se_abs() const noexcept { return std::hypot(se_re, se_im); }

double Moments::mean() const noexcept {
  return n_ == 0 ? 0.0 : shift_ + sum_ / static_cast<double>(n_);
}

double Moments::variance() const noexcept {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double m = sum_ / n;
  return std::max(0.0, (sum_sq_ - n * m * m) / (n - 1.0));
}

void Moments::merge(const Moments& other) noexcept {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  // Re-express the other's sums about this shift.
  const double d = other.shift_ - shift_;
  const double n2 = static_cast<double>(other.n_);
  sum_sq_ += other.sum_sq_ + 2.0 * d * other.sum_ + n2 * d * d;
  sum_ += other.sum_ + n2 * d;
  n_ += other.n_;
}

Estimate Moments::estimate() const noexcept {
  return {mean(), n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_)), n_};
}

ComplexEstimate ComplexMoments::estimate() const noexcept {
  const auto a = re.estimate();
  const auto b = im.estimate();
  return {{a.mean, b.mean}, a.std_error, b.std_error, a.n_samples};
}

namespace {

// Two-pass moments: deterministic for a given order and free of the
// cancellation in sum-of-squares when the variance is tiny.
struct TwoPass {
  double mean = 0.0;
  double var = 0.0;
};

TwoPass two_pass(std::span<const double> xs) {
  TwoPass out;
  if (xs.empty()) return out;
  // Summing deviations from the first value keeps a constant sample's mean exact.
  const double n = static_cast<double>(xs.size());
  const double x0 = xs.front();
  double dev = 0.0;
  for (double x : xs) dev += x - x0;
  out.mean = x0 + dev / n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.var = ss / (n - 1.0);
  return out;
}

}  // namespace

Estimate estimate_mean(std::span<const double> xs) {
  const auto m = two_pass(xs);
  const double n = static_cast<double>(xs.size());
  return {m.mean, xs.empty() ? 0.0 : std::sqrt(m.var / n), xs.size()};
}

ComplexEstimate estimate_mean(std::span<const std::complex<double>> zs) {
  std::vector<double> re(zs.size());
  std::vector<double> im(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    re[i] = zs[i].real();
    im[i] = zs[i].imag();
  }
  const auto a = estimate_mean(re);
  const auto b = estimate_mean(im);
  return {{a.mean, b.mean}, a.std_error, b.std_error, zs.size()};
}

Estimate estimate_variance(std::span<const double> xs) {
  require(xs.size() >= 4, "estimate_variance needs at least four samples");
  const auto m = two_pass(xs);
  const double n = static_cast<double>(xs.size());
  double m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m.mean) * (x - m.mean);
    m4 += d * d;
  }
  m4 /= n;
  const double var_of_var = std::max(0.0, m4 - m.var * m.var) / n;
  return {m.var, std::sqrt(var_of_var), xs.size()};
}

bool agree(const Estimate& a, const Estimate& b, double z, double atol) {
  return std::abs(a.mean - b.mean) <= z * std::hypot(a.std_error, b.std_error) + atol;
}

bool agree(const ComplexEstimate& a, const ComplexEstimate& b, double z, double atol) {
  return std::abs(a.mean - b.mean) <= z * std::hypot(a.se_abs(), b.se_abs()) + atol;
}

double kolmogorov_pvalue(double d, double effective_n) {
  const double sqrt_n = std::sqrt(effective_n);
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form converges fast for small arguments.
    const double y = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    double sum = 0.0;
    for (int k = 1; k <= 7; ++k) sum += std::pow(y, (2 * k - 1) * (2 * k - 1));
    return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
  require(!xs.empty(), "ks_one_sample needs samples");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_pvalue(d, n), 0};
}

TestResult ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
  require(!xs.empty() && !ys.empty(), "ks_two_sample needs samples");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double n = static_cast<double>(xs.size());
  const double m = static_cast<double>(ys.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double v = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= v) ++i;
    while (j < ys.size() && ys[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return {d, kolmogorov_pvalue(d, n * m / (n + m)), 0};
}

double chi_square_sf(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

TestResult chi_square_gof(std::span<const std::size_t> counts,
                          const std::function<double(std::size_t)>& pmf, double min_expected) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  require(total > 0, "chi_square_gof needs samples");

  std::vector<double> observed;
  std::vector<double> expected;
  double obs_acc = 0.0;
  double exp_acc = 0.0;
  double mass_used = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double p = pmf(k);
    obs_acc += static_cast<double>(counts[k]);
    exp_acc += total * p;
    mass_used += p;
    if (exp_acc >= min_expected) {
      observed.push_back(obs_acc);
      expected.push_back(exp_acc);
      obs_acc = 0.0;
      exp_acc = 0.0;
    }
  }
  // Everything beyond the last observed value belongs to the tail bin.
  exp_acc += total * std::max(0.0, 1.0 - mass_used);
  if (exp_acc > 0.0 || obs_acc > 0.0) {
    if (exp_acc < min_expected && !observed.empty()) {
      observed.back() += obs_acc;
      expected.back() += exp_acc;
    } else {
      observed.push_back(obs_acc);
      expected.push_back(exp_acc);
    }
  }

  double stat = 0.0;
  for (std::size_t b = 0; b < observed.size(); ++b) {
    if (expected[b] <= 0.0) {
      if (observed[b] > 0.0) stat = std::numeric_limits<double>::infinity();
      continue;
    }
    const double diff = observed[b] - expected[b];
    stat += diff * diff / expected[b];
  }
  const std::size_t dof = observed.empty() ? 0 : observed.size() - 1;
  return {stat, chi_square_sf(stat, static_cast<double>(dof)), dof};
}

TestResult chi_square_two_sample(std::span<const std::size_t> xs, std::span<const std::size_t> ys,
                                 double min_expected) {
  require(!xs.empty() && !ys.empty(), "chi_square_two_sample needs samples");
  std::size_t top = 0;
  for (auto v : xs) top = std::max(top, v);
  for (auto v : ys) top = std::max(top, v);
  std::vector<double> cx(top + 1, 0.0);
  std::vector<double> cy(top + 1, 0.0);
  for (auto v : xs) cx[v] += 1.0;
  for (auto v : ys) cy[v] += 1.0;

  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  const double n = nx + ny;
  const double smaller_share = std::min(nx, ny) / n;

  std::vector<double> bx;
  std::vector<double> by;
  double ax = 0.0;
  double ay = 0.0;
  for (std::size_t k = 0; k <= top; ++k) {
    ax += cx[k];
    ay += cy[k];
    if ((ax + ay) * smaller_share >= min_expected) {
      bx.push_back(ax);
      by.push_back(ay);
      ax = ay = 0.0;
    }
  }
  if (ax + ay > 0.0) {
    if (bx.empty()) {
      bx.push_back(ax);
      by.push_back(ay);
    } else {
      bx.back() += ax;
      by.back() += ay;
    }
  }

  double stat = 0.0;
  for (std::size_t b = 0; b < bx.size(); ++b) {
    const double col = bx[b] + by[b];
    const double ex = col * nx / n;
    const double ey = col * ny / n;
    stat += (bx[b] - ex) * (bx[b] - ex) / ex + (by[b] - ey) * (by[b] - ey) / ey;
  }
  const std::size_t dof = bx.empty() ? 0 : bx.size() - 1;
  return {stat, chi_square_sf(stat, static_cast<double>(dof)), dof};
}

namespace {

double energy_statistic(const std::vector<double>& dist, const std::vector<double>& tail_sums,
                        std::size_t total, const std::vector<double>& in_x, std::size_t n,
                        std::size_t m) {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double* row = dist.data() + i * total;
    double to_x = 0.0;
    for (std::size_t j = i + 1; j < total; ++j) to_x += in_x[j] * row[j];
    const double to_y = tail_sums[i] - to_x;
    if (in_x[i] != 0.0) {
      sxx += to_x;
      sxy += to_y;
    } else {
      sxy += to_x;
      syy += to_y;
    }
  }
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  const double e = 2.0 * sxy / (dn * dm) - 2.0 * sxx / (dn * dn) - 2.0 * syy / (dm * dm);
  return dn * dm / (dn + dm) * e;
}

}  // namespace

TestResult energy_distance_test(std::span<const double> xs, std::span<const double> ys,
                                std::size_t dim, std::size_t permutations, Key key, Exec exec) {
  require(dim > 0 && xs.size() % dim == 0 && ys.size() % dim == 0, "energy test: ragged input");
  const std::size_t n = xs.size() / dim;
  const std::size_t m = ys.size() / dim;
  require(n >= 2 && m >= 2, "energy test needs at least two points per sample");
  const std::size_t total = n + m;

  std::vector<double> pts(total * dim);
  std::copy(xs.begin(), xs.end(), pts.begin());
  std::copy(ys.begin(), ys.end(), pts.begin() + static_cast<std::ptrdiff_t>(xs.size()));

  std::vector<double> dist(total * total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = pts[i * dim + d] - pts[j * dim + d];
        s += diff * diff;
      }
      dist[i * total + j] = dist[j * total + i] = std::sqrt(s);
    }
  }

  // Row sums over j > i; the split into x and y parts is all a relabeling changes.
  std::vector<double> tail_sums(total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) tail_sums[i] += dist[i * total + j];
  }

  std::vector<double> labels(total, 0.0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
  const double observed = energy_statistic(dist, tail_sums, total, labels, n, m);

  const auto perm_stats = map_replicas(
      permutations,
      [&](std::size_t p) {
        auto rng = key.child(p).stream();
        std::vector<double> shuffled = labels;
        for (std::size_t i = total - 1; i > 0; --i) {
          const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
          std::swap(shuffled[i], shuffled[j]);
        }
        return energy_statistic(dist, tail_sums, total, shuffled, n, m);
      },
      exec);

  const double slack = 1e-12 * (1.0 + std::abs(observed));
  const auto exceed = std::count_if(perm_stats.begin(), perm_stats.end(),
                                    [&](double s) { return s >= observed - slack; });
  const double p = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(permutations));
  return {observed, p, 0};
}

}  // namespace kbrw
