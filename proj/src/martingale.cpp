#include "kbrw/martingale.hpp"

#include <algorithm>
#include <cmath>

namespace kbrw {

double additive_W(const GenerationSlice& slice, double gamma, double m_gamma) {
  require(std::isfinite(m_gamma) && m_gamma > 0.0, "additive_W needs finite m(gamma) > 0");
  double sum = 0.0;
  for (double l : slice.scales) sum += power(l, gamma);
  return sum * std::pow(m_gamma, -slice.n);
}

MartingalePath additive_path(const KernelModel& model, double gamma, double m_gamma, int n, Key key) {
  require(std::isfinite(m_gamma) && m_gamma > 0.0, "additive_path needs finite m(gamma) > 0");
  MartingalePath path;
  path.gamma = gamma;
  path.key = key;
  path.values.assign(static_cast<std::size_t>(n) + 1, 0.0);
  walk_tree(model, n, key, false, [&](int level, std::uint64_t, double scale, const Orthogonal3&) {
    path.values[static_cast<std::size_t>(level)] += power(scale, gamma);
  });
  for (int k = 0; k <= n; ++k) path.values[static_cast<std::size_t>(k)] *= std::pow(m_gamma, -k);
  return path;
}

double sample_W_infinity(const KernelModel& model, double alpha, int n_big, Key key) {
  double sum = 0.0;
  walk_tree(model, n_big, key, false, [&](int level, std::uint64_t, double scale, const Orthogonal3&) {
    if (level == n_big) sum += power(scale, alpha);
  });
  return sum;
}

WProxyPair sample_W_proxy_pair(const KernelModel& model, double alpha, int n_big, Key key) {
  const int coarse_level = std::max(0, n_big - 2);
  WProxyPair out{0.0, 0.0};
  walk_tree(model, n_big, key, false, [&](int level, std::uint64_t, double scale, const Orthogonal3&) {
    if (level == n_big) out.fine += power(scale, alpha);
    if (level == coarse_level) out.coarse += power(scale, alpha);
  });
  return out;
}

std::vector<double> sample_W_infinity_many(const KernelModel& model, double alpha, int n_big,
                                           std::size_t count, Key key, Exec exec) {
  return map_replicas(
      count, [&](std::size_t i) { return sample_W_infinity(model, alpha, n_big, key.child(i)); }, exec);
}

BigginsReport biggins_conditions(const KernelModel& model, double gamma, std::size_t n_mc, Key key, double z,
                                 Exec exec) {
  require(n_mc >= 2, "biggins_conditions needs n_mc >= 2");
  require(std::isfinite(gamma) && gamma >= 0.0, "biggins_conditions needs gamma >= 0");

  struct Draw {
    double f;  // R1^g + R2^g
    double g;  // R1^g log R1 + R2^g log R2
  };
  const auto draws = map_replicas(
      n_mc,
      [&](std::size_t i) {
        auto rng = key.child(i).stream();
        const auto s = model.sample(rng);
        Draw d{power(s.r1, gamma) + power(s.r2, gamma), 0.0};
        for (double r : {s.r1, s.r2}) {
          if (r > 0.0) d.g += power(r, gamma) * std::log(r);
        }
        return d;
      },
      exec);

  const double n = static_cast<double>(n_mc);
  double mf = 0.0;
  double mg = 0.0;
  for (const auto& d : draws) {
    mf += d.f;
    mg += d.g;
  }
  mf /= n;
  mg /= n;
  double vff = 0.0;
  double vgg = 0.0;
  double vfg = 0.0;
  for (const auto& d : draws) {
    vff += (d.f - mf) * (d.f - mf);
    vgg += (d.g - mg) * (d.g - mg);
    vfg += (d.f - mf) * (d.g - mg);
  }
  vff /= n - 1.0;
  vgg /= n - 1.0;
  vfg /= n - 1.0;

  BigginsReport out;
  out.m = {mf, std::sqrt(vff / n), n_mc};
  out.dm = {mg, std::sqrt(vgg / n), n_mc};

  // Delta method for m log m - gamma m'; the gradient is (log m + 1, -gamma).
  const double a = std::log(mf) + 1.0;
  const double var = (a * a * vff + gamma * gamma * vgg - 2.0 * a * gamma * vfg) / n;
  out.drift_margin = {mf * std::log(mf) - gamma * mg, std::sqrt(std::max(0.0, var)), n_mc};
  out.drift_ok = out.drift_margin.mean - z * out.drift_margin.std_error > 0.0;

  std::vector<double> moment(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double w = draws[i].f / mf;
    moment[i] = w > 1.0 ? w * std::log(w) : 0.0;
  }
  out.moment_term = estimate_mean(moment);
  out.moment_ok = std::isfinite(out.moment_term.mean) && std::isfinite(out.moment_term.std_error);
  return out;
}

namespace {

// Running product in log space: sum of principal logs plus a zero flag.
struct LogProduct {
  Complex log_sum{0.0, 0.0};
  bool zero = false;
  std::size_t factors = 0;
  Complex single{1.0, 0.0};

  void multiply(Complex z) {
    ++factors;
    single = z;
    if (z == Complex{0.0, 0.0}) {
      zero = true;
      return;
    }
    log_sum += std::log(z);
  }
  Complex value() const {
    if (zero) return {0.0, 0.0};
    if (factors == 1) return single;
    return std::exp(log_sum);
  }
};

}  // namespace

Complex multiplicative_M(const GenerationSlice& slice, const CharFn& phi, double r, const Orthogonal3& o) {
  require(slice.has_rotations(), "multiplicative_M needs a slice with rotations");
  if (r == 0.0) return {1.0, 0.0};
  LogProduct prod;
  for (std::size_t i = 0; i < slice.size(); ++i) prod.multiply(phi(r * slice.scales[i], o * slice.rotations[i]));
  return prod.value();
}

std::vector<Complex> multiplicative_path(const KernelModel& model, const CharFn& phi, double r,
                                         const Orthogonal3& o, int n, Key key) {
  std::vector<LogProduct> levels(static_cast<std::size_t>(n) + 1);
  if (r != 0.0) {
    walk_tree(model, n, key, true, [&](int level, std::uint64_t, double scale, const Orthogonal3& rotation) {
      levels[static_cast<std::size_t>(level)].multiply(phi(r * scale, o * rotation));
    });
  }
  std::vector<Complex> out;
  out.reserve(levels.size());
  for (const auto& l : levels) out.push_back(r == 0.0 ? Complex{1.0, 0.0} : l.value());
  return out;
}

PairedComplexEstimate martingale_property_check(const KernelModel& model, const CharFn& phi, double r,
                                                const Orthogonal3& o, int n, std::size_t seeds, Key key,
                                                Exec exec) {
  require(n >= 0 && n + 1 <= kMaxSliceDepth, "martingale_property_check needs 0 <= n < 24");
  require(seeds >= 2, "martingale_property_check needs at least two seeds");
  const auto draws = map_replicas(
      seeds,
      [&](std::size_t i) {
        const auto next = multiplicative_M(simulate_generation(model, n + 1, key.child(i).child(1)), phi, r, o);
        const auto now = multiplicative_M(simulate_generation(model, n, key.child(i).child(0)), phi, r, o);
        return std::pair<Complex, Complex>{next, now};
      },
      exec);
  std::vector<Complex> next(seeds);
  std::vector<Complex> now(seeds);
  for (std::size_t i = 0; i < seeds; ++i) {
    next[i] = draws[i].first;
    now[i] = draws[i].second;
  }
  return {estimate_mean(next), estimate_mean(now)};
}

DisintegrationReport weighted_disintegration(const KernelModel& model, double alpha, double outer_exponent,
                                             double c, int n, int n_big, std::size_t seeds, Key key,
                                             Exec exec) {
  require(n >= 0 && n_big >= 0, "disintegration depths must be >= 0");
  if (n + n_big > kMaxSliceDepth) throw Error(ErrorCode::DepthExceeded, "n + n_big must be <= 24");
  require(seeds >= 2, "disintegration needs at least two seeds");

  const auto pairs = map_replicas(
      seeds,
      [&](std::size_t i) {
        // The inner proxies are the lhs tree's own subtrees below generation n,
        // recombined with the top n generations of an unrelated tree. They
        // are independent of those top weights, and n = 0 reproduces the lhs.
        const Key seed = key.child(i);
        const Key lhs_key = seed.child("lhs");
        const double lhs = c * sample_W_infinity(model, alpha, n + n_big, lhs_key);
        const auto slice = simulate_generation(model, n, seed.child("rhs"), false);
        double rhs = 0.0;
        for (std::size_t v = 0; v < slice.size(); ++v) {
          rhs += power(slice.scales[v], outer_exponent) * c *
                 sample_W_infinity(model, alpha, n_big, node_key(lhs_key, n, v));
        }
        return std::pair<double, double>{lhs, rhs};
      },
      exec);

  DisintegrationReport out;
  out.lhs.resize(seeds);
  out.rhs.resize(seeds);
  for (std::size_t i = 0; i < seeds; ++i) {
    out.lhs[i] = pairs[i].first;
    out.rhs[i] = pairs[i].second;
  }
  out.lhs_mean = estimate_mean(out.lhs);
  out.rhs_mean = estimate_mean(out.rhs);
  out.lhs_variance = estimate_variance(out.lhs);
  out.rhs_variance = estimate_variance(out.rhs);
  out.ks = ks_two_sample(out.lhs, out.rhs);
  return out;
}

DisintegrationReport disintegration_check(const KernelModel& model, double alpha, int n, int n_big,
                                          std::size_t seeds, Key key, Exec exec) {
  return weighted_disintegration(model, alpha, alpha, 1.0, n, n_big, seeds, key, exec);
}

}  // namespace kbrw
