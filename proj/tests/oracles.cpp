#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

double halton(std::size_t i, unsigned base) {
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

double leaf_indicator_sum(double c, std::size_t points) {
  double sum = 0.0;
  for (std::size_t i = 1; i <= points; ++i) {
    const double p = halton(i, 2) * halton(i, 3) * halton(i, 5) * halton(i, 7);
    if (p <= c) sum += p;
  }
  return 16.0 * sum / static_cast<double>(points);
}

double spine_median(int n) { return std::exp(-boost::math::gamma_p_inv(static_cast<double>(n), 0.5) / 2.0); }

double yule_pmf(std::size_t k, double t) {
  if (k == 0) return 0.0;
  const double p = std::exp(-t);
  return p * std::pow(1.0 - p, static_cast<double>(k - 1));
}

double yule_two_by_quadrature(double t, std::size_t steps) {
  // First split at s (density e^-s), then both children survive the rest.
  const double h = t / static_cast<double>(steps);
  double sum = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double s = (i + 0.5) * h;
    sum += std::exp(-s) * std::exp(-2.0 * (t - s));
  }
  return sum * h;
}

double uniform_family_variance(int n) {
  double v = 0.0;
  for (int k = 0; k < n; ++k) v = (2.0 / 3.0) * v + 1.0 / 6.0;
  return v;
}

namespace {

std::vector<double> chain_rhs(const std::vector<double>& psi) {
  std::vector<double> d(psi.size(), 0.0);
  for (std::size_t k = 0; k + 1 < psi.size(); ++k) d[k] = psi[k + 1] * psi[k + 1] - psi[k];
  return d;  // the deepest level sits at r s^K ~ 0 where phi_t = 1 for all t
}

std::vector<double> rk4_trace(const std::function<double(double)>& phi0, double s, double r, double t_end,
                              double step, int levels) {
  std::vector<double> psi(levels);
  for (int k = 0; k < levels; ++k) psi[k] = phi0(r * std::pow(s, k));
  const auto steps = static_cast<std::size_t>(std::llround(t_end / step));
  std::vector<double> trace{psi[0]};
  auto axpy = [](const std::vector<double>& a, double h, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + h * b[i];
    return out;
  };
  for (std::size_t i = 0; i < steps; ++i) {
    const auto k1 = chain_rhs(psi);
    const auto k2 = chain_rhs(axpy(psi, step / 2, k1));
    const auto k3 = chain_rhs(axpy(psi, step / 2, k2));
    const auto k4 = chain_rhs(axpy(psi, step, k3));
    for (std::size_t j = 0; j < psi.size(); ++j) psi[j] += step / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    trace.push_back(psi[0]);
  }
  return trace;
}

}  // namespace

double degenerate_solution(const std::function<double(double)>& phi0, double s, double t, double r, double step,
                           int levels) {
  return rk4_trace(phi0, s, r, t, step, levels).back();
}

double degenerate_third_derivative(const std::function<double(double)>& phi0, double s, double r, double t_lo,
                                   double t_hi, double step, int levels) {
  const auto v = rk4_trace(phi0, s, r, t_hi + 3 * step, step, levels);
  double best = 0.0;
  for (std::size_t i = 2; i + 2 < v.size(); ++i) {
    const double t = i * step;
    if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
    const double d3 = (v[i + 2] - 2 * v[i + 1] + 2 * v[i - 1] - v[i - 2]) / (2 * step * step * step);
    best = std::max(best, std::abs(d3));
  }
  return best;
}

double ks_critical_one_sample(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

double ks_critical_two_sample(std::size_t n, std::size_t m) {
  return 1.6276 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

bool witness_by_enumeration(const std::vector<std::pair<double, std::array<double, 9>>>& atoms, int depth) {
  using Elem = std::pair<double, std::array<double, 9>>;
  std::vector<Elem> all{{1.0, {1, 0, 0, 0, 1, 0, 0, 0, 1}}};
  std::vector<Elem> frontier = all;
  for (int d = 0; d < depth; ++d) {
    std::vector<Elem> next;
    for (const auto& [s, u] : frontier) {
      for (const auto& [a, v] : atoms) {
        std::array<double, 9> w{};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) w[i * 3 + j] += u[i * 3 + k] * v[k * 3 + j];
        next.push_back({s * a, w});
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double gap = 0.0;
      for (int k = 0; k < 9; ++k) gap = std::max(gap, std::abs(all[i].second[k] - all[j].second[k]));
      if (gap <= 1e-9 && std::abs(all[i].first / all[j].first - 1.0) > 1e-6) return true;
    }
  }
  return false;
}

}  // namespace oracle
