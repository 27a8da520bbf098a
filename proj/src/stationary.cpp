#include "kbrw/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// mean_k exp(-W_k x), summed as deviations from the first term so a
// degenerate mixture reproduces exp(-x) exactly.
double mixture_value(const std::vector<double>& ws, double x) {
  if (ws.empty()) return 1.0;
  const double first = std::exp(-ws.front() * x);
  double dev = 0.0;
  for (double w : ws) dev += std::exp(-w * x) - first;
  return first + dev / static_cast<double>(ws.size());
}

struct Proxies {
  std::vector<double> fine;
  std::vector<double> coarse;
};

Proxies draw_proxies(const KernelModel& model, double alpha, int n_big, std::size_t n_W, Key key, Exec exec) {
  require(n_W >= 1, "mixtures need n_W >= 1");
  if (n_big < 0) throw Error(ErrorCode::InvalidArgument, "n_big must be >= 0");
  if (n_big > kMaxSliceDepth) throw Error(ErrorCode::DepthExceeded, "n_big must be <= 24");
  const auto pairs = map_replicas(
      n_W, [&](std::size_t k) { return sample_W_proxy_pair(model, alpha, n_big, key.child(k)); }, exec);
  Proxies out;
  out.fine.reserve(n_W);
  out.coarse.reserve(n_W);
  for (const auto& p : pairs) {
    out.fine.push_back(p.fine);
    out.coarse.push_back(p.coarse);
  }
  return out;
}

StationarySolution make_mixture(std::string kind, double alpha, double scale, int n_big, Key key, Proxies proxies,
                                std::function<double(double, const Orthogonal3&)> kappa,
                                std::function<Vector3(const std::vector<double>&, Stream&)> draw) {
  StationarySolution sol;
  sol.meta = {std::move(kind), alpha, scale, proxies.fine.size(), n_big, key.bits};
  sol.kappa = kappa;
  sol.w_fine = std::move(proxies.fine);
  sol.w_coarse = std::move(proxies.coarse);
  auto ws = std::make_shared<const std::vector<double>>(sol.w_fine);
  sol.char_fn = {[ws, kappa](double r, const Orthogonal3& o) {
                   if (r == 0.0) return Complex{1.0, 0.0};
                   return Complex{mixture_value(*ws, kappa(r, o)), 0.0};
                 },
                 sol.meta.kind + "-mixture(alpha=" + fmt(alpha) + ",scale=" + fmt(scale) +
                     ",n_W=" + std::to_string(sol.meta.n_W) + ",n_big=" + std::to_string(n_big) + ")"};
  sol.sampler = [ws, draw](Stream& rng) { return draw(*ws, rng); };
  return sol;
}

double pick(const std::vector<double>& ws, Stream& rng) {
  const auto k = static_cast<std::size_t>(rng.next_u64() % ws.size());
  return ws[k];
}

}  // namespace

double StationarySolution::coarse_value(double r, const Orthogonal3& o) const {
  if (!is_mixture() || r == 0.0) return char_fn(r, o).real();
  return mixture_value(w_coarse, kappa(r, o));
}

StationarySolution plain_solution(CharFn phi) {
  StationarySolution sol;
  sol.meta.kind = "custom";
  sol.char_fn = std::move(phi);
  return sol;
}

StationarySolution stable_mixture(const KernelModel& model, double alpha, double sigma, int n_big,
                                  std::size_t n_W, Key key, Exec exec) {
  if (!(std::isfinite(alpha) && alpha > 0.0 && alpha < 2.0) || alpha == 1.0) {
    throw Error(ErrorCode::AlphaOutOfScope,
                "stable mixtures need alpha in (0, 2) without 1, got " + fmt(alpha));
  }
  require(std::isfinite(sigma) && sigma > 0.0, "stable mixtures need sigma > 0");
  auto proxies = draw_proxies(model, alpha, n_big, n_W, key, exec);
  return restore_mixture({"stable", alpha, sigma, n_W, n_big, key.bits}, std::move(proxies.fine),
                         std::move(proxies.coarse));
}

StationarySolution gaussian_mixture(const KernelModel& model, double c, int n_big, std::size_t n_W, Key key,
                                    double alpha_tol, Exec exec) {
  require(std::isfinite(c) && c > 0.0, "gaussian mixtures need c > 0");
  if (model.has_exact_m()) {
    const double m2 = *model.exact_m(2.0);
    if (!(std::abs(m2 - 1.0) <= alpha_tol)) {
      throw Error(ErrorCode::AlphaOutOfScope, "gaussian mixtures need m(2) = 1, got " + fmt(m2));
    }
  } else {
    const auto m2 = estimate_m(model, 2.0, 100000, key.child("m2"), exec);
    if (!(std::abs(m2.mean - 1.0) <= 3.0 * m2.std_error + alpha_tol)) {
      throw Error(ErrorCode::AlphaOutOfScope, "gaussian mixtures need m(2) = 1, estimated " + fmt(m2.mean));
    }
  }
  auto proxies = draw_proxies(model, 2.0, n_big, n_W, key, exec);
  return restore_mixture({"gaussian", 2.0, c, n_W, n_big, key.bits}, std::move(proxies.fine),
                         std::move(proxies.coarse));
}

StationarySolution restore_mixture(const SolutionMeta& meta, std::vector<double> w_fine,
                                   std::vector<double> w_coarse) {
  require(!w_fine.empty() && w_fine.size() == w_coarse.size(), "mixtures need matching nonempty proxy lists");
  for (double w : w_fine) require(std::isfinite(w) && w >= 0.0, "W proxies must be finite and nonnegative");
  for (double w : w_coarse) require(std::isfinite(w) && w >= 0.0, "W proxies must be finite and nonnegative");
  const double alpha = meta.alpha;
  const double scale = meta.scale;
  require(std::isfinite(scale) && scale > 0.0, "mixture scale must be positive");
  Proxies proxies{std::move(w_fine), std::move(w_coarse)};
  if (meta.kind == "stable") {
    if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0) {
      throw Error(ErrorCode::AlphaOutOfScope, "stable mixtures need alpha in (0, 2) without 1, got " + fmt(alpha));
    }
    const auto unit = isotropic_stable_law(alpha, 1.0);
    return make_mixture(
        "stable", alpha, scale, meta.n_big, Key{meta.seed}, std::move(proxies),
        [alpha, scale](double r, const Orthogonal3&) { return scale * std::pow(r, alpha); },
        [alpha, scale, unit](const std::vector<double>& ws, Stream& rng) {
          const double w = pick(ws, rng);
          return scaled(unit.sampler(rng), std::pow(scale * w, 1.0 / alpha));
        });
  }
  if (meta.kind == "gaussian") {
    return make_mixture(
        "gaussian", 2.0, scale, meta.n_big, Key{meta.seed}, std::move(proxies),
        [scale](double r, const Orthogonal3&) { return 0.5 * scale * r * r; },
        [scale](const std::vector<double>& ws, Stream& rng) {
          const double w = pick(ws, rng);
          return scaled(standard_normal3(rng), std::sqrt(scale * w));
        });
  }
  throw Error(ErrorCode::InvalidArgument, "unknown mixture kind '" + meta.kind + "'");
}

ResidualReport fixed_point_residual(const StationarySolution& sol, const KernelModel& model,
                                    std::span<const FourierPoint> grid, std::size_t n_mc, Key key,
                                    const FixedPointOptions& options, Exec exec) {
  require(!grid.empty(), "fixed_point_residual needs a nonempty grid");
  require(n_mc >= 2, "fixed_point_residual needs n_mc >= 2");

  std::vector<CollisionSample> draws(n_mc);
  {
    constexpr std::size_t kBlock = 4096;
    map_replicas(
        (n_mc + kBlock - 1) / kBlock,
        [&](std::size_t b) {
          auto rng = key.child(b).stream();
          for (std::size_t i = b * kBlock; i < std::min(n_mc, (b + 1) * kBlock); ++i) draws[i] = model.sample(rng);
          return 0;
        },
        exec);
  }

  struct PointResult {
    ComplexEstimate lhs;
    Complex value;
    double allowance = 0.0;
    double mixture_se = 0.0;
  };
  const bool mixture = sol.is_mixture();
  const auto results = map_replicas(
      grid.size(),
      [&](std::size_t p) {
        const auto& pt = grid[p];
        PointResult out;
        ComplexMoments acc;
        const std::size_t m = mixture ? std::min(n_mc, options.influence_draws) : 0;
        std::vector<Complex> phi1(m);
        std::vector<Complex> phi2(m);
        for (std::size_t i = 0; i < n_mc; ++i) {
          const auto& s = draws[i];
          const Complex a = sol.char_fn(pt.r * s.r1, pt.o * s.o1);
          const Complex b = sol.char_fn(pt.r * s.r2, pt.o * s.o2);
          acc.add(a * b);
          if (i < m) {
            phi1[i] = a;
            phi2[i] = b;
          }
        }
        out.lhs = acc.estimate();
        out.value = sol.char_fn(pt.r, pt.o);
        if (mixture && pt.r != 0.0) {
          out.allowance = std::abs(out.value.real() - sol.coarse_value(pt.r, pt.o));
          std::vector<double> x1(m);
          std::vector<double> x2(m);
          for (std::size_t i = 0; i < m; ++i) {
            x1[i] = sol.kappa(pt.r * draws[i].r1, pt.o * draws[i].o1);
            x2[i] = sol.kappa(pt.r * draws[i].r2, pt.o * draws[i].o2);
          }
          const double x0 = sol.kappa(pt.r, pt.o);
          std::vector<double> influence(sol.w_fine.size());
          for (std::size_t k = 0; k < sol.w_fine.size(); ++k) {
            const double w = sol.w_fine[k];
            double sum = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
              sum += std::exp(-w * x1[i]) * phi2[i].real() + phi1[i].real() * std::exp(-w * x2[i]);
            }
            influence[k] = sum / static_cast<double>(m) - std::exp(-w * x0);
          }
          // estimate_mean's SE is sqrt(Var(a_k) / n_W), the finite-mixture term.
          out.mixture_se = influence.size() >= 2 ? estimate_mean(influence).std_error : 0.0;
        }
        return out;
      },
      exec);

  ResidualReport report;
  report.points.assign(grid.begin(), grid.end());
  std::vector<double> extra;
  for (const auto& r : results) {
    report.lhs.push_back(r.lhs);
    report.rhs.push_back({r.value, 0.0, 0.0, 1});
    report.allowance.push_back(r.allowance);
    extra.push_back(r.mixture_se);
  }
  finalize_report(report, options.z, options.atol, extra);
  return report;
}

InvariantK power_K(double sigma, double alpha, double power) {
  require(std::isfinite(sigma) && sigma >= 0.0, "power_K needs sigma >= 0");
  return {[sigma, power](double r, const Orthogonal3&) { return Complex{sigma * std::pow(r, power), 0.0}; },
          alpha, "sigma*r^" + fmt(power)};
}

InvarianceReport check_K_invariance(const InvariantK& K, const KernelModel& model, std::size_t n_pairs, Key key,
                                    double tol, double r_lo, double r_hi) {
  require(n_pairs >= 100, "check_K_invariance needs n_pairs >= 100");
  require(0.0 < r_lo && r_lo <= r_hi, "check_K_invariance needs 0 < r_lo <= r_hi");
  InvarianceReport out;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto rng = key.child(i).stream();
    Similarity g;
    const int depth = static_cast<int>(i % 4) + 1;
    for (int d = 0; d < depth; ++d) {
      const auto s = model.sample(rng);
      const bool second = (rng.next_u64() >> 63) != 0;
      g = compose(g, Similarity{second ? s.r2 : s.r1, second ? s.o2 : s.o1});
    }
    if (!(g.scale > 0.0)) continue;
    const double r = std::exp(std::log(r_lo) + (std::log(r_hi) - std::log(r_lo)) * rng.uniform());
    const Orthogonal3 o = haar_rotation(rng);
    const double residual = std::abs(K.eval(r, o) - std::pow(g.scale, -K.alpha) * K.eval(r * g.scale, o * g.rotation));
    ++out.pairs;
    if (residual > out.max_residual || !std::isfinite(residual)) {
      out.max_residual = std::isfinite(residual) ? residual : std::numeric_limits<double>::infinity();
      out.worst_scale = g.scale;
      out.worst_r = r;
    }
  }
  out.pass = out.max_residual <= tol;
  return out;
}

namespace {

StructureReport zero_structure(std::size_t seeds) {
  StructureReport out;
  out.zero = true;
  out.sides.lhs.assign(seeds, 0.0);
  out.sides.rhs.assign(seeds, 0.0);
  out.sides.lhs_mean = out.sides.rhs_mean = {0.0, 0.0, seeds};
  out.sides.lhs_variance = out.sides.rhs_variance = {0.0, 0.0, seeds};
  out.sides.ks = {0.0, 1.0, 0};
  return out;
}

StructureReport proxy_structure(const KernelModel& model, double alpha, double outer, const ProxySpec& spec, int n,
                                int n_big, std::size_t seeds, Key key, double z, double significance, Exec exec) {
  StructureReport out;
  out.sides = weighted_disintegration(model, alpha, outer, spec.c, n, n_big, seeds, key, exec);
  // Sides equal seed by seed up to rounding (degenerate W) need no statistics.
  bool paired = true;
  for (std::size_t i = 0; i < out.sides.lhs.size(); ++i) {
    const double a = out.sides.lhs[i], b = out.sides.rhs[i];
    paired = paired && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
  }
  out.mismatch =
      !paired && (!agree(out.sides.lhs_mean, out.sides.rhs_mean, z) || out.sides.ks.p_value < significance);
  return out;
}

}  // namespace

StructureReport check_V_equation(const ProxySpec& spec, const KernelModel& model, double alpha, int n, int n_big,
                                 std::size_t seeds, Key key, double z, double significance, Exec exec) {
  if (spec.kind == ProxySpec::Kind::zero) return zero_structure(seeds);
  if (std::abs(alpha - 2.0) > 1e-9) {
    throw Error(ErrorCode::AlphaOutOfScope, "a nonzero V is only defined for alpha = 2");
  }
  return proxy_structure(model, alpha, 2.0, spec, n, n_big, seeds, key, z, significance, exec);
}

StructureReport check_Y_equation(const ProxySpec& spec, const KernelModel& model, double alpha, int n, int n_big,
                                 std::size_t seeds, Key key, bool out_of_theorem_scope, double z,
                                 double significance, Exec exec) {
  if (spec.kind == ProxySpec::Kind::zero) return zero_structure(seeds);
  if (!out_of_theorem_scope) {
    throw Error(ErrorCode::AlphaOutOfScope,
                "a nonzero Y belongs to the alpha = 1 case; set out_of_theorem_scope to run it");
  }
  return proxy_structure(model, alpha, 1.0, spec, n, n_big, seeds, key, z, significance, exec);
}

EmpiricalTail::EmpiricalTail(const std::function<Vector3(Stream&)>& sampler, std::size_t n, Key key, Exec exec) {
  if (!sampler) throw Error(ErrorCode::MissingSampler, "tail estimates need a sampler");
  require(n >= 1, "EmpiricalTail needs n >= 1");
  constexpr std::size_t kBlock = 4096;
  norms_.resize(n);
  map_replicas(
      (n + kBlock - 1) / kBlock,
      [&](std::size_t b) {
        auto rng = key.child(b).stream();
        for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) norms_[i] = norm(sampler(rng));
        return 0;
      },
      exec);
  std::sort(norms_.begin(), norms_.end());
}

double EmpiricalTail::exceedance(double t) const noexcept {
  const auto above = norms_.end() - std::upper_bound(norms_.begin(), norms_.end(), t);
  return static_cast<double>(above) / static_cast<double>(norms_.size());
}

double EmpiricalTail::tail_constant(double alpha) const noexcept {
  const double n = static_cast<double>(norms_.size());
  double best = 0.0;
  for (std::size_t k = 1; k <= norms_.size(); ++k) {
    const double x = norms_[norms_.size() - k];
    best = std::max(best, std::pow(x, alpha) * static_cast<double>(k) / n);
  }
  return best;
}

TailReport tail_check(const std::function<Vector3(Stream&)>& sampler, double alpha, std::span<const double> t_grid,
                      std::size_t n_samples, Key key, std::optional<double> C, double z, Exec exec) {
  if (!sampler) throw Error(ErrorCode::MissingSampler, "tail_check needs a sampler");
  require(!t_grid.empty(), "tail_check needs a nonempty grid");
  for (double t : t_grid) {
    require(std::isfinite(t) && t >= 1.0 && t <= 1e3, "tail_check grid points must lie in [1, 1e3]");
  }
  require(n_samples >= 2, "tail_check needs n_samples >= 2");
  const EmpiricalTail tail(sampler, n_samples, key, exec);
  const double n = static_cast<double>(n_samples);

  TailReport out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  std::size_t smallest = 0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double p = tail.exceedance(t);
    const double f = std::pow(t, alpha);
    out.probability.push_back(p);
    out.scaled.push_back(f * p);
    out.scaled_se.push_back(f * std::sqrt(p * (1.0 - p) / n));
    out.sup = std::max(out.sup, f * p);
    if (t < t_grid[smallest]) smallest = i;
  }
  out.C = C ? *C : 2.0 * out.scaled[smallest];
  out.pass = out.sup <= out.C;
  out.flat = true;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    for (std::size_t j = i + 1; j < t_grid.size(); ++j) {
      const double se = std::hypot(out.scaled_se[i], out.scaled_se[j]);
      out.flat = out.flat && std::abs(out.scaled[i] - out.scaled[j]) <= z * se;
    }
  }
  return out;
}

TailReport tail_check(const StationarySolution& sol, double alpha, std::span<const double> t_grid,
                      std::size_t n_samples, Key key, std::optional<double> C, double z, Exec exec) {
  return tail_check(sol.sampler, alpha, t_grid, n_samples, key, C, z, exec);
}

LevyBoundReport levy_tail_bound_check(const EmpiricalTail& tail, double alpha, double C,
                                      std::span<const double> weights, std::span<const double> r_grid, double z) {
  require(tail.size() >= 1, "levy_tail_bound_check needs a tail sample");
  LevyBoundReport out;
  out.r_grid.assign(r_grid.begin(), r_grid.end());
  for (double l : weights) out.W += power(l, alpha);
  const double n = static_cast<double>(tail.size());
  out.holds = true;
  for (double r : r_grid) {
    double sum = 0.0;
    double se = 0.0;
    if (r > 0.0) {
      for (double l : weights) {
        if (!(l > 0.0)) continue;
        const double p = tail.exceedance(1.0 / (2.0 * r * l));
        sum += p;
        // Exceedances of one sample are positively correlated, so the SEs add.
        se += std::sqrt(p * (1.0 - p) / n);
      }
    }
    const double bound = std::pow(2.0, alpha) * C * std::pow(r, alpha) * out.W;
    out.tail_sum.push_back(sum);
    out.tail_sum_se.push_back(se);
    out.bound.push_back(bound);
    out.holds = out.holds && sum <= bound + z * se;
  }
  return out;
}

}  // namespace kbrw
