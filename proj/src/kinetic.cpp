#include "kbrw/kinetic.hpp"

#include <algorithm>
#include <cmath>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

// Replicas are reduced in fixed blocks so the merge order, and hence every
// estimate, is independent of the thread count.
constexpr std::size_t kReplicaBlock = 256;

std::size_t block_count(std::size_t n) { return (n + kReplicaBlock - 1) / kReplicaBlock; }

std::pair<std::size_t, std::size_t> block_range(std::size_t b, std::size_t n) {
  const std::size_t begin = b * kReplicaBlock;
  return {begin, std::min(n, begin + kReplicaBlock)};
}

Orthogonal3 point_rotation(const FourierPoint& p, const Orthogonal3& u) { return p.o * u; }

}  // namespace

void finalize_report(ResidualReport& report, double z, double atol, std::span<const double> extra_se) {
  const std::size_t k = report.points.size();
  require(report.lhs.size() == k && report.rhs.size() == k, "residual report: size mismatch");
  if (report.allowance.empty()) report.allowance.assign(k, 0.0);
  report.gap.assign(k, 0.0);
  report.tolerance.assign(k, 0.0);
  report.max_abs_gap = 0.0;
  report.pass = true;
  for (std::size_t i = 0; i < k; ++i) {
    const double extra = extra_se.empty() ? 0.0 : extra_se[i];
    const double se = std::sqrt(report.lhs[i].se_abs() * report.lhs[i].se_abs() +
                                report.rhs[i].se_abs() * report.rhs[i].se_abs() + extra * extra);
    report.gap[i] = std::abs(report.lhs[i].mean - report.rhs[i].mean);
    report.tolerance[i] = z * se + atol + report.allowance[i];
    report.max_abs_gap = std::max(report.max_abs_gap, report.gap[i]);
    report.pass = report.pass && report.gap[i] <= report.tolerance[i];
  }
}

ComplexEstimate q_plus(const CharFn& phi, const KernelModel& model, const FourierPoint& point,
                       std::size_t n_mc, Key key, Exec exec) {
  require(n_mc >= 2, "q_plus needs n_mc >= 2");
  const auto parts = map_replicas(
      block_count(n_mc),
      [&](std::size_t b) {
        auto rng = key.child(b).stream();
        const auto [begin, end] = block_range(b, n_mc);
        ComplexMoments acc;
        for (std::size_t i = begin; i < end; ++i) {
          const auto s = model.sample(rng);
          acc.add(phi(point.r * s.r1, point.o * s.o1) * phi(point.r * s.r2, point.o * s.o2));
        }
        return acc;
      },
      exec);
  ComplexMoments total;
  for (const auto& p : parts) total.merge(p);
  return total.estimate();
}

Complex alive_product(const CharFn& phi0, const Population& pop, double r, const Orthogonal3& o) {
  if (r == 0.0) return {1.0, 0.0};
  Complex prod{1.0, 0.0};
  for (const auto& p : pop.particles) prod *= phi0(r * p.scale, o * p.rotation);
  return prod;
}

std::vector<ComplexEstimate> solve_time(const CharFn& phi0, const KernelModel& model, double t,
                                        std::span<const FourierPoint> points, std::size_t n_replicas,
                                        std::size_t cap, Key key, Exec exec) {
  require(std::isfinite(t) && t >= 0.0, "solve_time needs t >= 0");
  require(n_replicas >= 2, "solve_time needs at least two replicas");
  const std::size_t k = points.size();
  const auto parts = map_replicas(
      block_count(n_replicas),
      [&](std::size_t b) {
        std::vector<ComplexMoments> acc(k);
        const auto [begin, end] = block_range(b, n_replicas);
        for (std::size_t i = begin; i < end; ++i) {
          const auto pop = simulate_alive(model, t, key.child(i), cap);
          for (std::size_t p = 0; p < k; ++p) acc[p].add(alive_product(phi0, pop, points[p].r, points[p].o));
        }
        return acc;
      },
      exec);
  std::vector<ComplexEstimate> out(k);
  for (std::size_t p = 0; p < k; ++p) {
    ComplexMoments total;
    for (const auto& part : parts) total.merge(part[p]);
    out[p] = total.estimate();
  }
  return out;
}

ResidualReport ode_residual(const CharFn& phi0, const KernelModel& model, double t, double delta,
                            std::span<const FourierPoint> points, std::size_t n_replicas, std::size_t cap,
                            Key key, const OdeOptions& options, Exec exec) {
  require(std::isfinite(delta) && delta > 0.0 && delta <= t, "ode_residual needs 0 < delta <= t");
  require(n_replicas >= 2, "ode_residual needs at least two replicas");
  const std::size_t k = points.size();

  struct Parts {
    std::vector<ComplexMoments> lhs;
    std::vector<ComplexMoments> rhs;
  };
  const auto parts = map_replicas(
      block_count(n_replicas),
      [&](std::size_t b) {
        Parts acc{std::vector<ComplexMoments>(k), std::vector<ComplexMoments>(k)};
        const auto [begin, end] = block_range(b, n_replicas);
        for (std::size_t i = begin; i < end; ++i) {
          const Key rep = key.child(i);
          // Both ends of the difference quotient come from one tree, so only
          // the splits inside (t - delta, t + delta] contribute noise.
          const auto after = simulate_alive(model, t + delta, rep.child("diff"), cap);
          const auto before = simulate_alive(model, t - delta, rep.child("diff"), cap);

          auto rng = rep.child("collision").stream();
          const auto s = model.sample(rng);
          const auto first = simulate_alive(model, t, rep.child("first"), cap);
          const auto second = simulate_alive(model, t, rep.child("second"), cap);
          const auto loss = simulate_alive(model, t, rep.child("loss"), cap);

          for (std::size_t p = 0; p < k; ++p) {
            const auto& pt = points[p];
            const Complex diff =
                (alive_product(phi0, after, pt.r, pt.o) - alive_product(phi0, before, pt.r, pt.o)) / (2.0 * delta);
            const Complex gain = alive_product(phi0, first, pt.r * s.r1, point_rotation(pt, s.o1)) *
                                 alive_product(phi0, second, pt.r * s.r2, point_rotation(pt, s.o2));
            acc.lhs[p].add(diff);
            acc.rhs[p].add(gain - alive_product(phi0, loss, pt.r, pt.o));
          }
        }
        return acc;
      },
      exec);

  ResidualReport report;
  report.points.assign(points.begin(), points.end());
  report.lhs.resize(k);
  report.rhs.resize(k);
  for (std::size_t p = 0; p < k; ++p) {
    ComplexMoments l;
    ComplexMoments r;
    for (const auto& part : parts) {
      l.merge(part.lhs[p]);
      r.merge(part.rhs[p]);
    }
    report.lhs[p] = l.estimate();
    report.rhs[p] = r.estimate();
  }
  report.allowance.assign(k, options.allowance_c * delta * delta);
  finalize_report(report, options.z, options.atol);
  return report;
}

ResidualReport semigroup_check(const CharFn& phi0, const KernelModel& model, double t, double h,
                               std::span<const FourierPoint> points, std::size_t n_replicas,
                               std::size_t n_inner, std::size_t cap, Key key, double z, double atol,
                               Exec exec) {
  require(t >= 0.0 && h >= 0.0, "semigroup_check needs t, h >= 0");
  require(n_inner >= 1, "semigroup_check needs n_inner >= 1");
  const std::size_t k = points.size();

  ResidualReport report;
  report.points.assign(points.begin(), points.end());
  report.lhs = solve_time(phi0, model, t + h, points, n_replicas, cap, key.child("direct"), exec);

  const Key nested = key.child("nested");
  const auto parts = map_replicas(
      block_count(n_replicas),
      [&](std::size_t b) {
        std::vector<ComplexMoments> acc(k);
        const auto [begin, end] = block_range(b, n_replicas);
        for (std::size_t i = begin; i < end; ++i) {
          const auto outer = simulate_alive(model, h, nested.child(i), cap);
          // Inner surrogates of phi_t, one set per outer particle, shared by all points.
          std::vector<std::vector<Population>> inner(outer.particles.size());
          for (std::size_t w = 0; w < outer.particles.size(); ++w) {
            const Key base = outer.particles[w].key.child("inner");
            for (std::size_t q = 0; q < n_inner; ++q) {
              inner[w].push_back(simulate_alive(model, t, base.child(q), cap));
            }
          }
          for (std::size_t p = 0; p < k; ++p) {
            const auto& pt = points[p];
            Complex prod{1.0, 0.0};
            for (std::size_t w = 0; w < outer.particles.size(); ++w) {
              const auto& part = outer.particles[w];
              Complex surrogate{0.0, 0.0};
              for (const auto& pop : inner[w]) {
                surrogate += alive_product(phi0, pop, pt.r * part.scale, point_rotation(pt, part.rotation));
              }
              prod *= surrogate / static_cast<double>(n_inner);
            }
            acc[p].add(prod);
          }
        }
        return acc;
      },
      exec);
  report.rhs.resize(k);
  for (std::size_t p = 0; p < k; ++p) {
    ComplexMoments total;
    for (const auto& part : parts) total.merge(part[p]);
    report.rhs[p] = total.estimate();
  }
  finalize_report(report, z, atol);
  return report;
}

WeightedNodes nodes_of(const GenerationSlice& slice) {
  require(slice.has_rotations(), "embedding checks need a slice with rotations");
  return {slice.scales, slice.rotations};
}

EmbeddingSample embedded_matrix_cf(const VelocityLaw& law, WeightedNodes nodes, const FourierPoint& point,
                                   Stream& rng) {
  if (!law.has_sampler()) throw Error(ErrorCode::MissingSampler, "velocity law has no sampler");
  require(nodes.scales.size() == nodes.rotations.size(), "embedding: scales and rotations differ in length");

  std::array<double, 9> sum{};  // sum_v Xt(v) (l(v) u(v))^T, row-major
  double phase = 0.0;
  for (std::size_t v = 0; v < nodes.scales.size(); ++v) {
    const Vector3 x = law.sampler(rng);
    const double l = nodes.scales[v];
    const auto& u = nodes.rotations[v];
    // Xt has X in its third column, so Xt M^T has entries X_i M_{j,3}.
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) sum[i * 3 + j] += x[i] * l * u(j, 2);
    }
    const Vector3 dir = (point.o * u).axis();
    phase += point.r * l * dot(dir, x);
  }
  // tr((r o)^T S) = r sum_{ij} o_ij S_ij
  double trace = 0.0;
  for (int i = 0; i < 9; ++i) trace += point.o.entries()[i] * sum[i];
  EmbeddingSample out;
  out.matrix_form = std::exp(Complex{0.0, point.r * trace});
  out.product_form = std::exp(Complex{0.0, phase});
  return out;
}

ResidualReport vectorized_Yn_check(const VelocityLaw& law, WeightedNodes nodes,
                                   std::span<const FourierPoint> points, std::size_t n_mc, Key key,
                                   DrawMode mode, double z, double atol, Exec exec) {
  if (!law.has_sampler()) throw Error(ErrorCode::MissingSampler, "velocity law has no sampler");
  require(n_mc >= 2, "vectorized_Yn_check needs n_mc >= 2");
  const std::size_t k = points.size();

  struct PointResult {
    ComplexEstimate lhs;
    ComplexEstimate rhs;
    double max_sample_gap = 0.0;
  };
  const auto results = map_replicas(
      k,
      [&](std::size_t p) {
        const auto& pt = points[p];
        auto rng = key.child(p).stream();
        ComplexMoments zeta;
        ComplexMoments prod;
        PointResult out;
        for (std::size_t s = 0; s < n_mc; ++s) {
          const auto sample = embedded_matrix_cf(law, nodes, pt, rng);
          zeta.add(sample.matrix_form);
          prod.add(sample.product_form);
          out.max_sample_gap = std::max(out.max_sample_gap, std::abs(sample.matrix_form - sample.product_form));
        }
        out.lhs = zeta.estimate();
        if (mode == DrawMode::shared) {
          out.rhs = prod.estimate();
        } else {
          Complex exact{1.0, 0.0};
          for (std::size_t v = 0; v < nodes.scales.size(); ++v) {
            exact *= law.char_fn(pt.r * nodes.scales[v], pt.o * nodes.rotations[v]);
          }
          out.rhs = {exact, 0.0, 0.0, 1};
        }
        return out;
      },
      exec);

  ResidualReport report;
  report.points.assign(points.begin(), points.end());
  for (const auto& r : results) {
    report.lhs.push_back(r.lhs);
    report.rhs.push_back(r.rhs);
    report.max_sample_gap = std::max(report.max_sample_gap, r.max_sample_gap);
  }
  if (mode == DrawMode::shared) {
    // Both sides are the same function of the same draws: compare exactly.
    finalize_report(report, 0.0, atol);
    report.pass = report.pass && report.max_sample_gap <= atol;
  } else {
    finalize_report(report, z, 0.0);
  }
  return report;
}

ResidualReport sampler_cf_check(const VelocityLaw& law, std::span<const FourierPoint> points, std::size_t n,
                                Key key, double width, Exec exec) {
  if (!law.has_sampler()) throw Error(ErrorCode::MissingSampler, "sampler_cf_check needs a sampler");
  require(n >= 2, "sampler_cf_check needs n >= 2");
  constexpr std::size_t kBlock = 4096;
  std::vector<Vector3> xs(n);
  map_replicas(
      (n + kBlock - 1) / kBlock,
      [&](std::size_t b) {
        auto rng = key.child(b).stream();
        for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) xs[i] = law.sampler(rng);
        return 0;
      },
      exec);
  ResidualReport report;
  report.points.assign(points.begin(), points.end());
  report.lhs = map_replicas(
      points.size(),
      [&](std::size_t p) {
        const Vector3 dir = points[p].o.axis();
        ComplexMoments acc;
        for (const auto& x : xs) {
          const double phase = points[p].r * dot(dir, x);
          acc.add({std::cos(phase), std::sin(phase)});
        }
        return acc.estimate();
      },
      exec);
  for (const auto& pt : points) report.rhs.push_back({law.char_fn(pt), 0.0, 0.0, 1});
  finalize_report(report, 0.0, width / std::sqrt(static_cast<double>(n)));
  return report;
}

std::vector<FourierPoint> default_grid() {
  std::vector<Orthogonal3> rotations{Orthogonal3::identity()};
  auto rng = Key{0x6B62727767726964ull}.stream();
  for (int i = 0; i < 3; ++i) rotations.push_back(haar_rotation(rng));
  std::vector<FourierPoint> grid;
  for (const auto& o : rotations) {
    for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) grid.push_back({r, o});
  }
  return grid;
}

}  // namespace kbrw
