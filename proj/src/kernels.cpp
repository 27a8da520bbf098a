#include "kbrw/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Uniform on (0, 1) with 1 - u exact, so U + (1 - U) == 1 in floating point.
double nonzero_uniform(Stream& rng) noexcept {
  double u = rng.uniform();
  while (u == 0.0) u = rng.uniform();
  return u;
}

Orthogonal3 random_planar(Stream& rng) noexcept { return planar_rotation(kTwoPi * rng.uniform()); }

KernelModel::Spectral power_family_m(double alpha) {
  return [alpha](double gamma) { return 2.0 * alpha / (gamma + alpha); };
}
KernelModel::Spectral power_family_dm(double alpha) {
  return [alpha](double gamma) { return -2.0 * alpha / ((gamma + alpha) * (gamma + alpha)); };
}

void require_alpha(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, "kernel exponent must be positive and finite");
}

constexpr std::size_t kBlock = 4096;

}  // namespace

KernelModel dirichlet_scalar_kernel(double alpha) {
  require_alpha(alpha);
  const double inv = 1.0 / alpha;
  KernelModel model("dirichlet", [inv](Stream& rng) {
    const double u = nonzero_uniform(rng);
    CollisionSample s;
    s.r1 = std::pow(u, inv);
    s.r2 = std::pow(1.0 - u, inv);
    s.o1 = random_planar(rng);
    s.o2 = random_planar(rng);
    return s;
  });
  model.with_exact_m(power_family_m(alpha), power_family_dm(alpha))
      .with_alpha_hint(alpha)
      .with_planar_rotations();
  return model;
}

KernelModel independent_uniform_kernel(double alpha) {
  require_alpha(alpha);
  const double inv = 1.0 / alpha;
  KernelModel model("independent_uniform", [inv](Stream& rng) {
    CollisionSample s;
    s.r1 = std::pow(nonzero_uniform(rng), inv);
    s.r2 = std::pow(nonzero_uniform(rng), inv);
    s.o1 = random_planar(rng);
    s.o2 = random_planar(rng);
    return s;
  });
  model.with_exact_m(power_family_m(alpha), power_family_dm(alpha))
      .with_alpha_hint(alpha)
      .with_planar_rotations();
  return model;
}

KernelModel isotropic_kernel(const KernelModel& base, bool shared) {
  KernelModel model("isotropic(" + base.name() + (shared ? ",shared)" : ")"),
                    [base, shared](Stream& rng) {
                      CollisionSample s = base.sample(rng);
                      s.o1 = haar_rotation(rng);
                      s.o2 = shared ? s.o1 : haar_rotation(rng);
                      return s;
                    });
  if (base.has_exact_m()) {
    model.with_exact_m([base](double g) { return *base.exact_m(g); },
                       base.has_exact_dm() ? KernelModel::Spectral([base](double g) { return *base.exact_dm(g); })
                                           : KernelModel::Spectral{});
  }
  if (base.alpha_hint()) model.with_alpha_hint(*base.alpha_hint());
  return model;
}

Orthogonal3 RotationSpec::draw(Stream& rng) const {
  switch (kind) {
    case Kind::fixed: return matrix;
    case Kind::uniform_planar: return random_planar(rng);
    case Kind::haar: return haar_rotation(rng);
  }
  return matrix;
}

KernelModel atom_kernel(std::string name, std::vector<KernelAtom> atoms, bool closed_form) {
  require(!atoms.empty(), "atom kernel needs at least one atom");
  double total = 0.0;
  bool planar = true;
  for (const auto& a : atoms) {
    require(std::isfinite(a.weight) && a.weight > 0.0, "atom weights must be positive");
    require(std::isfinite(a.r1) && std::isfinite(a.r2) && a.r1 >= 0.0 && a.r2 >= 0.0,
            "atom scales must be finite and nonnegative");
    total += a.weight;
    for (const auto* spec : {&a.o1, &a.o2}) {
      if (spec->kind == RotationSpec::Kind::haar) planar = false;
      if (spec->kind == RotationSpec::Kind::fixed &&
          !(spec->matrix(0, 2) == 0.0 && spec->matrix(1, 2) == 0.0 && spec->matrix(2, 2) == 1.0)) {
        planar = false;
      }
    }
  }
  std::vector<double> cumulative;
  cumulative.reserve(atoms.size());
  double acc = 0.0;
  for (auto& a : atoms) {
    a.weight /= total;
    acc += a.weight;
    cumulative.push_back(acc);
  }
  cumulative.back() = 1.0;

  KernelModel model(std::move(name), [atoms, cumulative](Stream& rng) {
    std::size_t idx = 0;
    if (atoms.size() > 1) {
      const double u = rng.uniform();
      idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                     cumulative.begin());
      idx = std::min(idx, atoms.size() - 1);
    }
    const auto& a = atoms[idx];
    CollisionSample s;
    s.r1 = a.r1;
    s.r2 = a.r2;
    s.o1 = a.o1.draw(rng);
    s.o2 = a.o2.draw(rng);
    return s;
  });
  model.with_planar_rotations(planar);
  if (closed_form) {
    model.with_exact_m(
        [atoms](double g) {
          double m = 0.0;
          for (const auto& a : atoms) m += a.weight * (power(a.r1, g) + power(a.r2, g));
          return m;
        },
        [atoms](double g) {
          double dm = 0.0;
          for (const auto& a : atoms) {
            for (double r : {a.r1, a.r2}) {
              if (r > 0.0) dm += a.weight * power(r, g) * std::log(r);
            }
          }
          return dm;
        });
  }
  return model;
}

KernelModel degenerate_kernel(double alpha) {
  require_alpha(alpha);
  const double s = std::pow(2.0, -1.0 / alpha);
  KernelAtom atom{1.0, s, s, RotationSpec::fixed({}), RotationSpec::fixed({})};
  auto model = atom_kernel("degenerate", {atom});
  model.with_alpha_hint(alpha);
  return model;
}

KernelModel frame_dependent_kernel() {
  const Orthogonal3 quarter = axis_rotation({1.0, 0.0, 0.0}, std::numbers::pi / 2);
  return KernelModel("frame_dependent", [quarter](Stream& rng) {
    CollisionSample s;
    s.r1 = 1.0;
    s.r2 = nonzero_uniform(rng);
    s.o1 = Orthogonal3::identity();
    s.o2 = quarter;
    return s;
  });
}

Estimate estimate_m(const KernelModel& model, double gamma, std::size_t n, Key key, Exec exec) {
  require(n >= 2, "estimate_m needs n >= 2");
  require(std::isfinite(gamma) && gamma >= 0.0, "estimate_m needs gamma >= 0");
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  const auto parts = map_replicas(
      blocks,
      [&](std::size_t b) {
        auto rng = key.child(b).stream();
        const std::size_t count = std::min(kBlock, n - b * kBlock);
        Moments acc;
        for (std::size_t i = 0; i < count; ++i) {
          const auto s = model.sample(rng);
          const double v = power(s.r1, gamma) + power(s.r2, gamma);
          if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFinite, "R^gamma is not finite in kernel '" + model.name() + "'");
          }
          acc.add(v);
        }
        return acc;
      },
      exec);
  Moments total;
  for (const auto& p : parts) total.merge(p);
  return total.estimate();
}

// ---------------------------------------------------------------------------
// alpha root

namespace {

// Lazily drawn scale pairs shared by every evaluation point.
class ScaleCache {
 public:
  ScaleCache(const KernelModel& model, Key key, std::size_t batch, std::size_t budget, Exec exec)
      : model_(model), key_(key), batch_(batch), batches_max_((budget + batch - 1) / batch), exec_(exec) {}

  std::size_t batches_max() const noexcept { return batches_max_; }
  std::size_t drawn() const noexcept { return batches_.size() * batch_; }

  const std::vector<std::pair<double, double>>& batch(std::size_t b) {
    if (b >= batches_.size()) grow(b + 1);
    return batches_[b];
  }

 private:
  void grow(std::size_t want) {
    // Fill ahead geometrically so sequential looks do not serialize the sampling.
    const std::size_t target = std::min(batches_max_, std::max(want, 2 * batches_.size()));
    const std::size_t first = batches_.size();
    auto fresh = map_replicas(
        target - first,
        [&](std::size_t i) {
          auto rng = key_.child(first + i).stream();
          std::vector<std::pair<double, double>> out(batch_);
          for (auto& p : out) {
            const auto s = model_.sample(rng);
            p = {s.r1, s.r2};
          }
          return out;
        },
        exec_);
    for (auto& f : fresh) batches_.push_back(std::move(f));
  }

  const KernelModel& model_;
  Key key_;
  std::size_t batch_;
  std::size_t batches_max_;
  Exec exec_;
  std::vector<std::vector<std::pair<double, double>>> batches_;
};

struct Look {
  int sign = 0;  // +1: m > 1, -1: m < 1, 0: undecided
  Estimate m;
};

Look look(ScaleCache& cache, double gamma, double z, bool use_all) {
  Moments acc;
  for (std::size_t b = 0; b < cache.batches_max(); ++b) {
    for (const auto& [r1, r2] : cache.batch(b)) {
      const double v = power(r1, gamma) + power(r2, gamma);
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "R^gamma is not finite");
      acc.add(v);
    }
    const auto e = acc.estimate();
    const double gap = e.mean - 1.0;
    if (!use_all && std::abs(gap) > z * e.std_error) return {gap > 0 ? 1 : -1, e};
  }
  const auto e = acc.estimate();
  const double gap = e.mean - 1.0;
  if (std::abs(gap) > z * e.std_error) return {gap > 0 ? 1 : -1, e};
  return {0, e};
}

}  // namespace

AlphaSolution solve_alpha(const KernelModel& model, double lo, double hi, Key key,
                          const AlphaSolveOptions& options) {
  require(std::isfinite(lo) && std::isfinite(hi) && 0.0 < lo && lo < hi && hi <= 2.0,
          "solve_alpha needs 0 < lo < hi <= 2");
  require(options.tol > 0.0, "solve_alpha needs tol > 0");

  AlphaSolution out;
  if (model.has_exact_m() && !options.force_monte_carlo) {
    out.exact = true;
    auto m = [&](double g) {
      ++out.evaluations;
      const double v = *model.exact_m(g);
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "closed-form m is not finite");
      return v;
    };
    if (!(m(lo) > 1.0 && m(hi) < 1.0)) {
      throw Error(ErrorCode::NoBracket, "m(gamma) - 1 does not change sign on [" + std::to_string(lo) +
                                            ", " + std::to_string(hi) + "]");
    }
    // Bisect to floating-point resolution; tol only bounds the acceptance test.
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double v = m(mid);
      if (v > 1.0) {
        lo = mid;
      } else if (v < 1.0) {
        hi = mid;
      } else {
        lo = hi = mid;
        break;
      }
    }
    out.alpha = 0.5 * (lo + hi);
    out.ci_lo = lo;
    out.ci_hi = hi;
    if (!(std::abs(m(out.alpha) - 1.0) <= options.tol)) {
      throw Error(ErrorCode::Inconclusive, "closed-form m is not monotone enough to reach tol");
    }
    return out;
  }

  require(options.batch >= 2 && options.budget >= options.batch, "solve_alpha: bad MC budget");
  ScaleCache cache(model, key, options.batch, options.budget, options.exec);
  auto sign_at = [&](double g) {
    ++out.evaluations;
    return look(cache, g, options.z, false).sign;
  };

  const int s_lo = sign_at(lo);
  const int s_hi = sign_at(hi);
  if (s_lo < 0 || s_hi > 0) {
    throw Error(ErrorCode::NoBracket, "estimated m(gamma) - 1 does not change sign on the bracket");
  }
  if (s_lo == 0 || s_hi == 0) {
    throw Error(ErrorCode::Inconclusive, "m at a bracket end cannot be separated from 1");
  }

  double mid = 0.5 * (lo + hi);
  bool undecided = false;
  while (hi - lo > options.tol) {
    mid = 0.5 * (lo + hi);
    const int s = sign_at(mid);
    if (s > 0) {
      lo = mid;
    } else if (s < 0) {
      hi = mid;
    } else {
      undecided = true;
      break;
    }
  }

  if (!undecided) {
    out.alpha = 0.5 * (lo + hi);
    out.ci_lo = lo;
    out.ci_hi = hi;
    out.draws = cache.drawn();
    return out;
  }
  if (hi - lo > options.max_ci_width) {
    throw Error(ErrorCode::Inconclusive,
                "MC noise cannot separate m from 1 on a bracket of width " + std::to_string(hi - lo));
  }

  // Locate the edges of the undecided region around mid.
  constexpr int kEdgeSteps = 14;
  double a = lo;
  double b = mid;
  for (int i = 0; i < kEdgeSteps; ++i) {
    const double c = 0.5 * (a + b);
    (sign_at(c) > 0 ? a : b) = c;
  }
  out.ci_lo = a;
  a = mid;
  b = hi;
  for (int i = 0; i < kEdgeSteps; ++i) {
    const double c = 0.5 * (a + b);
    (sign_at(c) < 0 ? b : a) = c;
  }
  out.ci_hi = b;

  // Point estimate: root of the full-budget estimate inside the interval.
  a = out.ci_lo;
  b = out.ci_hi;
  for (int i = 0; i < 40; ++i) {
    const double c = 0.5 * (a + b);
    ++out.evaluations;
    (look(cache, c, options.z, true).m.mean > 1.0 ? a : b) = c;
  }
  out.alpha = 0.5 * (a + b);
  out.draws = cache.drawn();
  return out;
}

// ---------------------------------------------------------------------------
// assumption checks

DerivativeReport check_A2(const KernelModel& model, double alpha, double h, std::size_t n, Key key,
                          Exec exec) {
  require(std::isfinite(alpha) && alpha > 0.0, "check_A2 needs alpha > 0");
  DerivativeReport out;
  if (model.has_exact_dm()) {
    const double d = *model.exact_dm(alpha);
    out.derivative = {d, 0.0, 1};
    out.exact = true;
    out.negative_and_finite = std::isfinite(d) && d < 0.0;
    return out;
  }
  require(h > 0.0 && alpha - h > 0.0, "check_A2 needs 0 < h < alpha");
  require(n >= 2, "check_A2 needs n >= 2");
  const bool richardson = alpha - 2.0 * h > 0.0;

  struct Parts {
    Moments d1;
    Moments d2;
  };
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  const auto parts = map_replicas(
      blocks,
      [&](std::size_t blk) {
        auto rng = key.child(blk).stream();
        const std::size_t count = std::min(kBlock, n - blk * kBlock);
        Parts p;
        for (std::size_t i = 0; i < count; ++i) {
          const auto s = model.sample(rng);
          auto f = [&](double g) { return power(s.r1, g) + power(s.r2, g); };
          const double d1 = (f(alpha + h) - f(alpha - h)) / (2.0 * h);
          if (!std::isfinite(d1)) throw Error(ErrorCode::NonFinite, "finite difference is not finite");
          p.d1.add(d1);
          if (richardson) p.d2.add((f(alpha + 2.0 * h) - f(alpha - 2.0 * h)) / (4.0 * h));
        }
        return p;
      },
      exec);
  Parts total;
  for (const auto& p : parts) {
    total.d1.merge(p.d1);
    total.d2.merge(p.d2);
  }
  auto est = total.d1.estimate();
  if (richardson) {
    // Central differences err by c h^2, so D(2h) - D(h) = 3 c h^2.
    out.truncation = std::abs(total.d2.mean() - total.d1.mean()) / 3.0;
    est.std_error = std::hypot(est.std_error, out.truncation);
  }
  out.derivative = est;
  out.negative_and_finite = std::isfinite(est.mean) && est.mean < 0.0;
  return out;
}

FrameInvarianceReport check_A3(const KernelModel& model, std::size_t n, double significance, Key key,
                               std::size_t permutations, Exec exec) {
  require(n >= 1000, "check_A3 needs n >= 1000");
  require(significance > 0.0 && significance < 1.0, "significance must lie in (0, 1)");
  require(permutations >= 1, "check_A3 needs at least one permutation");

  FrameInvarianceReport out;
  {
    auto rng = key.child("frame").stream();
    const Orthogonal3 f = haar_rotation(rng);
    out.o = f * planar_rotation(kTwoPi * rng.uniform());
    out.u = f * planar_rotation(kTwoPi * rng.uniform());
  }

  std::vector<double> xs(6 * n);
  std::vector<double> ys(6 * n);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  map_replicas(
      blocks,
      [&](std::size_t blk) {
        auto rng = key.child("draws").child(blk).stream();
        const std::size_t begin = blk * kBlock;
        const std::size_t end = std::min(n, begin + kBlock);
        for (std::size_t i = begin; i < end; ++i) {
          const auto s = model.sample(rng);
          const Vector3 x1 = scaled((out.o * s.o1).axis(), s.r1);
          const Vector3 x2 = scaled((out.o * s.o2).axis(), s.r2);
          const Vector3 y1 = scaled((out.u * s.o1).axis(), s.r1);
          const Vector3 y2 = scaled((out.u * s.o2).axis(), s.r2);
          for (int d = 0; d < 3; ++d) {
            xs[6 * i + d] = x1[d];
            xs[6 * i + 3 + d] = x2[d];
            ys[6 * i + d] = y1[d];
            ys[6 * i + 3 + d] = y2[d];
          }
        }
        return 0;
      },
      exec);

  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.max_paired_gap = std::max(out.max_paired_gap, std::abs(xs[i] - ys[i]));
  }
  out.test = energy_distance_test(xs, ys, 6, permutations, key.child("permutations"), exec);
  out.pass = out.test.p_value >= significance;
  return out;
}

WitnessReport check_A5(const KernelModel& model, std::size_t n, Key key, int max_depth,
                       double rotation_tol, double scale_tol) {
  require(n >= 1, "check_A5 needs n >= 1");
  require(max_depth >= 1, "check_A5 needs max_depth >= 1");

  std::vector<Similarity> elems;
  elems.reserve(n + 1);
  elems.push_back({});  // the root (1, I)
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = key.child(i).stream();
    const int depth = static_cast<int>(i % static_cast<std::size_t>(max_depth)) + 1;
    Similarity g;
    for (int d = 0; d < depth; ++d) {
      const auto s = model.sample(rng);
      const bool second = (rng.next_u64() >> 63) != 0;
      g = compose(g, Similarity{second ? s.r2 : s.r1, second ? s.o2 : s.o1});
    }
    if (g.scale > 0.0 && std::isfinite(g.scale)) elems.push_back(g);
  }

  std::sort(elems.begin(), elems.end(),
            [](const Similarity& a, const Similarity& b) { return a.rotation(0, 0) < b.rotation(0, 0); });

  WitnessReport out;
  out.elements = elems.size();
  for (std::size_t i = 0; i < elems.size(); ++i) {
    for (std::size_t j = i + 1; j < elems.size(); ++j) {
      if (elems[j].rotation(0, 0) - elems[i].rotation(0, 0) > rotation_tol) break;
      if (max_abs_diff(elems[i].rotation, elems[j].rotation) > rotation_tol) continue;
      const double ratio = elems[j].scale / elems[i].scale;
      if (ratio < 1.0 - scale_tol || ratio > 1.0 + scale_tol) {
        out.found = true;
        out.first = elems[i];
        out.second = elems[j];
        return out;
      }
    }
  }
  return out;
}

}  // namespace kbrw
