#include "kbrw/branching.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>

namespace kbrw {

NodeId NodeId::from_index(int n, std::uint64_t index) {
  if (n < 0 || n > 64) throw Error(ErrorCode::DepthExceeded, "slice index paths are limited to 64 levels");
  NodeId id;
  for (int k = 1; k <= n; ++k) id = id.child(static_cast<int>((index >> (n - k)) & 1u) + 1);
  return id;
}

std::string NodeId::str() const {
  std::string s;
  s.reserve(static_cast<std::size_t>(depth_));
  for (int l = 0; l < depth_; ++l) s.push_back(at(l) == 1 ? '1' : '2');
  return s;
}

Key node_key(Key root, int n, std::uint64_t index) noexcept {
  Key k = root;
  for (int level = 1; level <= n; ++level) k = k.child(((index >> (n - level)) & 1u) + 1);
  return k;
}

namespace {

bool path_less(const NodeId& a, const NodeId& b) noexcept {
  const int common = std::min(a.depth(), b.depth());
  for (int l = 0; l < common; ++l) {
    if (a.at(l) != b.at(l)) return a.at(l) < b.at(l);
  }
  return a.depth() < b.depth();
}

Particle make_child(const Particle& parent, int j, double r, const Orthogonal3& o, bool with_rotations) {
  Particle c;
  c.id = parent.id.child(j);
  c.key = parent.key.child(static_cast<std::uint64_t>(j));
  c.scale = parent.scale * r;
  c.rotation = with_rotations ? parent.rotation * o : parent.rotation;
  c.birth = parent.death;
  c.death = c.birth + lifetime(c.key);
#ifndef NDEBUG
  if (with_rotations && c.id.depth() % 32 == 0) assert(c.rotation.residual() <= 1e-10);
#endif
  return c;
}

}  // namespace

Population simulate_alive(const KernelModel& model, double t, Key key, std::size_t cap, bool with_rotations) {
  require(std::isfinite(t) && t >= 0.0, "simulate_alive needs finite t >= 0");
  require(cap >= 1, "simulate_alive needs cap >= 1");

  Population pop;
  pop.t = t;
  Particle root;
  root.key = key;
  root.death = lifetime(key);

  auto later = [](const Particle& a, const Particle& b) { return a.death > b.death; };
  std::priority_queue<Particle, std::vector<Particle>, decltype(later)> pending(later);
  pending.push(root);
  std::size_t alive = 1;

  while (!pending.empty()) {
    if (pending.top().death > t) break;
    const Particle p = pending.top();
    pending.pop();
    if (++alive > cap) {
      throw Error(ErrorCode::CapExceeded,
                  "more than " + std::to_string(cap) + " particles alive before t = " + std::to_string(t));
    }
    auto rng = mark_stream(p.key);
    const CollisionSample s = model.sample(rng);
    pending.push(make_child(p, 1, s.r1, s.o1, with_rotations));
    pending.push(make_child(p, 2, s.r2, s.o2, with_rotations));
  }

  pop.particles.reserve(pending.size());
  while (!pending.empty()) {
    pop.particles.push_back(pending.top());
    pending.pop();
  }
  std::sort(pop.particles.begin(), pop.particles.end(),
            [](const Particle& a, const Particle& b) { return path_less(a.id, b.id); });
  return pop;
}

GenerationSlice simulate_generation(const KernelModel& model, int n, Key key, bool with_rotations) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "generation must be >= 0");
  if (n > kMaxSliceDepth) throw Error(ErrorCode::DepthExceeded, "generation slices are limited to n <= 24");
  GenerationSlice slice;
  slice.n = n;
  const std::size_t size = std::size_t{1} << n;
  slice.scales.resize(size);
  if (with_rotations) slice.rotations.resize(size);
  walk_tree(model, n, key, with_rotations,
            [&](int level, std::uint64_t index, double scale, const Orthogonal3& rotation) {
              if (level != n) return;
              slice.scales[index] = scale;
              if (with_rotations) slice.rotations[index] = rotation;
            });
  return slice;
}

GenerationSlice shifted_slice(const GenerationSlice& slice, int k, const KernelModel& model, Key key) {
  require(k >= 0, "shift must be >= 0");
  if (k == 0) return slice;
  const int n = slice.n + k;
  if (n > kMaxSliceDepth) throw Error(ErrorCode::DepthExceeded, "generation slices are limited to n <= 24");
  const bool with_rotations = slice.has_rotations();
  GenerationSlice out;
  out.n = n;
  out.scales.resize(std::size_t{1} << n);
  if (with_rotations) out.rotations.resize(out.scales.size());
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const Orthogonal3 base = with_rotations ? slice.rotations[i] : Orthogonal3::identity();
    auto store = [&](int level, std::uint64_t index, double scale, const Orthogonal3& rotation) {
      if (level != k) return;
      const std::size_t at = (i << k) + index;
      out.scales[at] = scale;
      if (with_rotations) out.rotations[at] = rotation;
    };
    detail::walk_node(model, k, 0, 0, node_key(key, slice.n, i), slice.scales[i], base, with_rotations,
                      store);
  }
  return out;
}

WeightedSpineStep spine_step(const KernelModel& model, double gamma, double m_gamma, Stream& rng) {
  require(std::isfinite(m_gamma) && m_gamma > 0.0, "spine_step needs finite m(gamma) > 0");
  const CollisionSample s = model.sample(rng);
  const bool second = (rng.next_u64() >> 63) != 0;
  WeightedSpineStep step;
  step.child = second ? 2 : 1;
  step.scale = second ? s.r2 : s.r1;
  step.rotation = second ? s.o2 : s.o1;
  step.weight = 2.0 * power(step.scale, gamma) / m_gamma;
  return step;
}

PairedEstimate many_to_one_check(const KernelModel& model, double gamma, double m_gamma, int n,
                                 const PathFunctional& h, std::size_t replicas, Key key, Exec exec) {
  require(n >= 0 && n <= kMaxSliceDepth, "many_to_one_check needs 0 <= n <= 24");
  require(replicas >= 2, "many_to_one_check needs at least two replicas");
  require(std::isfinite(m_gamma) && m_gamma > 0.0, "many_to_one_check needs finite m(gamma) > 0");
  const auto len = static_cast<std::size_t>(n) + 1;

  const auto spine = map_replicas(
      replicas,
      [&](std::size_t i) {
        auto rng = key.child("spine").child(i).stream();
        std::vector<double> scales(len, 1.0);
        std::vector<Orthogonal3> rotations(len);
        double weight = 1.0;
        for (std::size_t k = 1; k < len; ++k) {
          const auto step = spine_step(model, gamma, m_gamma, rng);
          scales[k] = scales[k - 1] * step.scale;
          rotations[k] = rotations[k - 1] * step.rotation;
          weight *= step.weight;
        }
        return weight * h(scales, rotations);
      },
      exec);

  const double norm = std::pow(m_gamma, -n);
  const auto branching = map_replicas(
      replicas,
      [&](std::size_t i) {
        std::vector<double> scales(len, 1.0);
        std::vector<Orthogonal3> rotations(len);
        double sum = 0.0;
        walk_tree(model, n, key.child("tree").child(i), true,
                  [&](int level, std::uint64_t, double scale, const Orthogonal3& rotation) {
                    scales[static_cast<std::size_t>(level)] = scale;
                    rotations[static_cast<std::size_t>(level)] = rotation;
                    if (level == n) sum += power(scale, gamma) * h(scales, rotations);
                  });
        return norm * sum;
      },
      exec);

  return {estimate_mean(spine), estimate_mean(branching)};
}

std::vector<RegionComparison> branching_property_check(const KernelModel& model, double t, double h,
                                                       const std::vector<Region>& regions,
                                                       std::size_t seeds, std::size_t cap, Key key,
                                                       Exec exec) {
  require(t >= 0.0 && h >= 0.0, "branching_property_check needs t, h >= 0");
  require(seeds >= 2, "branching_property_check needs at least two seeds");
  require(!regions.empty(), "branching_property_check needs at least one region");
  const std::size_t k = regions.size();

  struct Counts {
    std::vector<std::size_t> direct;
    std::vector<std::size_t> composed;
  };
  const auto counts = map_replicas(
      seeds,
      [&](std::size_t i) {
        const Key seed = key.child(i);
        Counts c{std::vector<std::size_t>(k, 0), std::vector<std::size_t>(k, 0)};
        for (const auto& p : simulate_alive(model, t + h, seed, cap).particles) {
          for (std::size_t r = 0; r < k; ++r) c.direct[r] += regions[r].contains(p.scale, p.rotation);
        }
        for (const auto& w : simulate_alive(model, t, seed, cap).particles) {
          // Fresh marks and lifetimes for the continuation, independent of the seed's own subtree.
          const auto sub = simulate_alive(model, h, w.key.child("continuation"), cap);
          for (const auto& q : sub.particles) {
            const double scale = w.scale * q.scale;
            const Orthogonal3 rotation = w.rotation * q.rotation;
            for (std::size_t r = 0; r < k; ++r) c.composed[r] += regions[r].contains(scale, rotation);
          }
        }
        return c;
      },
      exec);

  std::vector<RegionComparison> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<std::size_t> xs(seeds);
    std::vector<std::size_t> ys(seeds);
    std::vector<double> xd(seeds);
    std::vector<double> yd(seeds);
    bool identical = true;
    for (std::size_t i = 0; i < seeds; ++i) {
      xs[i] = counts[i].direct[r];
      ys[i] = counts[i].composed[r];
      xd[i] = static_cast<double>(xs[i]);
      yd[i] = static_cast<double>(ys[i]);
      identical = identical && xs[i] == ys[i];
    }
    RegionComparison cmp;
    cmp.name = regions[r].name;
    cmp.identical = identical;
    cmp.test = identical ? TestResult{0.0, 1.0, 0} : chi_square_two_sample(xs, ys);
    cmp.direct_mean = estimate_mean(xd);
    cmp.composed_mean = estimate_mean(yd);
    out.push_back(std::move(cmp));
  }
  return out;
}

}  // namespace kbrw
