#pragma once

// The weighted branching process: alive sets of the continuous-time walk,
// full generation slices, and the spine walk of the many-to-one identity.
//
// Every node owns a Key derived from its parent's (child 1 and child 2). Its
// lifetime is drawn from key.child(0) and its collision marks from
// key.child(3), so a node's randomness does not depend on traversal order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kbrw/error.hpp"
#include "kbrw/group.hpp"
#include "kbrw/kernels.hpp"
#include "kbrw/parallel.hpp"
#include "kbrw/rng.hpp"
#include "kbrw/stats.hpp"

namespace kbrw {

inline constexpr int kMaxPathDepth = 128;
inline constexpr int kMaxSliceDepth = 24;

/// Path v1...vn in the binary tree, children numbered 1 and 2.
class NodeId {
 public:
  NodeId() = default;

  int depth() const noexcept { return depth_; }

  /// Child index (1 or 2) taken at `level`, 0-based.
  int at(int level) const noexcept {
    return static_cast<int>((bits_[level / 64] >> (level % 64)) & 1u) + 1;
  }

  NodeId child(int j) const {
    if (depth_ >= kMaxPathDepth) throw Error(ErrorCode::DepthExceeded, "node path longer than 128");
    NodeId c = *this;
    if (j == 2) c.bits_[depth_ / 64] |= std::uint64_t{1} << (depth_ % 64);
    ++c.depth_;
    return c;
  }

  /// The node at position `index` (left to right) of generation n.
  static NodeId from_index(int n, std::uint64_t index);

  /// "" for the root, otherwise digits such as "1221".
  std::string str() const;

  friend bool operator==(const NodeId&, const NodeId&) = default;

 private:
  std::array<std::uint64_t, 2> bits_{};
  int depth_ = 0;
};

/// Key of the node at `index` of generation n under `root`.
Key node_key(Key root, int n, std::uint64_t index) noexcept;

inline double lifetime(Key node) noexcept { return node.child(0).stream().exponential(); }
inline Stream mark_stream(Key node) noexcept { return node.child(3).stream(); }

struct Particle {
  NodeId id;
  double scale = 1.0;
  Orthogonal3 rotation{};
  double birth = 0.0;
  double death = 0.0;
  Key key{};
};

struct Population {
  double t = 0.0;
  std::vector<Particle> particles;
};

/// Alive set at time t. Splits are processed from a min-heap on death time;
/// the result is a deterministic function of (model, t, key). Throws
/// CapExceeded once more than `cap` particles would be alive.
Population simulate_alive(const KernelModel& model, double t, Key key, std::size_t cap,
                          bool with_rotations = true);

/// Generation n of the tree, 2^n nodes in left-to-right order: node i takes
/// child (bit n-k of i) + 1 at level k.
struct GenerationSlice {
  int n = 0;
  std::vector<double> scales;
  std::vector<Orthogonal3> rotations;  // empty for scale-only slices

  std::size_t size() const noexcept { return scales.size(); }
  bool has_rotations() const noexcept { return !rotations.empty(); }
  NodeId id(std::size_t i) const { return NodeId::from_index(n, i); }
};

/// Depth-first visit of every node up to `depth`. The visitor receives
/// (level, index within level, L, U); without rotations U stays the identity.
template <class Visit>
void walk_tree(const KernelModel& model, int depth, Key key, bool with_rotations, Visit&& visit);

GenerationSlice simulate_generation(const KernelModel& model, int n, Key key, bool with_rotations = true);

/// Extends every node of `slice` by k generations. Node i's subtree is drawn
/// from node_key(key, slice.n, i), so passing the key that produced the slice
/// reproduces simulate_generation(n + k) exactly, and any other key gives an
/// independent continuation.
GenerationSlice shifted_slice(const GenerationSlice& slice, int k, const KernelModel& model, Key key);

struct WeightedSpineStep {
  double scale = 1.0;
  Orthogonal3 rotation{};
  double weight = 1.0;
  int child = 1;
};

/// One increment of the spine walk: J uniform on {1, 2}, step (R_J, O_J),
/// weight 2 R_J^gamma / m(gamma).
WeightedSpineStep spine_step(const KernelModel& model, double gamma, double m_gamma, Stream& rng);

/// h evaluated on the path prefixes (index 0 is the root, index n the tip).
using PathFunctional =
    std::function<double(std::span<const double> scales, std::span<const Orthogonal3> rotations)>;

struct PairedEstimate {
  Estimate lhs;
  Estimate rhs;
};

/// lhs: spine estimate E[prod weights * h]; rhs: m^-n E[sum_{|v|=n} L(v)^gamma h(path to v)].
PairedEstimate many_to_one_check(const KernelModel& model, double gamma, double m_gamma, int n,
                                 const PathFunctional& h, std::size_t replicas, Key key,
                                 Exec exec = Exec::parallel);

/// Product region A x B with A = (scale_lo, scale_hi] and B given by a predicate.
struct Region {
  std::string name;
  double scale_lo = 0.0;
  double scale_hi = std::numeric_limits<double>::infinity();
  std::function<bool(const Orthogonal3&)> rotation;  // empty means all of O(3)

  bool contains(double scale, const Orthogonal3& u) const {
    return scale > scale_lo && scale <= scale_hi && (!rotation || rotation(u));
  }
};

struct RegionComparison {
  std::string name;
  TestResult test;
  Estimate direct_mean;
  Estimate composed_mean;
  bool identical = false;  // the two count samples agree seed by seed
};

/// Counts Z_{t+h}(A, B) directly and as the sum over w in the alive set at t of
/// fresh subtrees run for time h from (L(w), U(w)); both sides share the
/// seed's tree up to time t. Chi-square homogeneity per region.
std::vector<RegionComparison> branching_property_check(const KernelModel& model, double t, double h,
                                                       const std::vector<Region>& regions,
                                                       std::size_t seeds, std::size_t cap, Key key,
                                                       Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------

namespace detail {

template <class Visit>
void walk_node(const KernelModel& model, int depth, int level, std::uint64_t index, Key key,
               double scale, const Orthogonal3& rotation, bool with_rotations, Visit& visit) {
  visit(level, index, scale, rotation);
  if (level == depth) return;
  auto rng = mark_stream(key);
  const CollisionSample s = model.sample(rng);
  if (with_rotations) {
    walk_node(model, depth, level + 1, 2 * index, key.child(1), scale * s.r1, rotation * s.o1, true, visit);
    walk_node(model, depth, level + 1, 2 * index + 1, key.child(2), scale * s.r2, rotation * s.o2, true,
              visit);
  } else {
    walk_node(model, depth, level + 1, 2 * index, key.child(1), scale * s.r1, rotation, false, visit);
    walk_node(model, depth, level + 1, 2 * index + 1, key.child(2), scale * s.r2, rotation, false, visit);
  }
}

}  // namespace detail

template <class Visit>
void walk_tree(const KernelModel& model, int depth, Key key, bool with_rotations, Visit&& visit) {
  if (depth < 0) throw Error(ErrorCode::InvalidArgument, "negative tree depth");
  if (depth > kMaxSliceDepth) throw Error(ErrorCode::DepthExceeded, "tree walks are limited to depth 24");
  detail::walk_node(model, depth, 0, 0, key, 1.0, Orthogonal3::identity(), with_rotations, visit);
}

}  // namespace kbrw
