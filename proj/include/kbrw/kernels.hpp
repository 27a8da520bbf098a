#pragma once

// Laws of the collision tuple (R1, O1, R2, O2), the spectral function
// m(gamma) = E[R1^gamma + R2^gamma] and the assumption checks built on it.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kbrw/group.hpp"
#include "kbrw/parallel.hpp"
#include "kbrw/rng.hpp"
#include "kbrw/stats.hpp"

namespace kbrw {

struct CollisionSample {
  double r1 = 1.0;
  double r2 = 1.0;
  Orthogonal3 o1{};
  Orthogonal3 o2{};
};

/// r^gamma with 0^0 = 1.
inline double power(double r, double gamma) noexcept {
  return gamma == 0.0 ? 1.0 : std::pow(r, gamma);
}

/// Immutable, shareable description of a collision law. The sampler must be
/// a pure function of the stream it is handed.
class KernelModel {
 public:
  using Sampler = std::function<CollisionSample(Stream&)>;
  using Spectral = std::function<double(double)>;

  KernelModel(std::string name, Sampler sampler) : name_(std::move(name)), sampler_(std::move(sampler)) {}

  KernelModel& with_exact_m(Spectral m, Spectral dm) {
    exact_m_ = std::move(m);
    exact_dm_ = std::move(dm);
    return *this;
  }
  KernelModel& with_alpha_hint(double alpha) {
    alpha_hint_ = alpha;
    return *this;
  }
  /// Marks both rotations as planar (they fix e3).
  KernelModel& with_planar_rotations(bool planar = true) {
    planar_ = planar;
    return *this;
  }

  /// Same law with the closed forms dropped, so every check runs in MC mode.
  KernelModel monte_carlo_only() const {
    KernelModel copy = *this;
    copy.exact_m_ = nullptr;
    copy.exact_dm_ = nullptr;
    return copy;
  }

  CollisionSample sample(Stream& rng) const { return sampler_(rng); }

  bool has_exact_m() const noexcept { return static_cast<bool>(exact_m_); }
  bool has_exact_dm() const noexcept { return static_cast<bool>(exact_dm_); }
  std::optional<double> exact_m(double gamma) const {
    if (!exact_m_) return std::nullopt;
    return exact_m_(gamma);
  }
  std::optional<double> exact_dm(double gamma) const {
    if (!exact_dm_) return std::nullopt;
    return exact_dm_(gamma);
  }

  const std::string& name() const noexcept { return name_; }
  std::optional<double> alpha_hint() const noexcept { return alpha_hint_; }
  bool planar_rotations() const noexcept { return planar_; }

 private:
  std::string name_;
  Sampler sampler_;
  Spectral exact_m_;
  Spectral exact_dm_;
  std::optional<double> alpha_hint_;
  bool planar_ = false;
};

/// U uniform, R1 = U^(1/alpha), R2 = (1-U)^(1/alpha), independent uniform
/// planar rotations. R1^alpha + R2^alpha = 1 on every draw.
KernelModel dirichlet_scalar_kernel(double alpha);

/// R_j = U_j^(1/alpha) with U1, U2 independent; uniform planar rotations.
KernelModel independent_uniform_kernel(double alpha);

/// Replaces the rotations of `base` by independent Haar rotations, or one
/// shared Haar rotation when `shared` is set.
KernelModel isotropic_kernel(const KernelModel& base, bool shared = false);

/// How an atom produces a rotation.
struct RotationSpec {
  enum class Kind { fixed, uniform_planar, haar };
  Kind kind = Kind::fixed;
  Orthogonal3 matrix{};

  static RotationSpec fixed(const Orthogonal3& o) { return {Kind::fixed, o}; }
  static RotationSpec uniform_planar() { return {Kind::uniform_planar, {}}; }
  static RotationSpec haar() { return {Kind::haar, {}}; }

  Orthogonal3 draw(Stream& rng) const;
};

struct KernelAtom {
  double weight = 1.0;
  double r1 = 1.0;
  double r2 = 1.0;
  RotationSpec o1{};
  RotationSpec o2{};
};

/// Discrete law of the scales. With `closed_form` the spectral function is
/// the finite sum over atoms; otherwise the model is MC-only.
KernelModel atom_kernel(std::string name, std::vector<KernelAtom> atoms, bool closed_form = true);

/// R1 = R2 = 2^(-1/alpha) surely, identity rotations. m(gamma) = 2^(1 - gamma/alpha)
/// and every additive martingale is identically 1.
KernelModel degenerate_kernel(double alpha);

/// R1 = 1, O1 = I, R2 uniform on (0,1), O2 a fixed quarter turn about e1.
/// Violates the frame-invariance assumption; used to show check_A3 has power.
KernelModel frame_dependent_kernel();

/// Sample mean of R1^gamma + R2^gamma. Throws NonFinite on a non-finite power.
Estimate estimate_m(const KernelModel& model, double gamma, std::size_t n, Key key,
                    Exec exec = Exec::parallel);

struct AlphaSolveOptions {
  double tol = 1e-9;
  bool force_monte_carlo = false;
  std::size_t batch = 10000;
  std::size_t budget = 1000000;  // draws per evaluation point
  double z = 3.0;
  /// MC mode gives up with Inconclusive if the undecided region is wider than this.
  double max_ci_width = 0.25;
  Exec exec = Exec::parallel;
};

struct AlphaSolution {
  double alpha = 0.0;
  double ci_lo = 0.0;  // in exact mode the final bisection bracket
  double ci_hi = 0.0;
  bool exact = false;
  std::size_t evaluations = 0;
  std::size_t draws = 0;
};

/// Root of m(gamma) = 1 on [lo, hi]. Exact mode bisects the closed form.
/// MC mode bisects on common random numbers, deciding the sign of m - 1 only
/// when a z-sigma interval excludes 1; the returned interval is the set of
/// bisection points that could not be separated from 1.
AlphaSolution solve_alpha(const KernelModel& model, double lo, double hi, Key key,
                          const AlphaSolveOptions& options = {});

struct DerivativeReport {
  Estimate derivative;
  bool exact = false;
  /// Richardson estimate of the finite-difference truncation, already folded
  /// into derivative.std_error.
  double truncation = 0.0;
  bool negative_and_finite = false;
};

/// m'(alpha): closed form when available, else a common-random-number
/// central difference with step h.
DerivativeReport check_A2(const KernelModel& model, double alpha, double h, std::size_t n, Key key,
                          Exec exec = Exec::parallel);

struct FrameInvarianceReport {
  TestResult test;
  double max_paired_gap = 0.0;  // largest |x_i - y_i| over paired rows
  bool pass = false;
  Orthogonal3 o{};
  Orthogonal3 u{};
};

/// Energy-distance test of (o R1 O1 e3, o R2 O2 e3) against (u R1 O1 e3, u R2 O2 e3)
/// for a random pair o, u with o e3 = u e3. Both samples reuse the same
/// collision draws, so planar kernels give identical rows.
FrameInvarianceReport check_A3(const KernelModel& model, std::size_t n, double significance, Key key,
                               std::size_t permutations = 200, Exec exec = Exec::parallel);

struct WitnessReport {
  bool found = false;
  std::size_t elements = 0;
  Similarity first{};
  Similarity second{};
};

/// Heuristic search for two sampled products (L, U) with matching rotation
/// (max-norm 1e-6) and scales whose ratio lies outside [1 - 1e-6, 1 + 1e-6].
WitnessReport check_A5(const KernelModel& model, std::size_t n, Key key, int max_depth = 4,
                       double rotation_tol = 1e-6, double scale_tol = 1e-6);

}  // namespace kbrw
