#pragma once

// Stationary solutions phi = Q+(phi, phi) built as mixtures
// E exp(-W_infinity K(r, o)) over frozen W proxies, and the checks around them.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbrw/charfn.hpp"
#include "kbrw/kernels.hpp"
#include "kbrw/kinetic.hpp"
#include "kbrw/martingale.hpp"

namespace kbrw {

struct SolutionMeta {
  std::string kind;  // "stable", "gaussian" or "custom"
  double alpha = 0.0;
  double scale = 0.0;  // sigma for stable mixtures, c for gaussian ones
  std::size_t n_W = 0;
  int n_big = 0;
  std::uint64_t seed = 0;
};

struct StationarySolution {
  CharFn char_fn;
  std::function<Vector3(Stream&)> sampler;
  SolutionMeta meta;
  /// Exponent per unit W: char_fn(r, o) = mean_k exp(-W_k kappa(r, o)).
  std::function<double(double, const Orthogonal3&)> kappa;
  std::vector<double> w_fine;    // proxies at depth n_big
  std::vector<double> w_coarse;  // same trees at depth n_big - 2

  bool is_mixture() const noexcept { return static_cast<bool>(kappa) && !w_fine.empty(); }
  VelocityLaw law() const { return {char_fn, sampler}; }

  /// Mixture over the coarse proxies; measures the finite-depth bias.
  double coarse_value(double r, const Orthogonal3& o) const;
};

/// A CharFn with no mixture structure (for example the constant 1).
StationarySolution plain_solution(CharFn phi);

/// E exp(-sigma W r^alpha) over n_W proxies of depth n_big. Refuses alpha = 1
/// and alpha outside (0, 2) with AlphaOutOfScope.
StationarySolution stable_mixture(const KernelModel& model, double alpha, double sigma, int n_big,
                                  std::size_t n_W, Key key, Exec exec = Exec::parallel);

/// E exp(-c W r^2 / 2) for a model with m(2) = 1. Throws AlphaOutOfScope if
/// m(2) differs from 1 by more than alpha_tol (plus 3 SE in MC mode).
StationarySolution gaussian_mixture(const KernelModel& model, double c, int n_big, std::size_t n_W, Key key,
                                    double alpha_tol = 1e-6, Exec exec = Exec::parallel);

/// Rebuilds a "stable" or "gaussian" mixture from stored proxies and metadata.
StationarySolution restore_mixture(const SolutionMeta& meta, std::vector<double> w_fine,
                                   std::vector<double> w_coarse);

struct FixedPointOptions {
  double z = 3.0;
  double atol = 0.0;
  /// Collision draws used for the mixture-induced standard error.
  std::size_t influence_draws = 4096;
};

/// q_plus(char_fn) against char_fn at every point, with the same collision
/// draws for all points. For mixtures the tolerance also carries the
/// finite-n_W error, sqrt(Var(a_k) / n_W) for the influence terms
/// a_k = E[f_k(x1) phi(x2) + phi(x1) f_k(x2)] - f_k(x0), and the allowance
/// |phi_{n_big} - phi_{n_big - 2}|.
ResidualReport fixed_point_residual(const StationarySolution& sol, const KernelModel& model,
                                    std::span<const FourierPoint> grid, std::size_t n_mc, Key key,
                                    const FixedPointOptions& options = {}, Exec exec = Exec::parallel);

struct InvariantK {
  std::function<Complex(double r, const Orthogonal3& o)> eval;
  double alpha = 0.0;
  std::string name;
};

/// sigma r^power; homogeneous of degree alpha only when power == alpha.
InvariantK power_K(double sigma, double alpha, double power);
inline InvariantK power_K(double sigma, double alpha) { return power_K(sigma, alpha, alpha); }

struct InvarianceReport {
  double max_residual = 0.0;
  double worst_scale = 1.0;
  double worst_r = 0.0;
  std::size_t pairs = 0;
  bool pass = false;
};

/// sup |K(r, o) - s^-alpha K(r s, o u)| over sampled (s, u) (random descents of
/// depth 1..4) and random (r, o) with log r uniform on [log r_lo, log r_hi].
InvarianceReport check_K_invariance(const InvariantK& K, const KernelModel& model, std::size_t n_pairs,
                                    Key key, double tol = 1e-12, double r_lo = 0.1, double r_hi = 10.0);

/// The functional V or Y in the stationary structure equations.
struct ProxySpec {
  enum class Kind { zero, w_proxy };
  Kind kind = Kind::zero;
  double c = 1.0;
};

struct StructureReport {
  DisintegrationReport sides;
  bool zero = false;
  bool mismatch = false;  // means differ beyond z SE or KS p below significance
};

/// V(o) = sum_{|v|=n} L(v)^2 [V]_v(o U(v)). The c W proxy is defined only for alpha = 2.
StructureReport check_V_equation(const ProxySpec& spec, const KernelModel& model, double alpha, int n,
                                 int n_big, std::size_t seeds, Key key, double z = 3.0,
                                 double significance = 0.01, Exec exec = Exec::parallel);

/// Y(o) = sum_{|v|=n} L(v) [Y]_v(o U(v)). A nonzero Y belongs to alpha = 1,
/// outside the stationary-solution theorem, and needs out_of_theorem_scope.
StructureReport check_Y_equation(const ProxySpec& spec, const KernelModel& model, double alpha, int n,
                                 int n_big, std::size_t seeds, Key key, bool out_of_theorem_scope,
                                 double z = 3.0, double significance = 0.01, Exec exec = Exec::parallel);

/// Sorted sample of |X|; exceedance probabilities for any threshold.
class EmpiricalTail {
 public:
  EmpiricalTail(const std::function<Vector3(Stream&)>& sampler, std::size_t n, Key key,
                Exec exec = Exec::parallel);

  std::size_t size() const noexcept { return norms_.size(); }
  /// Fraction of the sample with |X| > t.
  double exceedance(double t) const noexcept;
  /// sup over t > 0 of t^alpha exceedance(t), attained at the order statistics.
  double tail_constant(double alpha) const noexcept;

 private:
  std::vector<double> norms_;
};

struct TailReport {
  std::vector<double> t_grid;
  std::vector<double> probability;
  std::vector<double> scaled;     // t^alpha P(|X| > t)
  std::vector<double> scaled_se;  // t^alpha times the binomial SE
  double sup = 0.0;
  double C = 0.0;
  bool pass = false;  // sup <= C
  bool flat = false;  // every pair of scaled values within z combined SE
};

/// Empirical tail on t_grid (within [1, 1e3]). C defaults to twice the scaled
/// value at the smallest t. Throws MissingSampler without a sampler.
TailReport tail_check(const StationarySolution& sol, double alpha, std::span<const double> t_grid,
                      std::size_t n_samples, Key key, std::optional<double> C = std::nullopt,
                      double z = 3.0, Exec exec = Exec::parallel);
TailReport tail_check(const std::function<Vector3(Stream&)>& sampler, double alpha,
                      std::span<const double> t_grid, std::size_t n_samples, Key key,
                      std::optional<double> C = std::nullopt, double z = 3.0, Exec exec = Exec::parallel);

struct LevyBoundReport {
  std::vector<double> r_grid;
  std::vector<double> tail_sum;     // sum_v P(|X| > 1 / (2 r l(v)))
  std::vector<double> tail_sum_se;  // conservative binomial SE of the sum
  std::vector<double> bound;        // 2^alpha C r^alpha W_n(l)
  double W = 0.0;                   // sum_v l(v)^alpha
  bool holds = false;
};

/// Checks sum_v P(|X| > 1/(2 r l(v))) <= 2^alpha C r^alpha sum_v l(v)^alpha + z SE at every r.
LevyBoundReport levy_tail_bound_check(const EmpiricalTail& tail, double alpha, double C,
                                      std::span<const double> weights, std::span<const double> r_grid,
                                      double z = 3.0);

}  // namespace kbrw
