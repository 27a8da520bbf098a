#pragma once

// Monte-Carlo solution of d/dt phi_t = Q+(phi_t, phi_t) - phi_t through
// phi_t(r o e3) = E prod_{v alive at t} phi_0(r o L(v) U(v) e3), with the
// residual checks that compare it against the equation itself.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "kbrw/branching.hpp"
#include "kbrw/charfn.hpp"
#include "kbrw/kernels.hpp"
#include "kbrw/stats.hpp"

namespace kbrw {

struct ResidualReport {
  std::vector<FourierPoint> points;
  std::vector<ComplexEstimate> lhs;
  std::vector<ComplexEstimate> rhs;
  std::vector<double> gap;        // |lhs - rhs| per point
  std::vector<double> tolerance;  // z * combined SE + atol + allowance per point
  std::vector<double> allowance;  // deterministic bias budget per point
  double max_abs_gap = 0.0;
  double max_sample_gap = 0.0;  // only for paired per-sample identities
  bool pass = false;
};

/// Fills gap, tolerance and pass from lhs, rhs and allowance. Empty
/// allowance means zero everywhere; `extra_se` adds per-point variance.
void finalize_report(ResidualReport& report, double z, double atol,
                     std::span<const double> extra_se = {});

/// E[phi(r o R1 O1 e3) phi(r o R2 O2 e3)].
ComplexEstimate q_plus(const CharFn& phi, const KernelModel& model, const FourierPoint& point,
                       std::size_t n_mc, Key key, Exec exec = Exec::parallel);

/// prod over the particles of phi0(r L, o U).
Complex alive_product(const CharFn& phi0, const Population& pop, double r, const Orthogonal3& o);

/// phi_t at every point. Replica i simulates the alive set at t from
/// key.child(i) once and evaluates all points on it.
std::vector<ComplexEstimate> solve_time(const CharFn& phi0, const KernelModel& model, double t,
                                        std::span<const FourierPoint> points, std::size_t n_replicas,
                                        std::size_t cap, Key key, Exec exec = Exec::parallel);

/// c for the c delta^2 allowance: ten times max |phi'''| / 6 from an RK4 solve
/// of the Gaussian datum on the degenerate alpha = 1 kernel, t in [0.45, 0.55],
/// r in {0.25, ..., 4}, where max |phi'''| = 0.0241.
inline constexpr double kOdeAllowanceC = 0.04;

struct OdeOptions {
  double z = 3.0;
  double atol = 0.0;
  /// Discretization allowance c delta^2 added to every point's tolerance.
  double allowance_c = 0.0;
};

/// lhs: (phi_{t+d} - phi_{t-d}) / 2d on shared trees; rhs: Q+(phi_t, phi_t) - phi_t
/// from three independent inner trees per replica.
ResidualReport ode_residual(const CharFn& phi0, const KernelModel& model, double t, double delta,
                            std::span<const FourierPoint> points, std::size_t n_replicas, std::size_t cap,
                            Key key, const OdeOptions& options = {}, Exec exec = Exec::parallel);

/// lhs: phi_{t+h}; rhs: E prod_{w alive at h} phi_t(r L(w), o U(w)) with phi_t
/// replaced by an average over n_inner fresh trees per outer particle.
ResidualReport semigroup_check(const CharFn& phi0, const KernelModel& model, double t, double h,
                               std::span<const FourierPoint> points, std::size_t n_replicas,
                               std::size_t n_inner, std::size_t cap, Key key, double z = 3.0,
                               double atol = 0.0, Exec exec = Exec::parallel);

/// Weighted nodes (l(v), u(v)) fed to the embedding identities.
struct WeightedNodes {
  std::span<const double> scales;
  std::span<const Orthogonal3> rotations;
};

WeightedNodes nodes_of(const GenerationSlice& slice);

struct EmbeddingSample {
  Complex matrix_form;   // exp(i tr((r o)^T sum_v Xt(v) (l(v) u(v))^T))
  Complex product_form;  // prod_v exp(i r <o l(v) u(v) e3, X(v)>)
};

/// Draws one X(v) per node and evaluates both forms on the same draws.
EmbeddingSample embedded_matrix_cf(const VelocityLaw& law, WeightedNodes nodes, const FourierPoint& point,
                                   Stream& rng);

enum class DrawMode { shared, independent };

/// Characteristic function of Y_n(l) = sum_v l(v) vec(Xt(v) u(v)^T) at r vec(o)
/// against prod_v phi(r o l(v) u(v) e3). Shared mode evaluates both on the
/// same draws and records the largest per-sample gap; independent mode
/// compares the MC estimate against the closed-form product.
ResidualReport vectorized_Yn_check(const VelocityLaw& law, WeightedNodes nodes,
                                   std::span<const FourierPoint> points, std::size_t n_mc, Key key,
                                   DrawMode mode, double z = 3.0, double atol = 1e-10,
                                   Exec exec = Exec::parallel);

/// Empirical characteristic function of n sampler draws against law.char_fn,
/// the same draws at every point. A point passes when the gap is at most
/// width / sqrt(n).
ResidualReport sampler_cf_check(const VelocityLaw& law, std::span<const FourierPoint> points, std::size_t n,
                                Key key, double width = 4.0, Exec exec = Exec::parallel);

/// r in {0.25, 0.5, 1, 2, 4} for o in {I and three fixed Haar draws}; o-major.
std::vector<FourierPoint> default_grid();

}  // namespace kbrw
