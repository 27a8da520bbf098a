#pragma once

// Additive martingales W_n = m(gamma)^-n sum_{|v|=n} L(v)^gamma, their
// finite-depth proxies for W_infinity, and the multiplicative martingale
// M_n(r, o) = prod_{|v|=n} phi(r o L(v) U(v) e3).

#include <complex>
#include <cstddef>
#include <vector>

#include "kbrw/branching.hpp"
#include "kbrw/charfn.hpp"
#include "kbrw/kernels.hpp"
#include "kbrw/stats.hpp"

namespace kbrw {

double additive_W(const GenerationSlice& slice, double gamma, double m_gamma);

struct MartingalePath {
  std::vector<double> values;  // W_0 ... W_n
  double gamma = 0.0;
  Key key{};
};

/// W_0 ... W_n along one tree.
MartingalePath additive_path(const KernelModel& model, double gamma, double m_gamma, int n, Key key);

/// sum_{|v|=n_big} L(v)^alpha, the proxy for W_infinity when m(alpha) = 1.
double sample_W_infinity(const KernelModel& model, double alpha, int n_big, Key key);

/// W proxies at depths n_big and n_big - 2 (clamped at 0) from the same tree.
struct WProxyPair {
  double fine = 1.0;
  double coarse = 1.0;
};
WProxyPair sample_W_proxy_pair(const KernelModel& model, double alpha, int n_big, Key key);

/// One proxy per replica key key.child(i).
std::vector<double> sample_W_infinity_many(const KernelModel& model, double alpha, int n_big,
                                           std::size_t count, Key key, Exec exec = Exec::parallel);

struct BigginsReport {
  Estimate m;
  Estimate dm;
  Estimate moment_term;   // E[W1 log+ W1]
  Estimate drift_margin;  // m log m - gamma m'
  bool moment_ok = false;
  bool drift_ok = false;
};

BigginsReport biggins_conditions(const KernelModel& model, double gamma, std::size_t n_mc, Key key,
                                 double z = 3.0, Exec exec = Exec::parallel);

/// prod over the slice of phi(r L(v), o U(v)), accumulated as a sum of
/// principal logarithms. A zero factor gives exactly 0.
Complex multiplicative_M(const GenerationSlice& slice, const CharFn& phi, double r, const Orthogonal3& o);

/// M_0 ... M_n along one tree.
std::vector<Complex> multiplicative_path(const KernelModel& model, const CharFn& phi, double r,
                                         const Orthogonal3& o, int n, Key key);

struct PairedComplexEstimate {
  ComplexEstimate lhs;  // E M_{n+1}
  ComplexEstimate rhs;  // E M_n
};

/// E M_{n+1}(r, o) against E M_n(r, o) over independent trees.
PairedComplexEstimate martingale_property_check(const KernelModel& model, const CharFn& phi, double r,
                                                const Orthogonal3& o, int n, std::size_t seeds, Key key,
                                                Exec exec = Exec::parallel);

struct DisintegrationReport {
  Estimate lhs_mean;
  Estimate rhs_mean;
  Estimate lhs_variance;
  Estimate rhs_variance;
  TestResult ks;
  std::vector<double> lhs;
  std::vector<double> rhs;
};

/// lhs: W_{n+n_big}; rhs: sum_{|v|=n} L(v)^alpha W^(v)_{n_big} with proxies W^(v)
/// independent of the weights L(v). Both sides use exponent alpha with m(alpha) = 1.
/// The proxies are shared with the lhs tree, so the two samples are positively
/// correlated and a comparison assuming independence is conservative.
DisintegrationReport disintegration_check(const KernelModel& model, double alpha, int n, int n_big,
                                          std::size_t seeds, Key key, Exec exec = Exec::parallel);

/// Same comparison with separate exponents: lhs c W^(alpha)_{n+n_big}, rhs
/// sum_{|v|=n} L(v)^e c W^(alpha)_{n_big, v}.
DisintegrationReport weighted_disintegration(const KernelModel& model, double alpha, double outer_exponent,
                                             double c, int n, int n_big, std::size_t seeds, Key key,
                                             Exec exec = Exec::parallel);

}  // namespace kbrw
