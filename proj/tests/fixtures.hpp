#pragma once

// Frozen seeds and calibrated thresholds. Values marked "pilot" come from
// tests/pilot.cpp (target kbrw_pilot, 10^4 seeds unless noted) and are not
// recomputed by the suite.

#include <cstdint>

namespace fixtures {

inline constexpr std::uint64_t kPilotSeed = 0x70696C6F74ull;
inline constexpr std::uint64_t kSuiteSeed = 0x7375697465ull;
inline constexpr std::uint64_t kAcceptanceSeed = 0x6163636570ull;

// pilot: sup_{|v|=12} L(v), independent-uniform family at alpha = 1.
// median 0.0199, 99% quantile 0.1120, only 88% of seeds below 0.05.
inline constexpr int kSupLLevel = 12;
inline constexpr double kSupLThreshold = 0.12;

// pilot: |Var W_12 - Var W_10| / Var W_10 = 0.0044 (oracle 0.0098).
inline constexpr double kVarianceStabilization = 0.05;

// pilot: t^0.5 P(|X| > t) on t in {1, 4, 16, 64} for the degenerate stable
// mixture is flat at sigma = 0.01 (0.0119, 0.0118, 0.0118, 0.0118) and still
// rising at sigma = 1 (0.71 to 1.12).
inline constexpr double kTailSigma = 0.01;

// pilot: default C for the Cauchy velocity law is 1.632 (empirical sup 2.371);
// the bound held on 1000 of 1000 seeds with either constant.
inline constexpr double kLevyRequiredFraction = 0.99;

// RK4 oracle: max |phi'''| for the Gaussian datum on the degenerate alpha = 1
// kernel, t in [0.45, 0.55], r in {0.25, ..., 4}.
inline constexpr double kOdeThirdDerivative = 0.02409;

}  // namespace fixtures
