#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is addressed by a 64-bit Key. A Key
// names a Philox4x32-10 stream; child keys are derived by hashing, so a tree
// node, a replica or a grid point can own its randomness independently of
// traversal order and thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace kbrw {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a, used to turn readable purpose labels into derivation tags.
constexpr std::uint64_t tag(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

class Stream;

struct Key {
  std::uint64_t bits = 0;

  constexpr Key child(std::uint64_t t) const noexcept {
    return Key{splitmix64(bits ^ splitmix64(t + 0x632BE59BD9B4E019ull))};
  }
  constexpr Key child(std::string_view label) const noexcept { return child(tag(label)); }

  Stream stream() const noexcept;

  friend constexpr bool operator==(Key, Key) = default;
};

/// The Philox4x32 block function with 10 rounds.
constexpr std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                     std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0};
    k[0] += 0x9E3779B9u;
    k[1] += 0xBB67AE85u;
  }
  return ctr;
}

/// Philox4x32-10 (Salmon et al. 2011) keyed by a Key, counter advancing per
/// 128-bit block.
class Stream {
 public:
  explicit Stream(Key key) noexcept : key_(key) {}

  Key key() const noexcept { return key_; }

  std::uint64_t next_u64() noexcept {
    if (buffered_ == 0) refill();
    return buffer_[--buffered_];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Unit-rate exponential via inverse CDF, -log(1 - U).
  double exponential() noexcept { return -std::log1p(-uniform()); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() noexcept {
    const auto ctr = philox4x32_10({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                    0x5EEDu, 0u},
                                   {static_cast<std::uint32_t>(key_.bits), static_cast<std::uint32_t>(key_.bits >> 32)});
    ++counter_;
    buffer_[0] = (std::uint64_t{ctr[1]} << 32) | ctr[0];
    buffer_[1] = (std::uint64_t{ctr[3]} << 32) | ctr[2];
    buffered_ = 2;
  }

  Key key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream Key::stream() const noexcept { return Stream(*this); }

}  // namespace kbrw
