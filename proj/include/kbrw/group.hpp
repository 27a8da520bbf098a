#pragma once

// O(3) and the similarity group R_{>0} x O(3).

#include <array>
#include <cmath>
#include <cstdint>

#include "kbrw/rng.hpp"

namespace kbrw {

using Vector3 = std::array<double, 3>;

inline double dot(const Vector3& a, const Vector3& b) noexcept {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vector3& a) noexcept { return std::sqrt(dot(a, a)); }
inline Vector3 scaled(const Vector3& a, double s) noexcept { return {a[0] * s, a[1] * s, a[2] * s}; }

/// Orthogonal 3x3 matrix, row-major. Products are not re-orthonormalized;
/// drift is measured with residual() instead.
class Orthogonal3 {
 public:
  using Entries = std::array<double, 9>;

  /// Identity.
  constexpr Orthogonal3() noexcept : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

  static constexpr Orthogonal3 identity() noexcept { return {}; }

  /// Validates ||O^T O - I||_max <= tol; throws InvalidArgument otherwise.
  static Orthogonal3 from_entries(const Entries& entries, double tol = 1e-12);

  /// Skips validation. Callers guarantee orthogonality (products, closed forms).
  static constexpr Orthogonal3 unchecked(const Entries& entries) noexcept {
    Orthogonal3 o;
    o.m_ = entries;
    return o;
  }

  constexpr double operator()(int row, int col) const noexcept { return m_[row * 3 + col]; }
  constexpr const Entries& entries() const noexcept { return m_; }

  Vector3 apply(const Vector3& v) const noexcept {
    return {m_[0] * v[0] + m_[1] * v[1] + m_[2] * v[2], m_[3] * v[0] + m_[4] * v[1] + m_[5] * v[2],
            m_[6] * v[0] + m_[7] * v[1] + m_[8] * v[2]};
  }

  Vector3 column(int c) const noexcept { return {m_[c], m_[3 + c], m_[6 + c]}; }

  /// o e_3, the direction the Fourier argument points along.
  Vector3 axis() const noexcept { return column(2); }

  Orthogonal3 transpose() const noexcept {
    return unchecked({m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]});
  }
  Orthogonal3 inverse() const noexcept { return transpose(); }

  double determinant() const noexcept;

  /// ||O^T O - I||_max
  double residual() const noexcept;

  friend Orthogonal3 operator*(const Orthogonal3& a, const Orthogonal3& b) noexcept {
    Entries r{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        r[i * 3 + j] = a.m_[i * 3] * b.m_[j] + a.m_[i * 3 + 1] * b.m_[3 + j] +
                       a.m_[i * 3 + 2] * b.m_[6 + j];
      }
    }
    return unchecked(r);
  }

  friend bool operator==(const Orthogonal3&, const Orthogonal3&) = default;

 private:
  Entries m_;
};

/// ||a - b||_max
double max_abs_diff(const Orthogonal3& a, const Orthogonal3& b) noexcept;

/// Element (s, u) of the similarity group.
struct Similarity {
  double scale = 1.0;
  Orthogonal3 rotation{};

  Similarity inverse() const noexcept { return {1.0 / scale, rotation.transpose()}; }
};

inline Similarity compose(const Similarity& a, const Similarity& b) noexcept {
  return {a.scale * b.scale, a.rotation * b.rotation};
}

/// Fourier argument xi = r o e_3.
struct FourierPoint {
  double r = 0.0;
  Orthogonal3 o{};

  Vector3 xi() const noexcept { return scaled(o.axis(), r); }
};

/// Haar-uniform element of SO(3) from a normalized Gaussian quaternion.
Orthogonal3 haar_rotation(Stream& rng) noexcept;

/// Rotation by theta in the (e1, e2)-plane; fixes e3 exactly.
Orthogonal3 planar_rotation(double theta) noexcept;

/// Rotation by theta about a unit axis (Rodrigues).
Orthogonal3 axis_rotation(const Vector3& axis, double theta);

/// Canonical frame for xi: r = |xi| and a proper rotation o with o e3 =
/// xi / r, built from a Householder reflection. xi = 0 gives (0, identity).
FourierPoint frame_from_direction(const Vector3& xi) noexcept;

/// Stable 64-bit hash of the entries, used to key CSV rows by rotation.
std::uint64_t rotation_hash(const Orthogonal3& o) noexcept;

}  // namespace kbrw
