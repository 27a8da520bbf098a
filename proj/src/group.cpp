#include "kbrw/group.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "kbrw/error.hpp"

namespace kbrw {

Orthogonal3 Orthogonal3::from_entries(const Entries& entries, double tol) {
  const auto o = unchecked(entries);
  const double res = o.residual();
  if (!(res <= tol)) {
    throw Error(ErrorCode::InvalidArgument,
                "matrix is not orthogonal (residual " + std::to_string(res) + ")");
  }
  return o;
}

double Orthogonal3::determinant() const noexcept {
  const auto& a = m_;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

double Orthogonal3::residual() const noexcept {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m_[k * 3 + i] * m_[k * 3 + j];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double max_abs_diff(const Orthogonal3& a, const Orthogonal3& b) noexcept {
  double worst = 0.0;
  for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(a.entries()[i] - b.entries()[i]));
  return worst;
}

Orthogonal3 haar_rotation(Stream& rng) noexcept {
  double w = rng.normal();
  double x = rng.normal();
  double y = rng.normal();
  double z = rng.normal();
  const double inv = 1.0 / std::sqrt(w * w + x * x + y * y + z * z);
  w *= inv;
  x *= inv;
  y *= inv;
  z *= inv;
  return Orthogonal3::unchecked({1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
}

Orthogonal3 planar_rotation(double theta) noexcept {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Orthogonal3::unchecked({c, -s, 0, s, c, 0, 0, 0, 1});
}

Orthogonal3 axis_rotation(const Vector3& axis, double theta) {
  const double len = norm(axis);
  require(len > 0.0 && std::isfinite(len), "axis_rotation needs a nonzero finite axis");
  const Vector3 k = scaled(axis, 1.0 / len);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double t = 1.0 - c;
  return Orthogonal3::unchecked({t * k[0] * k[0] + c, t * k[0] * k[1] - s * k[2],
                                 t * k[0] * k[2] + s * k[1], t * k[0] * k[1] + s * k[2],
                                 t * k[1] * k[1] + c, t * k[1] * k[2] - s * k[0],
                                 t * k[0] * k[2] - s * k[1], t * k[1] * k[2] + s * k[0],
                                 t * k[2] * k[2] + c});
}

FourierPoint frame_from_direction(const Vector3& xi) noexcept {
  const double r = norm(xi);
  if (!(r > 0.0)) return {0.0, Orthogonal3::identity()};
  const Vector3 d = scaled(xi, 1.0 / r);

  // H = I - 2 w w^T / (w^T w). With d3 >= 0, w = e3 + d and -H maps e3 to d;
  // otherwise w = e3 - d and H does. Either way |w|^2 >= 2, so no
  // cancellation. A reflection of the first one or two columns restores
  // det = +1 while leaving the image of e3 untouched.
  const bool upper = d[2] >= 0.0;
  const Vector3 w = upper ? Vector3{d[0], d[1], 1.0 + d[2]} : Vector3{-d[0], -d[1], 1.0 - d[2]};
  const double f = 2.0 / dot(w, w);
  std::array<double, 9> h{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h[i * 3 + j] = (i == j ? 1.0 : 0.0) - f * w[i] * w[j];
  }
  // upper: o = H diag(1, 1, -1)  (equals -H diag(-1, -1, 1)); lower: o = H diag(-1, 1, 1).
  for (int i = 0; i < 3; ++i) {
    if (upper) {
      h[i * 3 + 2] = -h[i * 3 + 2];
    } else {
      h[i * 3 + 0] = -h[i * 3 + 0];
    }
  }
  return {r, Orthogonal3::unchecked(h)};
}

std::uint64_t rotation_hash(const Orthogonal3& o) noexcept {
  std::uint64_t h = 0x243F6A8885A308D3ull;
  for (double v : o.entries()) {
    const double canonical = v == 0.0 ? 0.0 : v;  // fold -0.0 into +0.0
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(canonical));
  }
  return h;
}

}  // namespace kbrw
