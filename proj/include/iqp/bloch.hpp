#pragma once

#include <cmath>

namespace iqp {

// Real Bloch vector (u, v, w) of a qubit density matrix
//   rho = (I + u X + v Y + w Z) / 2.
// Valid states lie in the closed unit ball.
struct BlochState {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;

  [[nodiscard]] double norm_squared() const { return u * u + v * v + w * w; }
  [[nodiscard]] double norm() const { return std::sqrt(norm_squared()); }

  friend bool operator==(const BlochState&, const BlochState&) = default;
};

}  // namespace iqp
