#pragma once

// Density-matrix dynamics of the protocol: post-selected CNOT step S(rho)
// followed by the single-qubit unitary U(p).

#include <array>
#include <cmath>
#include <complex>
#include <sstream>

#include "bloch.hpp"
#include "complex_sphere.hpp"
#include "errors.hpp"

namespace iqp {

// Row-major 2x2 complex matrix.
struct Qubit2x2 {
  std::array<cplx, 4> m{};

  [[nodiscard]] cplx operator()(int row, int col) const { return m[2 * row + col]; }
  cplx& operator()(int row, int col) { return m[2 * row + col]; }

  static Qubit2x2 identity() { return {{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}}}; }

  [[nodiscard]] Qubit2x2 adjoint() const {
    return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
  }

  friend Qubit2x2 operator*(const Qubit2x2& x, const Qubit2x2& y) {
    return {{x.m[0] * y.m[0] + x.m[1] * y.m[2], x.m[0] * y.m[1] + x.m[1] * y.m[3],
             x.m[2] * y.m[0] + x.m[3] * y.m[2], x.m[2] * y.m[1] + x.m[3] * y.m[3]}};
  }

  friend bool operator==(const Qubit2x2&, const Qubit2x2&) = default;
};

// Largest entrywise modulus of x - y.
inline double max_abs_difference(const Qubit2x2& x, const Qubit2x2& y) {
  double d = 0.0;
  for (std::size_t i = 0; i < 4; ++i) d = std::max(d, std::abs(x.m[i] - y.m[i]));
  return d;
}

inline const Qubit2x2 pauli_x{{cplx{0.0}, cplx{1.0}, cplx{1.0}, cplx{0.0}}};

// rho = (I + uX + vY + wZ) / 2.
inline Qubit2x2 density_matrix(const BlochState& r) {
  return {{cplx{0.5 * (1.0 + r.w)}, cplx{0.5 * r.u, -0.5 * r.v}, cplx{0.5 * r.u, 0.5 * r.v},
           cplx{0.5 * (1.0 - r.w)}}};
}

// Bloch vector of a Hermitian, unit-trace matrix.
inline BlochState bloch_from_density(const Qubit2x2& rho) {
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

inline double purity(const BlochState& r) { return 0.5 * (1.0 + r.norm_squared()); }

// Pulls a Bloch vector that drifted past the unit sphere by rounding back onto
// it. Anything further out than 1e-10 is a bug.
inline BlochState clamp_to_ball(const BlochState& r) {
  const double n2 = r.norm_squared();
  if (n2 <= 1.0) return r;
  const double n = std::sqrt(n2);
  if (n - 1.0 >= 1e-10) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "Bloch vector left the unit ball: norm " << n << " at (" << r.u << ", " << r.v << ", "
        << r.w << ")";
    throw ConsistencyError(msg.str());
  }
  BlochState out{r.u / n, r.v / n, r.w / n};
  // The quotient can still round one ulp past the sphere.
  while (out.norm_squared() > 1.0) {
    out = {std::nextafter(out.u, 0.0), std::nextafter(out.v, 0.0), std::nextafter(out.w, 0.0)};
  }
  return out;
}

// S(rho) as a matrix: square the entries, renormalize by rho11^2 + rho22^2.
inline Qubit2x2 selection_matrix(const BlochState& r) {
  const Qubit2x2 rho = density_matrix(r);
  const cplx d11 = rho(0, 0) * rho(0, 0);
  const cplx d22 = rho(1, 1) * rho(1, 1);
  // >= 1/2 for any trace-one rho.
  const double trace = (d11 + d22).real();
  return {{d11 / trace, rho(0, 1) * rho(0, 1) / trace, rho(1, 0) * rho(1, 0) / trace, d22 / trace}};
}

inline BlochState selection_map(const BlochState& r) {
  return bloch_from_density(selection_matrix(r));
}

// U(p) = (1 + |p|^2)^(-1/2) [[1, p], [-conj(p), 1]].
inline Qubit2x2 unitary_from_p(const ProtocolParameter& p) {
  const cplx pv = p.value();
  const double scale = 1.0 / std::hypot(1.0, std::abs(pv));
  return {{cplx{scale}, scale * pv, -scale * std::conj(pv), cplx{scale}}};
}

// General SU(2) element [[cos xi e^{-i omega}, sin xi e^{-i phi}],
//                        [-sin xi e^{i phi},   cos xi e^{i omega}]].
// With omega = 0 and |xi| < pi/2 this is U(tan(xi) e^{-i phi}).
inline Qubit2x2 unitary_from_angles(double xi, double phi, double omega) {
  const double c = std::cos(xi);
  const double s = std::sin(xi);
  return {{c * std::polar(1.0, -omega), s * std::polar(1.0, -phi), -s * std::polar(1.0, phi),
           c * std::polar(1.0, omega)}};
}

// One protocol iteration rho -> U(p) S(rho) U(p)^dagger with U(p) precomputed.
class ProtocolStep {
 public:
  explicit ProtocolStep(const ProtocolParameter& p)
      : p_(p), u_(unitary_from_p(p)), u_dagger_(u_.adjoint()) {}

  [[nodiscard]] const ProtocolParameter& parameter() const { return p_; }
  [[nodiscard]] const Qubit2x2& unitary() const { return u_; }

  [[nodiscard]] BlochState operator()(const BlochState& r) const {
    const Qubit2x2 s = selection_matrix(r);
    return clamp_to_ball(bloch_from_density(u_ * s * u_dagger_));
  }

 private:
  ProtocolParameter p_;
  Qubit2x2 u_;
  Qubit2x2 u_dagger_;
};

inline BlochState mixed_step(const ProtocolParameter& p, const BlochState& r) {
  return ProtocolStep{p}(r);
}

// Closed-form update for p = i:
// (u, v, w) -> ((u^2 - v^2), 2w, -2uv) / (1 + w^2).
inline BlochState mixed_step_lattes(const BlochState& r) {
  const double d = 1.0 + r.w * r.w;
  return clamp_to_ball({(r.u * r.u - r.v * r.v) / d, 2.0 * r.w / d, -2.0 * r.u * r.v / d});
}

// Bloch-vector action of conjugation by X: (u, v, w) -> (u, -v, -w).
inline BlochState flip_x(const BlochState& r) { return {r.u, -r.v, -r.w}; }

// Bloch-vector action of complex conjugation: (u, v, w) -> (u, -v, w).
inline BlochState flip_conj(const BlochState& r) { return {r.u, -r.v, r.w}; }

}  // namespace iqp
