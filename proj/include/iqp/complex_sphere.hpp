#pragma once

// The map family f_p(z) = (z^2 - conj(p)) / (1 + p z^2) on the Riemann
// sphere, evaluated in homogeneous coordinates so that z = 0 and z = inf need
// no special handling.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>

#include "bloch.hpp"
#include "errors.hpp"

namespace iqp {

using cplx = std::complex<double>;

// Tag for the point at infinity of the extended complex plane.
struct Infinity {};
inline constexpr Infinity infinity{};

// Complex parameter p selecting the final single-qubit unitary U(p).
class ProtocolParameter {
 public:
  ProtocolParameter() = default;
  explicit ProtocolParameter(cplx p) : p_(p) {
    if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) {
      std::ostringstream msg;
      msg << "protocol parameter must be finite, got " << p;
      throw DomainError(msg.str());
    }
  }
  ProtocolParameter(double re, double im) : ProtocolParameter(cplx{re, im}) {}

  [[nodiscard]] cplx value() const { return p_; }
  [[nodiscard]] ProtocolParameter conjugate() const { return ProtocolParameter{std::conj(p_)}; }
  // -conj(p): the parameter of the map conjugate to f_p under z -> 1/z.
  [[nodiscard]] ProtocolParameter reflected() const { return ProtocolParameter{-std::conj(p_)}; }

  friend bool operator==(const ProtocolParameter&, const ProtocolParameter&) = default;

 private:
  cplx p_{0.0, 0.0};
};

// Point of the Riemann sphere z = b/a, stored as a unit vector (a, b) in C^2
// with a fixed phase: a real and >= 0, or a = 0 and b real > 0.
class SpherePoint {
 public:
  // (1, 0), i.e. z = 0.
  SpherePoint() = default;

  // Normalizes and fixes the phase of an arbitrary nonzero pair.
  static SpherePoint from_amplitudes(cplx a, cplx b) {
    const double scale = std::max({std::abs(a.real()), std::abs(a.imag()), std::abs(b.real()),
                                   std::abs(b.imag())});
    if (!(scale > 1e-300) || !std::isfinite(scale)) {
      throw DegenerateImage("homogeneous pair has no finite nonzero component");
    }
    a /= scale;
    b /= scale;
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    a /= n;
    b /= n;
    SpherePoint s;
    const double abs_a = std::abs(a);
    if (abs_a > 0.0) {
      const cplx unphase = std::conj(a) / abs_a;
      s.a_ = cplx{(unphase * a).real(), 0.0};
      s.b_ = unphase * b;
    } else {
      s.a_ = 0.0;
      s.b_ = std::abs(b);
    }
    return s;
  }

  [[nodiscard]] cplx a() const { return a_; }
  [[nodiscard]] cplx b() const { return b_; }

  [[nodiscard]] bool is_infinity() const { return a_ == cplx{0.0, 0.0}; }

  // Affine coordinate z = b/a; empty at infinity.
  [[nodiscard]] std::optional<cplx> z() const {
    if (is_infinity()) return std::nullopt;
    return b_ / a_;
  }

  friend bool operator==(const SpherePoint&, const SpherePoint&) = default;

 private:
  cplx a_{1.0, 0.0};
  cplx b_{0.0, 0.0};
};

inline SpherePoint point_from_z(cplx z) { return SpherePoint::from_amplitudes(cplx{1.0, 0.0}, z); }
inline SpherePoint point_from_z(Infinity) { return SpherePoint::from_amplitudes(0.0, 1.0); }

// Pure state a|0> + b|1> as a Bloch vector; z = (u + iv) / (1 + w).
inline BlochState bloch_from_point(const SpherePoint& s) {
  const cplx ab = s.a() * std::conj(s.b());
  return {2.0 * ab.real(), -2.0 * ab.imag(), std::norm(s.a()) - std::norm(s.b())};
}

// Inverse of bloch_from_point. Requires a unit vector (within 1e-9).
inline SpherePoint point_from_bloch(const BlochState& r) {
  const double n = r.norm();
  if (std::abs(n - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "point_from_bloch needs a unit vector, got norm " << n;
    throw DomainError(msg.str());
  }
  const cplx uv{r.u / n, r.v / n};  // u + iv = 2 conj(a) b
  const double w = r.w / n;
  // Pick the larger of |a|, |b| as the real reference component.
  if (w >= 0.0) {
    const double a = std::sqrt(0.5 * (1.0 + w));
    return SpherePoint::from_amplitudes(a, uv / (2.0 * a));
  }
  const double b = std::sqrt(0.5 * (1.0 - w));
  return SpherePoint::from_amplitudes(std::conj(uv) / (2.0 * b), b);
}

// f_p in homogeneous form: (a, b) -> (a^2 + p b^2, b^2 - conj(p) a^2).
inline SpherePoint apply_map(const ProtocolParameter& p, const SpherePoint& s) {
  const cplx pv = p.value();
  const cplx a2 = s.a() * s.a();
  const cplx b2 = s.b() * s.b();
  return SpherePoint::from_amplitudes(a2 + pv * b2, b2 - std::conj(pv) * a2);
}

// Spherical derivative |f_p'(z)| (1 + |z|^2) / (1 + |f_p(z)|^2).
//
// With F = (A, B) the homogeneous image of a unit vector (a, b), this equals
// 2|a||b|(1+|p|^2) / (|A|^2 + |B|^2), and |A|^2 + |B|^2 = (1+|p|^2)(|a|^4+|b|^4)
// because U(p) is unitary. The result is therefore independent of p and finite
// everywhere, including z = inf.
inline double spherical_derivative(const ProtocolParameter& /*p*/, const SpherePoint& s) {
  const double na = std::norm(s.a());
  const double nb = std::norm(s.b());
  return 2.0 * std::sqrt(na * nb) / (na * na + nb * nb);
}

// Critical points of every f_p: z = 0 and z = inf.
inline std::array<SpherePoint, 2> critical_points(const ProtocolParameter& /*p*/) {
  return {point_from_z(cplx{0.0, 0.0}), point_from_z(infinity)};
}

// Euclidean distance of the two points on the unit Bloch sphere, in [0, 2].
inline double chordal_distance(const SpherePoint& s1, const SpherePoint& s2) {
  return std::min(2.0, 2.0 * std::abs(s1.a() * s2.b() - s2.a() * s1.b()));
}

}  // namespace iqp
