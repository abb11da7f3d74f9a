#pragma once

// Reference computations written without the library, for cross-checks.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

// f_p(z) = (z^2 - conj(p)) / (1 + p z^2) in plain complex arithmetic.
inline cplx map(cplx p, cplx z) { return (z * z - std::conj(p)) / (1.0 + p * z * z); }

// f_p'(z) = 2 z (1 + |p|^2) / (1 + p z^2)^2.
inline cplx derivative(cplx p, cplx z) {
  const cplx d = 1.0 + p * z * z;
  return 2.0 * z * (1.0 + std::norm(p)) / (d * d);
}

// |f'(z)| (1 + |z|^2) / (1 + |f(z)|^2).
inline double spherical_derivative(cplx p, cplx z) {
  return std::abs(derivative(p, z)) * (1.0 + std::norm(z)) / (1.0 + std::norm(map(p, z)));
}

// Inverse stereographic projection onto the unit sphere.
inline std::array<double, 3> to_sphere(cplx z) {
  const double n = std::norm(z);
  return {2.0 * z.real() / (1.0 + n), 2.0 * z.imag() / (1.0 + n), (1.0 - n) / (1.0 + n)};
}

inline cplx from_sphere(double u, double v, double w) { return cplx{u, v} / (1.0 + w); }

// One protocol step computed from first principles: CNOT on rho (x) rho,
// project the target onto |0>, renormalize, then conjugate by U(p).
// Returns the Bloch vector.
inline std::array<double, 3> protocol_step(cplx p, double u, double v, double w) {
  using M2 = std::array<std::array<cplx, 2>, 2>;
  using M4 = std::array<std::array<cplx, 4>, 4>;
  const cplx I{0.0, 1.0};
  M2 rho{{{0.5 * (1.0 + w), 0.5 * (u - I * v)}, {0.5 * (u + I * v), 0.5 * (1.0 - w)}}};
  M4 big{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) big[2 * a + b][2 * c + d] = rho[a][c] * rho[b][d];
  // CNOT permutes |10> <-> |11>.
  const std::array<int, 4> perm{0, 1, 3, 2};
  M4 after{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) after[i][j] = big[perm[i]][perm[j]];
  M2 post{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) post[i][j] = after[2 * i][2 * j];
  const cplx tr = post[0][0] + post[1][1];
  for (auto& row : post)
    for (auto& x : row) x /= tr;
  const double s = 1.0 / std::sqrt(1.0 + std::norm(p));
  M2 U{{{s, s * p}, {-s * std::conj(p), s}}};
  M2 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out[i][j] += U[i][k] * post[k][l] * std::conj(U[j][l]);
  return {2.0 * out[1][0].real(), 2.0 * out[1][0].imag(), (out[0][0] - out[1][1]).real()};
}

// Cell masses of the invariant density of the p = i map, proportional to
// (1 + |z|^2)^2 / |z^4 - 1| against area, on an n_phi x n_c grid uniform in
// azimuth and cos(theta). Midpoint rule with `sub` x `sub` points per cell.
inline std::vector<double> lattes_cell_masses(int n_phi, int n_c, int sub) {
  std::vector<double> mass(static_cast<std::size_t>(n_phi) * n_c, 0.0);
  double total = 0.0;
  for (int ic = 0; ic < n_c; ++ic) {
    for (int ip = 0; ip < n_phi; ++ip) {
      double m = 0.0;
      for (int a = 0; a < sub; ++a) {
        for (int b = 0; b < sub; ++b) {
          const double c = -1.0 + 2.0 * (ic + (a + 0.5) / sub) / n_c;
          const double phi = 2.0 * std::numbers::pi * (ip + (b + 0.5) / sub) / n_phi;
          const double s = std::sqrt(1.0 - c * c);
          const cplx z = from_sphere(s * std::cos(phi), s * std::sin(phi), c);
          const double n = std::norm(z);
          m += (1.0 + n) * (1.0 + n) / std::abs(z * z * z * z - 1.0);
        }
      }
      mass[static_cast<std::size_t>(ic) * n_phi + ip] = m;
      total += m;
    }
  }
  for (double& x : mass) x /= total;
  return mass;
}

}  // namespace oracle
