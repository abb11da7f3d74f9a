// Lyapunov exponent of the Lattes member (p = i) from a few random starts,
// next to the exact value ln(2)/2.

#include <cmath>
#include <iostream>

#include "iqp/iqp.hpp"

int main() {
  const iqp::ProtocolParameter p{0.0, 1.0};
  for (std::uint64_t start = 0; start < 4; ++start) {
    iqp::SeededSampler s{2024, start};
    const auto z0 = iqp::point_from_bloch(iqp::sample_uniform_direction(s));
    const auto e = iqp::lyapunov(p, z0, {.n_steps = 200'000});
    std::cout << "start " << start << ": lambda = " << e.value << " +- " << e.standard_error << "\n";
  }
  std::cout << "ln(2)/2   = " << std::log(2.0) / 2.0 << "\n";
}
