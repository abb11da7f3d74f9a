#pragma once

// Seeded sampling of initial states and equal-area binning of the sphere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "binary_io.hpp"
#include "bloch.hpp"
#include "errors.hpp"

namespace iqp {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive 64-bit mix of two words.
inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

// Reproducible random source identified by (seed, stream). Each parallel task
// takes its own substream, so results do not depend on the worker count.
//
// Doubles are built from raw engine bits rather than std distributions, whose
// output differs between standard library implementations.
class SeededSampler {
 public:
  explicit SeededSampler(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(mix_seed(seed, stream)) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

  // Independent child stream; the parent's position is not consumed.
  [[nodiscard]] SeededSampler substream(std::uint64_t index) const {
    return SeededSampler{seed_, mix_seed(stream_, index)};
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

// Unit vector from azimuth phi and c = cos(theta).
inline BlochState direction_from_angles(double phi, double c) {
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return {s * std::cos(phi), s * std::sin(phi), c};
}

// Uniform on the unit sphere: phi ~ U[0, 2pi), c ~ U[-1, 1).
inline BlochState sample_uniform_direction(SeededSampler& s) {
  const double phi = two_pi * s.uniform();
  const double c = 2.0 * s.uniform() - 1.0;
  return direction_from_angles(phi, c);
}

// Bloch radius r with purity (1 + r^2)/2 = purity.
inline double radius_for_purity(double purity) {
  if (!(purity >= 0.5 && purity <= 1.0)) {
    std::ostringstream msg;
    msg << "purity must lie in [0.5, 1], got " << purity;
    throw DomainError(msg.str());
  }
  return std::sqrt(2.0 * purity - 1.0);
}

inline BlochState scaled(const BlochState& r, double factor) {
  return {factor * r.u, factor * r.v, factor * r.w};
}

// Uniform direction on the sphere of fixed purity.
inline BlochState sample_shell(SeededSampler& s, double purity) {
  const double r = radius_for_purity(purity);
  return scaled(sample_uniform_direction(s), r);
}

// Uniform with respect to volume in the closed Bloch ball.
inline BlochState sample_ball(SeededSampler& s) {
  const BlochState dir = sample_uniform_direction(s);
  return scaled(dir, std::cbrt(s.uniform()));
}

// Rectangle [phi0, phi0 + dphi] x [c0, c0 + dc] in (azimuth, cos theta)
// coordinates. Its solid angle is dphi * dc.
struct Patch {
  double phi0 = 0.0;
  double c0 = 0.0;
  double dphi = two_pi / 100.0;
  double dc = 2.0 / 100.0;

  // Default dimensions cover exactly 1/10000 of the sphere.
  static constexpr double default_dphi = two_pi / 100.0;
  static constexpr double default_dc = 2.0 / 100.0;

  [[nodiscard]] double solid_angle() const { return dphi * dc; }

  void validate() const {
    const bool ok = std::isfinite(phi0) && dphi >= 0.0 && dphi <= two_pi && dc >= 0.0 &&
                    dc <= 2.0 && c0 >= -1.0 && c0 + dc <= 1.0 + 1e-12;
    if (!ok) {
      std::ostringstream msg;
      msg << "invalid patch (phi0=" << phi0 << ", c0=" << c0 << ", dphi=" << dphi
          << ", dc=" << dc << ")";
      throw DomainError(msg.str());
    }
  }

  // Whether the direction of r falls inside the rectangle (phi taken mod 2pi).
  [[nodiscard]] bool contains(const BlochState& r, double tol = 1e-12) const {
    const double n = r.norm();
    if (n == 0.0) return false;
    const double c = r.w / n;
    if (c < c0 - tol || c > c0 + dc + tol) return false;
    if (dphi >= two_pi) return true;
    // Exactly at a pole the azimuth is undefined.
    if (std::hypot(r.u, r.v) <= tol * n) return true;
    double offset = std::fmod(std::atan2(r.v, r.u) - phi0, two_pi);
    if (offset < 0.0) offset += two_pi;
    return offset <= dphi + tol || offset >= two_pi - tol;
  }
};

// Patch of the given size at a uniformly random position.
inline Patch random_patch(SeededSampler& s, double dphi = Patch::default_dphi,
                          double dc = Patch::default_dc) {
  Patch patch{two_pi * s.uniform(), 0.0, dphi, dc};
  patch.c0 = -1.0 + (2.0 - dc) * s.uniform();
  patch.validate();
  return patch;
}

inline BlochState sample_patch(SeededSampler& s, const Patch& patch, double purity) {
  patch.validate();
  const double r = radius_for_purity(purity);
  const double phi = patch.phi0 + patch.dphi * s.uniform();
  const double c = std::clamp(patch.c0 + patch.dc * s.uniform(), -1.0, 1.0);
  return scaled(direction_from_angles(phi, c), r);
}

// Partition of the sphere into n_phi x n_c cells, uniform in azimuth and in
// c = cos(theta); every cell has solid angle 4 pi / (n_phi n_c).
class EqualAreaGrid {
 public:
  EqualAreaGrid(std::uint32_t n_phi, std::uint32_t n_c) : n_phi_(n_phi), n_c_(n_c) {
    if (n_phi == 0 || n_c == 0) throw DomainError("grid dimensions must be positive");
  }

  [[nodiscard]] std::uint32_t n_phi() const { return n_phi_; }
  [[nodiscard]] std::uint32_t n_c() const { return n_c_; }
  [[nodiscard]] std::size_t cell_count() const {
    return static_cast<std::size_t>(n_phi_) * n_c_;
  }
  [[nodiscard]] double cell_solid_angle() const {
    return 4.0 * std::numbers::pi / static_cast<double>(cell_count());
  }

  [[nodiscard]] std::size_t cell_id(std::uint32_t iphi, std::uint32_t ic) const {
    return static_cast<std::size_t>(ic) * n_phi_ + iphi;
  }
  [[nodiscard]] std::uint32_t iphi_of(std::size_t id) const {
    return static_cast<std::uint32_t>(id % n_phi_);
  }
  [[nodiscard]] std::uint32_t ic_of(std::size_t id) const {
    return static_cast<std::uint32_t>(id / n_phi_);
  }

  // Cell containing the direction of r.
  [[nodiscard]] std::size_t cell_index(const BlochState& r) const {
    const double n = r.norm();
    if (!(n >= 1e-14)) {
      std::ostringstream msg;
      msg << "direction undefined for a state at the ball centre (|r| = " << n << ")";
      throw CenterState(msg.str());
    }
    double phi = std::atan2(r.v, r.u);
    if (phi < 0.0) phi += two_pi;
    auto iphi = static_cast<std::int64_t>(std::floor(n_phi_ * phi / two_pi));
    iphi = ((iphi % n_phi_) + n_phi_) % n_phi_;
    const double c = r.w / n;
    auto ic = static_cast<std::int64_t>(std::floor(n_c_ * (c + 1.0) / 2.0));
    ic = std::clamp<std::int64_t>(ic, 0, static_cast<std::int64_t>(n_c_) - 1);
    return cell_id(static_cast<std::uint32_t>(iphi), static_cast<std::uint32_t>(ic));
  }

  friend bool operator==(const EqualAreaGrid&, const EqualAreaGrid&) = default;

 private:
  std::uint32_t n_phi_;
  std::uint32_t n_c_;
};

// Visit counts per grid cell.
class Histogram {
 public:
  explicit Histogram(const EqualAreaGrid& grid) : grid_(grid), counts_(grid.cell_count(), 0) {}

  [[nodiscard]] const EqualAreaGrid& grid() const { return grid_; }
  [[nodiscard]] const std::vector<std::uint64_t>& counts() const { return counts_; }
  [[nodiscard]] std::uint64_t total() const { return total_; }

  void add(std::size_t cell, std::uint64_t n = 1) {
    counts_.at(cell) += n;
    total_ += n;
  }

  void add_direction(const BlochState& r) { add(grid_.cell_index(r)); }

  void merge(const Histogram& other) {
    if (!(other.grid_ == grid_)) throw GridMismatch("cannot merge histograms on different grids");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
  }

  [[nodiscard]] std::size_t visited_cells() const {
    return static_cast<std::size_t>(
        std::count_if(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; }));
  }

  // Normalized cell masses. Throws on an empty histogram.
  [[nodiscard]] std::vector<double> probabilities() const {
    if (total_ == 0) throw DomainError("cannot normalize an empty histogram");
    std::vector<double> p(counts_.size());
    const double inv = 1.0 / static_cast<double>(total_);
    for (std::size_t i = 0; i < counts_.size(); ++i) p[i] = static_cast<double>(counts_[i]) * inv;
    return p;
  }

  [[nodiscard]] double max_probability() const {
    const auto p = probabilities();
    return *std::max_element(p.begin(), p.end());
  }

  // BLH1: magic, u32 n_phi, u32 n_c, u64 total, then u64 counts, ic outer.
  void write_blh1(std::ostream& out) const {
    binary::write_magic(out, "BLH1");
    binary::write_uint<std::uint32_t>(out, grid_.n_phi());
    binary::write_uint<std::uint32_t>(out, grid_.n_c());
    binary::write_uint<std::uint64_t>(out, total_);
    for (std::uint64_t c : counts_) binary::write_uint<std::uint64_t>(out, c);
  }

  static Histogram read_blh1(std::istream& in) {
    binary::expect_magic(in, "BLH1");
    const auto n_phi = binary::read_uint<std::uint32_t>(in, "n_phi");
    const auto n_c = binary::read_uint<std::uint32_t>(in, "n_c");
    if (n_phi == 0 || n_c == 0) throw CorruptFile("histogram grid has a zero dimension");
    const auto total = binary::read_uint<std::uint64_t>(in, "total");
    Histogram h{EqualAreaGrid{n_phi, n_c}};
    for (std::size_t i = 0; i < h.counts_.size(); ++i) {
      h.counts_[i] = binary::read_uint<std::uint64_t>(in, "count of cell " + std::to_string(i));
      h.total_ += h.counts_[i];
    }
    binary::expect_eof(in);
    if (h.total_ != total) {
      throw CorruptFile("histogram total " + std::to_string(total) +
                        " does not match the sum of counts " + std::to_string(h.total_));
    }
    return h;
  }

  void write_csv(std::ostream& out) const {
    out << "iphi,ic,count\n";
    for (std::size_t id = 0; id < counts_.size(); ++id) {
      out << grid_.iphi_of(id) << ',' << grid_.ic_of(id) << ',' << counts_[id] << '\n';
    }
  }

  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  EqualAreaGrid grid_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Total-variation distance of the normalized histograms, in [0, 1].
inline double histogram_distance(const Histogram& h1, const Histogram& h2) {
  if (!(h1.grid() == h2.grid())) throw GridMismatch("histograms live on different grids");
  const auto p1 = h1.probabilities();
  const auto p2 = h2.probabilities();
  double sum = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) sum += std::abs(p1[i] - p2[i]);
  return 0.5 * sum;
}

// Total-variation distance to the uniform area measure (1/K per cell).
inline double distance_to_uniform(const Histogram& h) {
  const auto p = h.probabilities();
  const double u = 1.0 / static_cast<double>(p.size());
  double sum = 0.0;
  for (double x : p) sum += std::abs(x - u);
  return 0.5 * sum;
}

}  // namespace iqp
