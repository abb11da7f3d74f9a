#pragma once

// Ergodicity and purification diagnostics for the protocol family:
// Lyapunov exponents, attracting-cycle search on critical orbits, time and
// ensemble visit densities, angular coverage time, purity statistics and the
// combined four-criteria classifier.
//
// Every parallel routine splits its work into fixed tasks, each with its own
// sampler substream, and reduces in task order. Results depend only on the
// inputs and the sampler, never on the thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <vector>

#include "complex_sphere.hpp"
#include "errors.hpp"
#include "mixed_state.hpp"
#include "parallel.hpp"
#include "sampling.hpp"
#include "text.hpp"

namespace iqp {

// ---------------------------------------------------------------------------
// Lyapunov exponent

struct LyapunovOptions {
  std::uint64_t n_steps = 1'000'000;
  std::uint64_t burn_in = 1'000;
  // Throw CriticalOrbitHit instead of clamping when the orbit lands on 0 or inf.
  bool strict = false;
};

struct LyapunovEstimate {
  double value = 0.0;           // nats per iteration
  double standard_error = 0.0;  // sample std of the log terms / sqrt(n)
  std::uint64_t n_steps = 0;
  std::uint64_t clamped_terms = 0;  // log terms replaced by ln(1e-15)
};

// ln(1e-15): floor for log terms where the derivative underflows.
inline const double lyapunov_log_floor = std::log(1e-15);

// Mean of ln q(z_k) over the orbit after burn-in, q the spherical derivative.
// The spherical correction factors telescope, so the limit equals the planar
// chain-rule definition while every term stays bounded.
inline LyapunovEstimate lyapunov(const ProtocolParameter& p, SpherePoint z,
                                 const LyapunovOptions& options = {}) {
  if (options.n_steps < 1000) {
    throw DomainError("lyapunov needs at least 1000 steps, got " +
                      std::to_string(options.n_steps));
  }
  auto check_critical = [&](const SpherePoint& s, std::uint64_t step) {
    if (options.strict && (std::abs(s.a()) < 1e-300 || std::abs(s.b()) < 1e-300)) {
      throw CriticalOrbitHit("orbit reached a critical point at step " + std::to_string(step));
    }
  };
  for (std::uint64_t k = 0; k < options.burn_in; ++k) {
    check_critical(z, k);
    z = apply_map(p, z);
  }
  LyapunovEstimate est;
  est.n_steps = options.n_steps;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t k = 0; k < options.n_steps; ++k) {
    check_critical(z, options.burn_in + k);
    const double q = spherical_derivative(p, z);
    double term;
    if (q < 1e-15) {
      term = lyapunov_log_floor;
      ++est.clamped_terms;
    } else {
      term = std::log(q);
    }
    const double delta = term - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (term - mean);
    z = apply_map(p, z);
  }
  const auto n = static_cast<double>(options.n_steps);
  est.value = mean;
  est.standard_error = std::sqrt(m2 / (n - 1.0)) / std::sqrt(n);
  return est;
}

// ---------------------------------------------------------------------------
// Attracting cycles

struct CycleSearchConfig {
  std::uint32_t max_period = 500;
  std::uint64_t burn_in = 100'000;
  std::uint64_t window = 0;  // 0 means 3 * max_period
  double tol = 1e-9;         // chordal recurrence tolerance
  double multiplier_tol = 1e-6;

  [[nodiscard]] std::uint64_t effective_window() const {
    return window == 0 ? 3ULL * max_period : window;
  }
};

struct CycleReport {
  bool found = false;
  std::uint32_t period = 0;
  double multiplier_modulus = 0.0;  // |(f^q)'| in the spherical metric
  SpherePoint representative;
  std::uint64_t steps_used = 0;
};

// After burn-in, looks for the smallest q <= max_period such that
// d(z_n, z_{n+q}) < tol over the whole verification window and the cycle
// multiplier is below 1 - multiplier_tol.
inline CycleReport detect_attracting_cycle(const ProtocolParameter& p, SpherePoint z,
                                           const CycleSearchConfig& config = {}) {
  if (config.max_period < 1) throw DomainError("max_period must be at least 1");
  for (std::uint64_t k = 0; k < config.burn_in; ++k) z = apply_map(p, z);
  const std::uint64_t window = config.effective_window();
  std::vector<SpherePoint> orbit;
  orbit.reserve(window + config.max_period);
  for (std::uint64_t k = 0; k < window + config.max_period; ++k) {
    orbit.push_back(z);
    z = apply_map(p, z);
  }
  CycleReport report;
  report.steps_used = config.burn_in + window + config.max_period;
  report.representative = orbit.back();
  for (std::uint32_t q = 1; q <= config.max_period; ++q) {
    bool recurrent = true;
    for (std::uint64_t n = 0; n < window && recurrent; ++n) {
      recurrent = chordal_distance(orbit[n], orbit[n + q]) < config.tol;
    }
    if (!recurrent) continue;
    double multiplier = 1.0;
    for (std::uint32_t k = 0; k < q; ++k) multiplier *= spherical_derivative(p, orbit[window + k]);
    if (multiplier < 1.0 - config.multiplier_tol) {
      report.found = true;
      report.period = q;
      report.multiplier_modulus = multiplier;
      report.representative = orbit[window];
      return report;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Visit densities

struct TimeDensityConfig {
  std::uint32_t n_orbits = 10;
  std::uint64_t orbit_len = 1'000'000;
  std::uint64_t burn_in = 1'000;
};

// Cells visited by the forward orbits of n_orbits uniformly random pure states.
inline Histogram time_average_density(const ProtocolParameter& p, const TimeDensityConfig& config,
                                      const EqualAreaGrid& grid, const SeededSampler& sampler,
                                      unsigned threads = 0) {
  if (config.orbit_len < grid.cell_count()) {
    throw DomainError("orbit length " + std::to_string(config.orbit_len) +
                      " is shorter than the cell count " + std::to_string(grid.cell_count()));
  }
  Histogram total{grid};
  std::mutex merge_mutex;
  parallel_for(config.n_orbits, threads, [&](std::size_t orbit) {
    SeededSampler s = sampler.substream(orbit);
    SpherePoint z = point_from_bloch(sample_uniform_direction(s));
    for (std::uint64_t k = 0; k < config.burn_in; ++k) z = apply_map(p, z);
    Histogram h{grid};
    for (std::uint64_t k = 0; k < config.orbit_len; ++k) {
      h.add_direction(bloch_from_point(z));
      z = apply_map(p, z);
    }
    // Integer addition commutes, so merge order does not matter.
    const std::scoped_lock lock{merge_mutex};
    total.merge(h);
  });
  return total;
}

struct EnsembleDensityConfig {
  std::uint32_t n_patches = 100;
  std::uint64_t samples_per_patch = 40'000;
  std::uint32_t n_steps = 100;
  double dphi = Patch::default_dphi;
  double dc = Patch::default_dc;
};

// Final positions of pure states drawn from random small patches and iterated
// n_steps times, summed over patches.
inline Histogram ensemble_average_density(const ProtocolParameter& p,
                                          const EnsembleDensityConfig& config,
                                          const EqualAreaGrid& grid, const SeededSampler& sampler,
                                          unsigned threads = 0) {
  constexpr std::size_t chunk = 8192;
  const std::size_t chunks_per_patch = chunk_count(config.samples_per_patch, chunk);
  std::vector<Patch> patches;
  for (std::uint32_t i = 0; i < config.n_patches; ++i) {
    SeededSampler s = sampler.substream(i).substream(0);
    patches.push_back(random_patch(s, config.dphi, config.dc));
  }
  Histogram total{grid};
  std::mutex merge_mutex;
  parallel_for(patches.size() * chunks_per_patch, threads, [&](std::size_t task) {
    const std::size_t patch = task / chunks_per_patch;
    const std::size_t c = task % chunks_per_patch;
    SeededSampler s = sampler.substream(patch).substream(1 + c);
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min<std::uint64_t>(begin + chunk, config.samples_per_patch);
    Histogram h{grid};
    for (std::uint64_t i = begin; i < end; ++i) {
      SpherePoint z = point_from_bloch(sample_patch(s, patches[patch], 1.0));
      for (std::uint32_t k = 0; k < config.n_steps; ++k) z = apply_map(p, z);
      h.add_direction(bloch_from_point(z));
    }
    const std::scoped_lock lock{merge_mutex};
    total.merge(h);
  });
  return total;
}

// ---------------------------------------------------------------------------
// Angular coverage

struct CoverageConfig {
  std::uint64_t n_samples = 1'000'000;
  std::uint32_t max_steps = 200;
};

struct CoverageReport {
  // First step whose point cloud hits every cell; empty when not covered.
  std::optional<std::uint32_t> n_crit;
  // Entry k describes step k + 1.
  std::vector<double> covered_fraction;
  std::vector<double> mean_purity;
  double mean_purity_at_ncrit = std::numeric_limits<double>::quiet_NaN();

  [[nodiscard]] std::uint32_t steps_run() const {
    return static_cast<std::uint32_t>(covered_fraction.size());
  }
};

// Minimum Bloch radius for which a state still has a direction.
inline constexpr double center_radius = 1e-14;

// Evolves an ensemble drawn from `patch` on the purity-P0 shell and records,
// per step, the fraction of cells hit by the current point cloud. Stops at the
// first full coverage, at max_steps, or once every member sits within
// center_radius of the super-attracting centre (coverage is then impossible).
inline CoverageReport coverage_time(const ProtocolParameter& p, const Patch& patch,
                                    double initial_purity, const CoverageConfig& config,
                                    const EqualAreaGrid& grid, const SeededSampler& sampler,
                                    unsigned threads = 0) {
  patch.validate();
  radius_for_purity(initial_purity);
  constexpr std::size_t chunk = 65536;
  const std::size_t n_chunks = chunk_count(config.n_samples, chunk);
  const std::size_t cells = grid.cell_count();
  const ProtocolStep step{p};

  std::vector<BlochState> states(config.n_samples);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    SeededSampler s = sampler.substream(c);
    const std::size_t end = std::min<std::size_t>((c + 1) * chunk, states.size());
    for (std::size_t i = c * chunk; i < end; ++i) states[i] = sample_patch(s, patch, initial_purity);
  });

  struct ChunkResult {
    std::vector<std::uint8_t> hit;
    double purity_sum = 0.0;
    std::uint64_t alive = 0;
  };
  std::vector<ChunkResult> results(n_chunks);
  for (auto& r : results) r.hit.assign(cells, 0);

  CoverageReport report;
  std::vector<std::uint8_t> hit(cells);
  for (std::uint32_t k = 1; k <= config.max_steps; ++k) {
    parallel_for(n_chunks, threads, [&](std::size_t c) {
      ChunkResult& r = results[c];
      std::fill(r.hit.begin(), r.hit.end(), std::uint8_t{0});
      r.purity_sum = 0.0;
      r.alive = 0;
      const std::size_t end = std::min<std::size_t>((c + 1) * chunk, states.size());
      for (std::size_t i = c * chunk; i < end; ++i) {
        states[i] = step(states[i]);
        r.purity_sum += purity(states[i]);
        if (states[i].norm() >= center_radius) {
          r.hit[grid.cell_index(states[i])] = 1;
          ++r.alive;
        }
      }
    });
    std::fill(hit.begin(), hit.end(), std::uint8_t{0});
    double purity_sum = 0.0;
    std::uint64_t alive = 0;
    for (const auto& r : results) {
      for (std::size_t i = 0; i < cells; ++i) hit[i] |= r.hit[i];
      purity_sum += r.purity_sum;
      alive += r.alive;
    }
    const auto covered = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    const double mean_purity = purity_sum / static_cast<double>(states.size());
    report.covered_fraction.push_back(static_cast<double>(covered) / static_cast<double>(cells));
    report.mean_purity.push_back(mean_purity);
    if (covered == cells) {
      report.n_crit = k;
      report.mean_purity_at_ncrit = mean_purity;
      break;
    }
    if (alive == 0) break;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Purity statistics

struct PurityStatsConfig {
  std::uint64_t n_samples = 100'000;
  std::uint32_t n_steps = 200;
  double threshold = 0.55;
};

// Per-iteration series; entry k describes step k + 1.
struct PurityStats {
  double threshold = 0.55;
  std::vector<double> fraction_step_increase;    // P_k > P_{k-1}
  std::vector<double> fraction_above_initial;    // P_k > P_0
  std::vector<double> mean_purity;
  std::vector<double> fraction_above_threshold;  // P_k > threshold
  std::vector<double> max_purity;
};

inline PurityStats purity_stats(const ProtocolParameter& p, double initial_purity,
                                const PurityStatsConfig& config, const SeededSampler& sampler,
                                unsigned threads = 0) {
  radius_for_purity(initial_purity);
  constexpr std::size_t chunk = 4096;
  const std::size_t n_chunks = chunk_count(config.n_samples, chunk);
  const std::size_t steps = config.n_steps;
  const ProtocolStep step{p};

  struct ChunkResult {
    std::vector<std::uint64_t> increase, above_initial, above_threshold;
    std::vector<double> purity_sum, purity_max;
  };
  std::vector<ChunkResult> results(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    ChunkResult& r = results[c];
    r.increase.assign(steps, 0);
    r.above_initial.assign(steps, 0);
    r.above_threshold.assign(steps, 0);
    r.purity_sum.assign(steps, 0.0);
    r.purity_max.assign(steps, 0.0);
    SeededSampler s = sampler.substream(c);
    const std::uint64_t end = std::min<std::uint64_t>((c + 1) * chunk, config.n_samples);
    for (std::uint64_t i = c * chunk; i < end; ++i) {
      BlochState state = sample_shell(s, initial_purity);
      const double p0 = purity(state);
      double previous = p0;
      for (std::size_t k = 0; k < steps; ++k) {
        state = step(state);
        const double pk = purity(state);
        r.increase[k] += pk > previous;
        r.above_initial[k] += pk > p0;
        r.above_threshold[k] += pk > config.threshold;
        r.purity_sum[k] += pk;
        r.purity_max[k] = std::max(r.purity_max[k], pk);
        previous = pk;
      }
    }
  });

  PurityStats stats;
  stats.threshold = config.threshold;
  const auto n = static_cast<double>(config.n_samples);
  for (std::size_t k = 0; k < steps; ++k) {
    std::uint64_t increase = 0, above_initial = 0, above_threshold = 0;
    double sum = 0.0, max = 0.0;
    for (const auto& r : results) {
      increase += r.increase[k];
      above_initial += r.above_initial[k];
      above_threshold += r.above_threshold[k];
      sum += r.purity_sum[k];
      max = std::max(max, r.purity_max[k]);
    }
    stats.fraction_step_increase.push_back(static_cast<double>(increase) / n);
    stats.fraction_above_initial.push_back(static_cast<double>(above_initial) / n);
    stats.fraction_above_threshold.push_back(static_cast<double>(above_threshold) / n);
    stats.mean_purity.push_back(sum / n);
    stats.max_purity.push_back(max);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Purification fraction

struct PurificationConfig {
  std::uint64_t n_samples = 10'000;
  std::uint32_t max_steps = 10'000;
  double eps_pure = 1e-6;
  double eps_mixed = 1e-6;
  // Consecutive steps with 1 - P < eps_pure before a trajectory counts as
  // purified. Near-neutral surfaces (p = i) produce brief excursions that
  // would otherwise be miscounted.
  std::uint32_t confirm_steps = 100;
};

struct PurificationResult {
  double fraction = 0.0;  // purified / n_samples
  std::uint64_t purified = 0;
  std::uint64_t mixed = 0;       // includes unresolved
  std::uint64_t unresolved = 0;  // still undecided at max_steps
  std::uint64_t n_samples = 0;
};

// Fraction of states drawn uniformly from the Bloch ball whose orbit converges
// to the sphere. A trajectory is mixed once P < 0.5 + eps_mixed (the centre
// is absorbing) and purified once 1 - P < eps_pure has held for
// confirm_steps consecutive steps.
inline PurificationResult purification_fraction(const ProtocolParameter& p,
                                                const PurificationConfig& config,
                                                const SeededSampler& sampler,
                                                unsigned threads = 0) {
  if (!(config.eps_pure > 0.0) || !(config.eps_mixed > 0.0)) {
    throw DomainError("purification tolerances must be positive");
  }
  constexpr std::size_t chunk = 256;
  const std::size_t n_chunks = chunk_count(config.n_samples, chunk);
  const ProtocolStep step{p};
  struct Counts {
    std::uint64_t purified = 0, mixed = 0, unresolved = 0;
  };
  std::vector<Counts> results(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    SeededSampler s = sampler.substream(c);
    Counts& r = results[c];
    const std::uint64_t end = std::min<std::uint64_t>((c + 1) * chunk, config.n_samples);
    for (std::uint64_t i = c * chunk; i < end; ++i) {
      BlochState state = sample_ball(s);
      std::uint32_t run = 0;
      bool resolved = false;
      for (std::uint32_t k = 0; k < config.max_steps && !resolved; ++k) {
        state = step(state);
        const double pk = purity(state);
        if (pk < 0.5 + config.eps_mixed) {
          ++r.mixed;
          resolved = true;
        } else if (1.0 - pk < config.eps_pure) {
          if (++run >= config.confirm_steps) {
            ++r.purified;
            resolved = true;
          }
        } else {
          run = 0;
        }
      }
      if (!resolved) ++r.unresolved;
    }
  });
  PurificationResult result;
  result.n_samples = config.n_samples;
  for (const auto& r : results) {
    result.purified += r.purified;
    result.mixed += r.mixed + r.unresolved;
    result.unresolved += r.unresolved;
  }
  result.fraction = config.n_samples == 0 ? 0.0
                                          : static_cast<double>(result.purified) /
                                                static_cast<double>(config.n_samples);
  return result;
}

// ---------------------------------------------------------------------------
// Four-criteria classifier

struct ErgodicityFlags {
  bool no_attracting_cycles = false;
  bool ensemble_spreads = false;
  bool orbit_dense = false;
  bool lyapunov_positive = false;

  [[nodiscard]] bool ergodic_like() const {
    return no_attracting_cycles && ensemble_spreads && orbit_dense && lyapunov_positive;
  }

  // Bit i set for flag i in the order above.
  [[nodiscard]] std::uint8_t bits() const {
    return static_cast<std::uint8_t>(no_attracting_cycles | ensemble_spreads << 1 |
                                     orbit_dense << 2 | lyapunov_positive << 3);
  }
  static ErgodicityFlags from_bits(std::uint8_t b) {
    return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
  }

  friend bool operator==(const ErgodicityFlags&, const ErgodicityFlags&) = default;
};

struct ClassifierConfig {
  CycleSearchConfig cycles{.max_period = 100, .burn_in = 100'000};
  EqualAreaGrid grid{100, 100};
  CoverageConfig coverage{.n_samples = 1'000'000, .max_steps = 200};
  double patch_dphi = Patch::default_dphi;
  double patch_dc = Patch::default_dc;
  TimeDensityConfig density{.n_orbits = 1, .orbit_len = 1'000'000, .burn_in = 1'000};
  std::uint32_t lyapunov_starts = 8;
  LyapunovOptions lyapunov{.n_steps = 1'000'000, .burn_in = 1'000};
  double lambda_min = 0.01;
  double spread_max = 0.05;  // (max - min) / |mean| over the starts

  static ClassifierConfig desk() { return {}; }

  static ClassifierConfig paper() {
    ClassifierConfig c;
    c.cycles = {.max_period = 500, .burn_in = 10'000'000};
    c.grid = EqualAreaGrid{500, 500};
    c.coverage = {.n_samples = 10'000'000, .max_steps = 200};
    c.density = {.n_orbits = 100, .orbit_len = 10'000'000, .burn_in = 1'000};
    c.lyapunov_starts = 100;
    c.lyapunov = {.n_steps = 10'000'000, .burn_in = 1'000};
    return c;
  }
};

struct ClassificationReport {
  ErgodicityFlags flags;
  std::array<CycleReport, 2> cycles;  // from z = 0 and z = inf
  Patch patch;
  CoverageReport coverage;
  std::size_t visited_cells = 0;
  std::vector<LyapunovEstimate> lyapunov;
};

inline ClassificationReport classify_ergodic(const ProtocolParameter& p,
                                             const ClassifierConfig& config,
                                             const SeededSampler& sampler, unsigned threads = 0) {
  ClassificationReport report;

  const auto critical = critical_points(p);
  for (std::size_t i = 0; i < critical.size(); ++i) {
    report.cycles[i] = detect_attracting_cycle(p, critical[i], config.cycles);
  }
  report.flags.no_attracting_cycles = !report.cycles[0].found && !report.cycles[1].found;

  SeededSampler patch_source = sampler.substream(2);
  report.patch = random_patch(patch_source, config.patch_dphi, config.patch_dc);
  report.coverage = coverage_time(p, report.patch, 1.0, config.coverage, config.grid,
                                  sampler.substream(3), threads);
  report.flags.ensemble_spreads = report.coverage.n_crit.has_value();

  const Histogram density =
      time_average_density(p, config.density, config.grid, sampler.substream(4), threads);
  report.visited_cells = density.visited_cells();
  report.flags.orbit_dense = report.visited_cells == config.grid.cell_count();

  report.lyapunov.resize(config.lyapunov_starts);
  parallel_for(config.lyapunov_starts, threads, [&](std::size_t i) {
    SeededSampler s = sampler.substream(5).substream(i);
    report.lyapunov[i] = lyapunov(p, point_from_bloch(sample_uniform_direction(s)), config.lyapunov);
  });
  if (!report.lyapunov.empty()) {
    double lo = report.lyapunov.front().value;
    double hi = lo;
    double sum = 0.0;
    for (const auto& e : report.lyapunov) {
      lo = std::min(lo, e.value);
      hi = std::max(hi, e.value);
      sum += e.value;
    }
    const double mean = sum / static_cast<double>(report.lyapunov.size());
    report.flags.lyapunov_positive =
        lo > config.lambda_min && (hi - lo) < config.spread_max * std::abs(mean);
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_lyapunov_csv(std::ostream& out, const LyapunovEstimate& e) {
  out << "value,stderr,n_steps\n"
      << format_real(e.value) << ',' << format_real(e.standard_error) << ',' << e.n_steps << '\n';
}

inline void write_coverage_csv(std::ostream& out, const CoverageReport& r) {
  out << "step,covered_fraction,mean_purity\n";
  for (std::size_t k = 0; k < r.covered_fraction.size(); ++k) {
    out << k + 1 << ',' << format_real(r.covered_fraction[k]) << ','
        << format_real(r.mean_purity[k]) << '\n';
  }
}

inline void write_purity_stats_csv(std::ostream& out, const PurityStats& s) {
  out << "step,frac_step_increase,frac_above_initial,mean_purity,frac_above_threshold\n";
  for (std::size_t k = 0; k < s.mean_purity.size(); ++k) {
    out << k + 1 << ',' << format_real(s.fraction_step_increase[k]) << ','
        << format_real(s.fraction_above_initial[k]) << ',' << format_real(s.mean_purity[k]) << ','
        << format_real(s.fraction_above_threshold[k]) << '\n';
  }
}

}  // namespace iqp
