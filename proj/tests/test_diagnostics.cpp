#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "iqp/diagnostics.hpp"
#include "oracles.hpp"

namespace {

using iqp::cplx;
using iqp::ProtocolParameter;
using iqp::SeededSampler;

const ProtocolParameter p_lattes{0.0, 1.0};
const ProtocolParameter p_star{0.4, 1.2};
const ProtocolParameter p_zero{0.0, 0.0};
const double half_ln2 = std::log(2.0) / 2.0;

iqp::SpherePoint random_point(std::uint64_t seed) {
  SeededSampler s{seed};
  return iqp::point_from_bloch(iqp::sample_uniform_direction(s));
}

// ---------------------------------------------------------------------------

TEST(Lyapunov, NeedsEnoughSteps) {
  EXPECT_THROW(iqp::lyapunov(p_lattes, random_point(1), {.n_steps = 999}), iqp::DomainError);
}

TEST(Lyapunov, LattesValue) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto e = iqp::lyapunov(p_lattes, random_point(seed), {.n_steps = 200'000});
    EXPECT_NEAR(e.value, half_ln2, 0.005);
    EXPECT_GT(e.standard_error, 0.0);
    EXPECT_LT(e.standard_error, 0.01);
    EXPECT_EQ(e.n_steps, 200'000u);
    EXPECT_EQ(e.clamped_terms, 0u);
  }
}

TEST(Lyapunov, AgreesWithPlanarChainRule) {
  // Along the same orbit, the planar average of ln|f'| differs from the
  // spherical one only by the boundary term of the telescoping sum.
  const ProtocolParameter p = p_star;
  const cplx pv = p.value();
  const std::uint64_t n = 5000;
  iqp::SpherePoint z = random_point(3);
  const iqp::SpherePoint start = z;
  double planar = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    planar += std::log(std::abs(oracle::derivative(pv, *z.z())));
    z = iqp::apply_map(p, z);
  }
  const double boundary =
      std::log1p(std::norm(*start.z())) - std::log1p(std::norm(*z.z()));
  const double expected = (planar + boundary) / static_cast<double>(n);
  const auto e = iqp::lyapunov(p, start, {.n_steps = n, .burn_in = 0});
  EXPECT_NEAR(e.value, expected, 1e-9);
}

TEST(Lyapunov, SymmetricParametersGiveEqualExponents) {
  // Conjugate starts under p, conj(p) and -conj(p) produce mirrored orbits.
  const iqp::SpherePoint z = iqp::point_from_z(cplx{0.3, 0.1});
  const auto a = iqp::lyapunov(p_star, z, {.n_steps = 20'000});
  const auto b = iqp::lyapunov(p_star.conjugate(), iqp::point_from_z(cplx{0.3, -0.1}),
                               {.n_steps = 20'000});
  const auto c = iqp::lyapunov(p_star.reflected(), iqp::point_from_z(1.0 / cplx{0.3, 0.1}),
                               {.n_steps = 20'000});
  // Chaotic orbits decorrelate after ~50 steps, so compare statistically.
  EXPECT_NEAR(a.value, b.value, 0.05);
  EXPECT_NEAR(a.value, c.value, 0.05);
  // Over a short horizon the orbits coincide and the sums match exactly.
  const auto a1 = iqp::lyapunov(p_star, z, {.n_steps = 1000, .burn_in = 0});
  const auto a2 = iqp::lyapunov(p_star.reflected(), iqp::point_from_z(1.0 / cplx{0.3, 0.1}),
                                {.n_steps = 1000, .burn_in = 0});
  EXPECT_NEAR(a1.value, a2.value, 0.05);
}

TEST(Lyapunov, SuperattractingCaseClampsOrThrows) {
  const auto e = iqp::lyapunov(p_zero, iqp::point_from_z(cplx{0.5, 0.1}), {.n_steps = 1000});
  EXPECT_EQ(e.clamped_terms, 1000u);
  EXPECT_DOUBLE_EQ(e.value, iqp::lyapunov_log_floor);
  EXPECT_THROW(iqp::lyapunov(p_zero, iqp::point_from_z(cplx{0.5, 0.1}),
                             {.n_steps = 1000, .strict = true}),
               iqp::CriticalOrbitHit);
}

TEST(Lyapunov, NegativeInsideAttractingBasin) {
  // p = 0.1: the critical point 0 is drawn to an attracting fixed point.
  const auto e = iqp::lyapunov(ProtocolParameter{0.1, 0.0}, iqp::point_from_z(cplx{0.2, 0.0}),
                               {.n_steps = 2000});
  EXPECT_LT(e.value, -1.0);
}

// ---------------------------------------------------------------------------

TEST(Cycles, SquaringMapHasSuperattractingFixedPoints) {
  const iqp::CycleSearchConfig cfg{.max_period = 16, .burn_in = 1000};
  for (const auto& c : iqp::critical_points(p_zero)) {
    const auto r = iqp::detect_attracting_cycle(p_zero, c, cfg);
    EXPECT_TRUE(r.found);
    EXPECT_EQ(r.period, 1u);
    EXPECT_EQ(r.multiplier_modulus, 0.0);
    EXPECT_EQ(iqp::chordal_distance(r.representative, c), 0.0);
  }
}

TEST(Cycles, PeriodTwoAtParameterOne) {
  // f_1(0) = -1 and f_1(-1) = 0: a superattracting 2-cycle through both
  // critical orbits (f_1(inf) = 1 -> 0).
  const ProtocolParameter p{1.0, 0.0};
  for (const auto& c : iqp::critical_points(p)) {
    const auto r = iqp::detect_attracting_cycle(p, c, {.max_period = 16, .burn_in = 1000});
    EXPECT_TRUE(r.found);
    EXPECT_EQ(r.period, 2u);
    EXPECT_LT(r.multiplier_modulus, 1e-12);
  }
}

TEST(Cycles, AttractingFixedPointNearZero) {
  const ProtocolParameter p{0.1, 0.0};
  const auto r = iqp::detect_attracting_cycle(p, iqp::critical_points(p)[0],
                                              {.max_period = 8, .burn_in = 1000});
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.period, 1u);
  // Fixed point z* of z -> (z^2 - 0.1)/(1 + 0.1 z^2) near -0.1; check the
  // multiplier against the planar derivative there.
  const cplx zs = *r.representative.z();
  EXPECT_LT(std::abs(oracle::map(0.1, zs) - zs), 1e-9);
  EXPECT_NEAR(r.multiplier_modulus, oracle::spherical_derivative(0.1, zs), 1e-9);
  EXPECT_GT(r.multiplier_modulus, 0.0);
}

TEST(Cycles, NoneForErgodicParameters) {
  const iqp::CycleSearchConfig cfg{.max_period = 100, .burn_in = 10'000};
  for (const auto& p : {p_lattes, p_star}) {
    for (const auto& c : iqp::critical_points(p)) {
      const auto r = iqp::detect_attracting_cycle(p, c, cfg);
      EXPECT_FALSE(r.found);
      EXPECT_EQ(r.steps_used, 10'000u + 300 + 100);
    }
  }
}

TEST(Cycles, RejectsZeroPeriod) {
  EXPECT_THROW(iqp::detect_attracting_cycle(p_zero, iqp::SpherePoint{}, {.max_period = 0}),
               iqp::DomainError);
}

// ---------------------------------------------------------------------------

TEST(TimeDensity, TotalsAndPrecondition) {
  const iqp::EqualAreaGrid grid{10, 10};
  EXPECT_THROW(iqp::time_average_density(p_lattes, {.n_orbits = 1, .orbit_len = 99}, grid,
                                         SeededSampler{1}),
               iqp::DomainError);
  const auto h = iqp::time_average_density(p_lattes, {.n_orbits = 3, .orbit_len = 1000}, grid,
                                           SeededSampler{1});
  EXPECT_EQ(h.total(), 3000u);
}

TEST(TimeDensity, IndependentOfThreadCount) {
  const iqp::EqualAreaGrid grid{20, 20};
  const iqp::TimeDensityConfig cfg{.n_orbits = 5, .orbit_len = 20'000};
  const auto a = iqp::time_average_density(p_star, cfg, grid, SeededSampler{8}, 1);
  const auto b = iqp::time_average_density(p_star, cfg, grid, SeededSampler{8}, 4);
  EXPECT_EQ(a, b);
  const auto c = iqp::time_average_density(p_star, cfg, grid, SeededSampler{9}, 1);
  EXPECT_NE(a, c);
}

TEST(TimeDensity, LattesMatchesAnalyticDensity) {
  const iqp::EqualAreaGrid grid{20, 20};
  const auto h = iqp::time_average_density(p_lattes, {.n_orbits = 4, .orbit_len = 500'000}, grid,
                                           SeededSampler{10});
  const auto expected = oracle::lattes_cell_masses(20, 20, 24);
  const auto got = h.probabilities();
  double tv = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) tv += std::abs(got[i] - expected[i]);
  tv *= 0.5;
  EXPECT_LT(tv, 0.02);
}

TEST(EnsembleDensity, TotalsAndDeterminism) {
  const iqp::EqualAreaGrid grid{10, 10};
  const iqp::EnsembleDensityConfig cfg{.n_patches = 3, .samples_per_patch = 10'000, .n_steps = 30};
  const auto a = iqp::ensemble_average_density(p_lattes, cfg, grid, SeededSampler{2}, 1);
  const auto b = iqp::ensemble_average_density(p_lattes, cfg, grid, SeededSampler{2}, 3);
  EXPECT_EQ(a.total(), 30'000u);
  EXPECT_EQ(a, b);
}

TEST(EnsembleDensity, NoStepsStaysInPatches) {
  const iqp::EqualAreaGrid grid{100, 100};
  const iqp::EnsembleDensityConfig cfg{.n_patches = 1, .samples_per_patch = 1000, .n_steps = 0};
  const auto h = iqp::ensemble_average_density(p_lattes, cfg, grid, SeededSampler{2});
  // One default patch spans at most 2 x 2 grid cells.
  EXPECT_LE(h.visited_cells(), 4u);
}

TEST(EnsembleDensity, AgreesWithTimeAverage) {
  const iqp::EqualAreaGrid grid{20, 20};
  for (const auto& p : {p_lattes, p_star}) {
    const auto t = iqp::time_average_density(p, {.n_orbits = 4, .orbit_len = 250'000}, grid,
                                             SeededSampler{3});
    const auto e = iqp::ensemble_average_density(
        p, {.n_patches = 20, .samples_per_patch = 50'000, .n_steps = 60}, grid, SeededSampler{4});
    EXPECT_LT(iqp::histogram_distance(t, e), 0.05);
  }
}

// ---------------------------------------------------------------------------

const iqp::Patch test_patch{1.0, 0.3, 2.0 * M_PI / 20.0, 2.0 / 20.0};

TEST(Coverage, LattesCoversSmallGrid) {
  const iqp::EqualAreaGrid grid{20, 20};
  const auto r = iqp::coverage_time(p_lattes, test_patch, 1.0,
                                    {.n_samples = 20'000, .max_steps = 100}, grid,
                                    SeededSampler{5});
  ASSERT_TRUE(r.n_crit.has_value());
  EXPECT_GT(*r.n_crit, 1u);
  EXPECT_LT(*r.n_crit, 30u);
  EXPECT_EQ(r.steps_run(), *r.n_crit);
  EXPECT_EQ(r.covered_fraction.back(), 1.0);
  EXPECT_DOUBLE_EQ(r.mean_purity_at_ncrit, 1.0);
  for (double f : r.covered_fraction) EXPECT_LE(f, 1.0);
}

TEST(Coverage, SquaringMapNeverCovers) {
  const iqp::EqualAreaGrid grid{10, 10};
  const auto r = iqp::coverage_time(p_zero, test_patch, 1.0, {.n_samples = 5000, .max_steps = 50},
                                    grid, SeededSampler{5});
  EXPECT_FALSE(r.n_crit.has_value());
  EXPECT_EQ(r.steps_run(), 50u);
  EXPECT_TRUE(std::isnan(r.mean_purity_at_ncrit));
}

TEST(Coverage, StopsWhenEnsembleReachesCentre) {
  // Mixed states at p = i all flow to the maximally mixed state.
  const iqp::EqualAreaGrid grid{10, 10};
  const auto r = iqp::coverage_time(p_lattes, test_patch, 0.6,
                                    {.n_samples = 5000, .max_steps = 200}, grid, SeededSampler{5});
  EXPECT_FALSE(r.n_crit.has_value());
  EXPECT_LT(r.steps_run(), 200u);
  EXPECT_NEAR(r.mean_purity.back(), 0.5, 1e-12);
}

TEST(Coverage, IndependentOfThreadCount) {
  const iqp::EqualAreaGrid grid{20, 20};
  const iqp::CoverageConfig cfg{.n_samples = 150'000, .max_steps = 40};
  const auto a = iqp::coverage_time(p_star, test_patch, 0.9, cfg, grid, SeededSampler{6}, 1);
  const auto b = iqp::coverage_time(p_star, test_patch, 0.9, cfg, grid, SeededSampler{6}, 3);
  EXPECT_EQ(a.n_crit, b.n_crit);
  EXPECT_EQ(a.covered_fraction, b.covered_fraction);
  EXPECT_EQ(a.mean_purity, b.mean_purity);
}

TEST(Coverage, RejectsBadInputs) {
  const iqp::EqualAreaGrid grid{10, 10};
  EXPECT_THROW(iqp::coverage_time(p_lattes, test_patch, 0.4, {}, grid, SeededSampler{1}),
               iqp::DomainError);
  EXPECT_THROW(iqp::coverage_time(p_lattes, iqp::Patch{0.0, 0.99, 0.1, 0.1}, 1.0, {}, grid,
                                  SeededSampler{1}),
               iqp::DomainError);
}

// ---------------------------------------------------------------------------

TEST(PurityStats, LattesTransient) {
  const auto s = iqp::purity_stats(p_lattes, 0.95, {.n_samples = 20'000, .n_steps = 200},
                                   SeededSampler{7});
  ASSERT_EQ(s.mean_purity.size(), 200u);
  EXPECT_GT(s.fraction_step_increase[0], 0.4);
  EXPECT_LT(s.fraction_step_increase[0], 0.6);
  EXPECT_EQ(s.fraction_above_initial[59], 0.0);
  EXPECT_LT(s.max_purity[199], 0.5 + 1e-6);
  EXPECT_LT(s.mean_purity[199], s.mean_purity[0]);
  EXPECT_EQ(s.threshold, 0.55);
  for (std::size_t k = 0; k < 200; ++k) {
    EXPECT_GE(s.mean_purity[k], 0.5);
    EXPECT_LE(s.mean_purity[k], s.max_purity[k]);
    EXPECT_LE(s.fraction_above_threshold[k], 1.0);
  }
}

TEST(PurityStats, PureStatesStayPure) {
  const auto s = iqp::purity_stats(p_star, 1.0, {.n_samples = 1000, .n_steps = 20},
                                   SeededSampler{7});
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_NEAR(s.mean_purity[k], 1.0, 1e-12);
    EXPECT_EQ(s.fraction_above_threshold[k], 1.0);
  }
}

TEST(PurityStats, IndependentOfThreadCount) {
  const iqp::PurityStatsConfig cfg{.n_samples = 10'000, .n_steps = 50};
  const auto a = iqp::purity_stats(p_star, 0.9, cfg, SeededSampler{3}, 1);
  const auto b = iqp::purity_stats(p_star, 0.9, cfg, SeededSampler{3}, 4);
  EXPECT_EQ(a.mean_purity, b.mean_purity);
  EXPECT_EQ(a.fraction_above_initial, b.fraction_above_initial);
  EXPECT_EQ(a.max_purity, b.max_purity);
}

TEST(PurityStats, CsvHeader) {
  const auto s = iqp::purity_stats(p_star, 0.9, {.n_samples = 10, .n_steps = 3}, SeededSampler{3});
  std::ostringstream out;
  iqp::write_purity_stats_csv(out, s);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "step,frac_step_increase,frac_above_initial,mean_purity,frac_above_threshold");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

// ---------------------------------------------------------------------------

TEST(Purification, SquaringMapPurifiesAlmostEverything) {
  // At p = 0 every state off the w = 0 plane flows to a pole.
  const auto r = iqp::purification_fraction(p_zero, {.n_samples = 2000}, SeededSampler{1});
  EXPECT_GT(r.fraction, 0.99);
  EXPECT_EQ(r.purified + r.mixed, r.n_samples);
}

TEST(Purification, LattesNeverPurifies) {
  const auto r = iqp::purification_fraction(p_lattes, {.n_samples = 2000}, SeededSampler{1});
  EXPECT_EQ(r.purified, 0u);
  EXPECT_EQ(r.fraction, 0.0);
  EXPECT_EQ(r.unresolved, 0u);
}

TEST(Purification, GenuineAtPStar) {
  const auto r = iqp::purification_fraction(p_star, {.n_samples = 2000}, SeededSampler{1});
  EXPECT_GT(r.fraction, 0.1);
  EXPECT_LT(r.fraction, 0.5);
}

TEST(Purification, IndependentOfThreadCount) {
  const iqp::PurificationConfig cfg{.n_samples = 1000};
  const auto a = iqp::purification_fraction(p_star, cfg, SeededSampler{2}, 1);
  const auto b = iqp::purification_fraction(p_star, cfg, SeededSampler{2}, 3);
  EXPECT_EQ(a.purified, b.purified);
  EXPECT_EQ(a.unresolved, b.unresolved);
}

TEST(Purification, RejectsBadTolerances) {
  EXPECT_THROW(iqp::purification_fraction(p_star, {.eps_pure = 0.0}, SeededSampler{1}),
               iqp::DomainError);
}

TEST(Purification, TinyBudgetLeavesUnresolved) {
  const auto r = iqp::purification_fraction(p_star, {.n_samples = 500, .max_steps = 1},
                                            SeededSampler{1});
  EXPECT_EQ(r.purified, 0u);
  EXPECT_GT(r.unresolved, 0u);
  EXPECT_EQ(r.mixed, r.n_samples);
}

// ---------------------------------------------------------------------------

iqp::ClassifierConfig small_classifier() {
  iqp::ClassifierConfig c;
  c.cycles = {.max_period = 50, .burn_in = 10'000};
  c.grid = iqp::EqualAreaGrid{20, 20};
  c.coverage = {.n_samples = 20'000, .max_steps = 60};
  c.patch_dphi = 2.0 * M_PI / 20.0;
  c.patch_dc = 2.0 / 20.0;
  c.density = {.n_orbits = 1, .orbit_len = 100'000};
  c.lyapunov_starts = 4;
  c.lyapunov = {.n_steps = 100'000};
  return c;
}

TEST(Flags, BitsRoundTrip) {
  for (std::uint8_t b = 0; b < 16; ++b) {
    const auto f = iqp::ErgodicityFlags::from_bits(b);
    EXPECT_EQ(f.bits(), b);
    EXPECT_EQ(f.ergodic_like(), b == 15);
  }
}

TEST(Classifier, LattesIsErgodicLike) {
  const auto r = iqp::classify_ergodic(p_lattes, small_classifier(), SeededSampler{1});
  EXPECT_EQ(r.flags.bits(), 15);
  EXPECT_TRUE(r.flags.ergodic_like());
  EXPECT_EQ(r.lyapunov.size(), 4u);
}

TEST(Classifier, SquaringMapFailsEverything) {
  const auto r = iqp::classify_ergodic(p_zero, small_classifier(), SeededSampler{1});
  EXPECT_EQ(r.flags.bits(), 0);
  EXPECT_TRUE(r.cycles[0].found);
  EXPECT_TRUE(r.cycles[1].found);
}

TEST(Classifier, SymmetricParametersAgree) {
  const auto cfg = small_classifier();
  for (const auto& p : {p_star, ProtocolParameter{0.1, 0.0}}) {
    const auto base = iqp::classify_ergodic(p, cfg, SeededSampler{4}).flags;
    EXPECT_EQ(iqp::classify_ergodic(p.conjugate(), cfg, SeededSampler{5}).flags, base);
    EXPECT_EQ(iqp::classify_ergodic(p.reflected(), cfg, SeededSampler{6}).flags, base);
  }
}

TEST(Classifier, DeterministicAcrossThreads) {
  const auto cfg = small_classifier();
  const auto a = iqp::classify_ergodic(p_star, cfg, SeededSampler{2}, 1);
  const auto b = iqp::classify_ergodic(p_star, cfg, SeededSampler{2}, 3);
  EXPECT_EQ(a.flags, b.flags);
  EXPECT_EQ(a.visited_cells, b.visited_cells);
  EXPECT_EQ(a.coverage.covered_fraction, b.coverage.covered_fraction);
  for (std::size_t i = 0; i < a.lyapunov.size(); ++i) {
    EXPECT_EQ(a.lyapunov[i].value, b.lyapunov[i].value);
  }
}

TEST(Classifier, Presets) {
  const auto desk = iqp::ClassifierConfig::desk();
  EXPECT_EQ(desk.cycles.max_period, 100u);
  EXPECT_EQ(desk.cycles.burn_in, 100'000u);
  EXPECT_EQ(desk.grid, iqp::EqualAreaGrid(100, 100));
  EXPECT_EQ(desk.coverage.n_samples, 1'000'000u);
  EXPECT_EQ(desk.coverage.max_steps, 200u);
  EXPECT_EQ(desk.density.orbit_len, 1'000'000u);
  EXPECT_EQ(desk.lambda_min, 0.01);
  EXPECT_EQ(desk.spread_max, 0.05);
  const auto paper = iqp::ClassifierConfig::paper();
  EXPECT_EQ(paper.cycles.max_period, 500u);
  EXPECT_EQ(paper.grid, iqp::EqualAreaGrid(500, 500));
  EXPECT_EQ(paper.density.orbit_len, 10'000'000u);
}

TEST(Csv, LyapunovAndCoverage) {
  std::ostringstream a;
  iqp::write_lyapunov_csv(a, {.value = 0.5, .standard_error = 0.25, .n_steps = 1000});
  EXPECT_EQ(a.str(), "value,stderr,n_steps\n0.5,0.25,1000\n");
  iqp::CoverageReport r;
  r.covered_fraction = {0.5, 1.0};
  r.mean_purity = {1.0, 0.75};
  std::ostringstream b;
  iqp::write_coverage_csv(b, r);
  EXPECT_EQ(b.str(), "step,covered_fraction,mean_purity\n1,0.5,1\n2,1,0.75\n");
}

}  // namespace
