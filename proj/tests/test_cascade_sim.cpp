#include <gtest/gtest.h>

#include "pairtomo/cascade_sim.hpp"
#include "pairtomo/decomposer.hpp"
#include "pairtomo/entanglement.hpp"
#include "oracles.hpp"

using namespace pairtomo;
namespace ts = testsupport;

using ts::coherence_quadrature;
using ts::kHbar;

TEST(Cascade, IdealCascadeIsBellState) {
  CascadeParams p;
  p.fss = 0.0;
  const auto rho = cascade_state(p);
  Mat4c bell = Mat4c::Zero();
  bell(0, 0) = bell(0, 3) = bell(3, 0) = bell(3, 3) = 0.5;
  EXPECT_EQ(rho.matrix(), bell);
  EXPECT_NEAR(concurrence(rho), 1.0, 1e-12);
}

TEST(Cascade, LargeSplittingDephases) {
  CascadeParams p;
  p.fss = 1e4;
  EXPECT_LT(concurrence(cascade_state(p)), 1e-3);
}

TEST(Cascade, TableParametersMatchQuadrature) {
  CascadeParams p;  // S = 7 ueV, tau_X = 1.2 ns
  const Complex z = cascade_coherence(p);
  const double x = p.fss * p.tau_x / kHbar;
  EXPECT_NEAR(std::abs(z), 0.5 / std::sqrt(1.0 + x * x), 1e-12);
  EXPECT_NEAR(std::abs(z), 0.039, 5e-4);
  EXPECT_NEAR(std::abs(z - coherence_quadrature(p.fss, p.tau_x, 0.0, 60.0 * p.tau_x)), 0.0, 1e-6);
}

TEST(Cascade, ClosedFormMatchesQuadratureGrid) {
  const double fss[] = {0.0, 1.0, 3.0, 7.0, 15.0};
  const double gd[] = {0.0, 0.1, 0.5, 1.0, 3.0};
  for (double s : fss)
    for (double g : gd) {
      CascadeParams p;
      p.fss = s;
      p.gamma_d = g;
      const Complex z = cascade_coherence(p);
      EXPECT_NEAR(std::abs(z - coherence_quadrature(s, p.tau_x, g, 60.0 * p.tau_x)), 0.0, 1e-9) << s << " " << g;
    }
}

TEST(Cascade, TimeGateMatchesQuadratureAndRecoversCoherence) {
  CascadeParams p;
  p.time_gate = 0.3;
  const Complex z = cascade_coherence(p);
  EXPECT_NEAR(std::abs(z - coherence_quadrature(p.fss, p.tau_x, 0.0, 0.3)), 0.0, 1e-9);
  CascadeParams ungated;
  EXPECT_GT(concurrence(cascade_state(p)), concurrence(cascade_state(ungated)));
}

TEST(Cascade, ConcurrenceMonotoneInSplittingAndDephasing) {
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      CascadeParams p;
      p.fss = 0.5 * i;
      p.gamma_d = 0.2 * j;
      const double c = concurrence(cascade_state(p));
      CascadeParams ps = p, pg = p;
      ps.fss += 0.5;
      pg.gamma_d += 0.2;
      EXPECT_LE(concurrence(cascade_state(ps)), c + 1e-12);
      EXPECT_LE(concurrence(cascade_state(pg)), c + 1e-12);
    }
}

TEST(Cascade, PhysicalAcrossParameters) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    CascadeParams p;
    p.fss = 30.0 * u(rng);
    p.tau_x = 0.1 + 3.0 * u(rng);
    p.gamma_d = 2.0 * u(rng);
    p.background = 0.99 * u(rng);
    const auto rho = cascade_state(p);
    EXPECT_GE(rho.report().min_eigenvalue, -1e-12);
    EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
  }
}

TEST(Cascade, ValidatesParameters) {
  CascadeParams p;
  p.tau_x = 0.0;
  EXPECT_THROW(cascade_state(p), ValidationError);
  p = {};
  p.background = 1.0;
  EXPECT_THROW(cascade_state(p), ValidationError);
  p = {};
  p.gamma_d = -1.0;
  EXPECT_THROW(cascade_state(p), ValidationError);
  p = {};
  p.fss = -1.0;
  EXPECT_THROW(cascade_state(p), ValidationError);
}

TEST(Simulate, NoiselessBellProbabilities) {
  const Vec4c phi = Vec4c(1, 0, 0, 1) / std::sqrt(2.0);
  const auto set = simulate_counts(TwoQubitPureState(phi).density_matrix(), 0, 0);
  EXPECT_EQ(set.kind(), StrengthKind::G2);
  EXPECT_NEAR(set.strength(0), 0.5, 1e-15);  // HH
  EXPECT_NEAR(set.strength(1), 0.0, 1e-15);  // HV
  EXPECT_NEAR(set.strength(4), 0.5, 1e-15);  // DD
}

TEST(Simulate, DeterministicForFixedSeed) {
  CascadeParams p;
  p.background = 0.1;
  const auto rho = cascade_state(p);
  const auto a = simulate_counts(rho, 100000, 42);
  const auto b = simulate_counts(rho, 100000, 42);
  const auto c = simulate_counts(rho, 100000, 43);
  bool differs = false;
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(a.strength(i), b.strength(i));
    differs = differs || a.strength(i) != c.strength(i);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.kind(), StrengthKind::Counts);
}

TEST(Simulate, ConvergesAtLargeN) {
  CascadeParams p;
  p.background = 0.2;
  const auto rho = cascade_state(p);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto set = simulate_counts(rho, 10000000, seed);
    for (std::size_t i = 0; i < 16; ++i) {
      const auto& b = kTomographyBases[i];
      const double mean = 1e7 * ts::born(rho.matrix(), to_char(b.xx), to_char(b.x));
      EXPECT_LE(std::abs(set.strength(i) - mean), 0.01 * mean) << b.label();
    }
  }
}

TEST(Simulate, ReferenceStateMleRoundTrip) {
  const auto rho = canonical_paper_state();
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    mean += fidelity(mle_reconstruct(simulate_counts(rho, 100000, seed)).state, rho);
  EXPECT_GE(mean / 20.0, 0.995);
}

TEST(Simulate, RejectsNonPhysical) {
  EXPECT_THROW(simulate_counts(TwoQubitDensityMatrix::raw(Mat4c::Identity()), 10, 1), ValidationError);
}
