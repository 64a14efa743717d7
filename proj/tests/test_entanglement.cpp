#include <gtest/gtest.h>

#include "pairtomo/decomposer.hpp"
#include "pairtomo/entanglement.hpp"
#include "test_support.hpp"

using namespace pairtomo;
namespace ts = testsupport;

namespace {

const Vec4c kPhiPlus = Vec4c(1.0, 0.0, 0.0, 1.0) / std::sqrt(2.0);

TwoQubitPureState table_state(std::size_t i) {
  return TwoQubitPureState::normalized(reference_eigenstate_coefficients()[i]);
}

}  // namespace

TEST(Concurrence, TrivialStates) {
  EXPECT_NEAR(concurrence(TwoQubitPureState(kPhiPlus).density_matrix()), 1.0, 1e-12);
  EXPECT_NEAR(concurrence(TwoQubitPureState(Vec4c(0, 1, 0, 0)).density_matrix()), 0.0, 1e-12);
  EXPECT_NEAR(concurrence(TwoQubitDensityMatrix::physical(Mat4c::Identity() / 4.0)), 0.0, 1e-12);
}

TEST(Concurrence, ReferenceState) {
  EXPECT_NEAR(concurrence(canonical_paper_state()), ReferenceValues{}.concurrence, 5e-3);
}

TEST(Concurrence, WernerFamilyClosedForm) {
  for (int k = 0; k <= 20; ++k) {
    const double p = k / 20.0;
    const Mat4c m = p * kPhiPlus * kPhiPlus.adjoint() + (1.0 - p) * Mat4c::Identity() / 4.0;
    EXPECT_NEAR(concurrence(TwoQubitDensityMatrix::physical(m)), std::max(0.0, (3.0 * p - 1.0) / 2.0), 1e-10)
        << p;
  }
}

TEST(Concurrence, PureStatesMatchDeterminant) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    const Vec4c v = ts::random_pure(rng);
    const double expect = 2.0 * std::abs(v(0) * v(3) - v(1) * v(2));
    EXPECT_NEAR(concurrence(TwoQubitPureState(v).density_matrix()), expect, 1e-10);
  }
}

TEST(Concurrence, LocalUnitaryInvariance) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 20; ++t) {
    const Mat4c m = ts::random_density(rng, 2);
    const Mat4c u = ts::random_local_unitary(rng);
    const double c0 = concurrence(TwoQubitDensityMatrix::physical(m));
    const double c1 = concurrence(TwoQubitDensityMatrix::physical(u * m * u.adjoint()));
    EXPECT_NEAR(c0, c1, 1e-10);
  }
}

TEST(Concurrence, RangeAndTangle) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 50; ++t) {
    const auto rho = TwoQubitDensityMatrix::physical(ts::random_density(rng, 1 + t % 4));
    const double c = concurrence(rho);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(tangle(rho), c * c, 1e-15);
  }
}

TEST(Concurrence, RejectsNonPhysical) {
  EXPECT_THROW(concurrence(TwoQubitDensityMatrix::raw(Mat4c::Identity())), ValidationError);
}

TEST(Eof, FormulaValues) {
  EXPECT_NEAR(eof_from_concurrence(0.0), 0.0, 1e-15);
  EXPECT_NEAR(eof_from_concurrence(1.0), 1.0, 1e-15);
  EXPECT_NEAR(eof_from_concurrence(0.145), ReferenceValues{}.eof, 5e-4);
  EXPECT_THROW(eof_from_concurrence(1.1), ValidationError);
  EXPECT_THROW(eof_from_concurrence(-0.1), ValidationError);
}

TEST(Eof, MonotoneInConcurrence) {
  double prev = -1.0;
  for (int k = 0; k <= 1000; ++k) {
    const double e = eof_from_concurrence(k / 1000.0);
    EXPECT_GT(e, prev);
    prev = e;
  }
}

TEST(Entropy, TrivialStates) {
  EXPECT_NEAR(entanglement_entropy(TwoQubitPureState(kPhiPlus)), 1.0, 1e-12);
  EXPECT_NEAR(entanglement_entropy(TwoQubitPureState(Vec4c(1, 0, 0, 0))), 0.0, 1e-12);
}

TEST(Entropy, TableEigenstates) {
  const ReferenceValues ref;
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(entanglement_entropy(table_state(i)), ref.eigenstate_entropies[i], 5e-4) << i;
}

TEST(Entropy, RouteEquivalence) {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 50; ++t) {
    const Vec4c v = ts::random_pure(rng);
    const TwoQubitPureState psi(v);
    const double via_schmidt = entanglement_entropy(psi);
    const double via_concurrence = eof_from_concurrence(concurrence(psi.density_matrix()));
    EXPECT_NEAR(via_schmidt, via_concurrence, 1e-10);
    EXPECT_NEAR(via_schmidt, ts::entropy_oracle(v), 1e-10);
  }
}

TEST(Schmidt, BellAndTable) {
  const auto bell = schmidt_decompose(TwoQubitPureState(kPhiPlus));
  EXPECT_NEAR(bell.probabilities[0], 0.5, 1e-12);
  EXPECT_NEAR(bell.probabilities[1], 0.5, 1e-12);

  const ReferenceValues ref;
  const auto s0 = schmidt_decompose(table_state(0));
  EXPECT_NEAR(s0.probabilities[0], ref.eigenstate_schmidt_p0[0], 5e-4);
  EXPECT_NEAR(s0.probabilities[1], ref.eigenstate_schmidt_p1[0], 5e-4);
  const auto s1 = schmidt_decompose(table_state(1));
  EXPECT_NEAR(s1.probabilities[0], ref.eigenstate_schmidt_p0[1], 5e-4);
  EXPECT_NEAR(s1.probabilities[1], 1.0 - s1.probabilities[0], 1e-12);
  // The printed complement does not satisfy normalization.
  EXPECT_GT(std::abs(ref.eigenstate_schmidt_p0[1] + ref.eigenstate_schmidt_p1[1] - 1.0), 1e-2);
}

TEST(Schmidt, ReassemblesAndIsOrthonormal) {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 50; ++t) {
    const TwoQubitPureState psi(ts::random_pure(rng));
    const auto sf = schmidt_decompose(psi);
    EXPECT_GE(sf.probabilities[0], sf.probabilities[1]);
    EXPECT_NEAR(sf.probabilities[0] + sf.probabilities[1], 1.0, 1e-12);
    EXPECT_LE((sf.reassemble() - psi.amplitudes()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(std::abs(sf.local_states_a[0].amplitudes().dot(sf.local_states_a[1].amplitudes())), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(sf.local_states_b[0].amplitudes().dot(sf.local_states_b[1].amplitudes())), 0.0, 1e-10);
    // Schmidt probabilities are the reduced-state spectrum.
    EXPECT_NEAR(sf.probabilities[0], ts::top_eigenvalue(ts::reduced_a(psi.amplitudes())), 1e-10);
  }
}

TEST(Schmidt, ProductState) {
  const Vec4c v = ts::kron2(ts::ket('D'), ts::ket('R'));
  const auto sf = schmidt_decompose(TwoQubitPureState(v));
  EXPECT_NEAR(sf.probabilities[0], 1.0, 1e-12);
  EXPECT_LE((sf.reassemble() - TwoQubitPureState(v).amplitudes()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AverageEntanglement, DegenerateMixtureAndTableAverages) {
  const auto psi = table_state(2);
  const std::array<double, 1> one{1.0};
  const std::array<TwoQubitPureState, 1> single{psi};
  EXPECT_NEAR(average_decomposition_entanglement(one, single), entanglement_entropy(psi), 1e-15);

  const ReferenceValues ref;
  std::array<TwoQubitPureState, 4> states{table_state(0), table_state(1), table_state(2), table_state(3)};
  EXPECT_NEAR(average_decomposition_entanglement(ref.eigenvalues, states), ref.eigen_average, 5e-4);
  EXPECT_NEAR(average_decomposition_entanglement(ref.rank2_weights, std::span(states.data(), 2)),
              ref.rank2_average, 5e-4);
}

TEST(AverageEntanglement, RejectsBadWeights) {
  const std::array<TwoQubitPureState, 2> states{table_state(0), table_state(1)};
  const std::array<double, 2> bad_sum{0.5, 0.6};
  const std::array<double, 2> negative{1.2, -0.2};
  EXPECT_THROW(average_decomposition_entanglement(bad_sum, states), ValidationError);
  EXPECT_THROW(average_decomposition_entanglement(negative, states), ValidationError);
  const std::array<double, 1> short_w{1.0};
  EXPECT_THROW(average_decomposition_entanglement(short_w, states), InputError);
}
