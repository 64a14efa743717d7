#include <gtest/gtest.h>

#include "pairtomo/decomposer.hpp"
#include "pairtomo/io.hpp"
#include "pairtomo/qstate.hpp"
#include "test_support.hpp"

using namespace pairtomo;
namespace ts = testsupport;

namespace {

Vec4c bell_phi_plus() { return Vec4c(1.0, 0.0, 0.0, 1.0) / std::sqrt(2.0); }
Vec4c bell_psi_minus() { return Vec4c(0.0, 1.0, -1.0, 0.0) / std::sqrt(2.0); }

}  // namespace

TEST(Validate, MaximallyMixedIsPhysical) {
  const auto r = validate(Mat4c::Identity() / 4.0);
  EXPECT_TRUE(r.physical);
  EXPECT_NEAR(r.trace, 1.0, 1e-15);
  EXPECT_NEAR(r.min_eigenvalue, 0.25, 1e-15);
  EXPECT_TRUE(r.defects.empty());
}

TEST(Validate, PrintedDiagonalFlaggedNonPhysical) {
  const Mat4c m = detail::reference_matrix(0.6, 0.238, 0.0212, 0.354);
  const auto rho = TwoQubitDensityMatrix::raw(m);
  EXPECT_NEAR(rho.trace(), 0.6 + 0.238 + 0.0212 + 0.354, 1e-15);
  EXPECT_NEAR(rho.trace(), 1.2132, 1e-12);
  EXPECT_FALSE(rho.is_physical());
  ASSERT_FALSE(rho.report().defects.empty());
  EXPECT_NE(rho.report().defects.front().find("trace"), std::string::npos);
  EXPECT_THROW(TwoQubitDensityMatrix::physical(m), ValidationError);
}

TEST(Validate, CorrectedDiagonalWithinLooseTraceTolerance) {
  const Mat4c m = detail::reference_matrix(0.6, 0.0238, 0.0212, 0.354);
  EXPECT_NEAR(m.trace().real(), 0.999, 1e-12);
  const auto strict = validate(m);
  EXPECT_FALSE(strict.physical);
  Tolerances tol;
  tol.trace = 2e-3;
  // Trace passes at 2e-3; the -1.2e-5 eigenvalue still fails the PSD check.
  const auto loose = validate(m, tol);
  EXPECT_LT(std::abs(loose.trace - 1.0), 2e-3);
  EXPECT_LT(loose.min_eigenvalue, -1e-6);
  tol.min_eigenvalue = 2e-5;
  EXPECT_TRUE(validate(m, tol).physical);
}

TEST(Validate, ReportsEachDefectWithMagnitude) {
  Mat4c m = Mat4c::Identity() / 2.0;
  m(0, 1) = Complex(0.1, 0.0);
  const auto r = validate(m);
  EXPECT_FALSE(r.physical);
  EXPECT_NEAR(r.hermiticity_defect, 0.1, 1e-15);
  EXPECT_EQ(r.defects.size(), 2u);  // hermiticity and trace
}

TEST(Validate, NeverThrowsOnNonFinite) {
  Mat4c m = Mat4c::Identity() / 4.0;
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  ValidationReport r;
  EXPECT_NO_THROW(r = validate(m));
  EXPECT_FALSE(r.physical);
}

TEST(DensityMatrix, PhysicalSymmetrizesAndKeepsInvariants) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Mat4c m = ts::random_density(rng);
    m(0, 1) += Complex(1e-14, 0.0);
    const auto rho = TwoQubitDensityMatrix::physical(m);
    EXPECT_LE((rho.matrix() - rho.matrix().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(std::abs(rho.trace() - 1.0), rho.tolerances().trace);
    EXPECT_GE(rho.report().min_eigenvalue, -1e-10);
  }
}

TEST(DensityMatrix, RequirePhysicalNamesField) {
  const auto rho = TwoQubitDensityMatrix::raw(Mat4c::Identity() / 2.0);
  try {
    rho.require_physical("test");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "trace");
  }
  EXPECT_TRUE(rho.trace_normalized().is_physical());
}

TEST(PureState, RejectsUnnormalizedAndCanonicalizesPhase) {
  EXPECT_THROW(TwoQubitPureState(Vec4c(1.0, 1.0, 0.0, 0.0)), ValidationError);
  const Complex ph = std::polar(1.0, 2.1);
  const TwoQubitPureState psi(ph * bell_phi_plus());
  EXPECT_NEAR(psi[0].imag(), 0.0, 1e-15);
  EXPECT_GT(psi[0].real(), 0.0);
  EXPECT_NEAR(std::abs(psi.overlap(TwoQubitPureState(bell_phi_plus()))), 1.0, 1e-12);
  // Leading amplitude below the cut is skipped.
  const TwoQubitPureState q(Vec4c(Complex(1e-10, 0), Complex(0, -1), 0, 0).normalized());
  EXPECT_NEAR(q[1].imag(), 0.0, 1e-15);
  EXPECT_GT(q[1].real(), 0.0);
}

TEST(SingleQubit, NormInvariant) {
  EXPECT_THROW(SingleQubitState(Vec2c(1.0, 0.1)), ValidationError);
  const auto s = SingleQubitState::normalized(Vec2c(3.0, Complex(0, 4.0)));
  EXPECT_NEAR(s.amplitudes().norm(), 1.0, 1e-12);
}

TEST(Eigendecompose, MaximallyMixed) {
  const auto ed = eigendecompose(TwoQubitDensityMatrix::physical(Mat4c::Identity() / 4.0));
  for (double v : ed.eigenvalues) EXPECT_NEAR(v, 0.25, 1e-14);
}

TEST(Eigendecompose, BellState) {
  const auto ed = eigendecompose(TwoQubitPureState(bell_phi_plus()).density_matrix());
  EXPECT_NEAR(ed.eigenvalues[0], 1.0, 1e-14);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(ed.eigenvalues[i], 0.0, 1e-14);
  EXPECT_NEAR(std::abs(ed.eigenstates[0].overlap(TwoQubitPureState(bell_phi_plus()))), 1.0, 1e-12);
}

TEST(Eigendecompose, ReferenceStateSpectrum) {
  const ReferenceValues ref;
  const auto ed = eigendecompose(canonical_paper_state());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(ed.eigenvalues[i], ref.eigenvalues[i], 5e-3);
}

TEST(Eigendecompose, RoundTripOnRandomStates) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto rho = TwoQubitDensityMatrix::physical(ts::random_density(rng, 1 + t % 4));
    const auto ed = eigendecompose(rho);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      sum += ed.eigenvalues[i];
      EXPECT_GE(ed.eigenvalues[i], -1e-10);
      if (i > 0) EXPECT_LE(ed.eigenvalues[i], ed.eigenvalues[i - 1]);
    }
    EXPECT_NEAR(sum, rho.trace(), 1e-10);
    EXPECT_LE(ts::max_abs_diff(ed.reconstruct(), rho.matrix()), 1e-10);
  }
}

TEST(Eigendecompose, RejectsNonHermitian) {
  Mat4c m = Mat4c::Identity() / 4.0;
  m(0, 2) = 0.1;
  EXPECT_THROW(eigendecompose(TwoQubitDensityMatrix::raw(m)), ValidationError);
}

TEST(Fidelity, TrivialCases) {
  const auto phi = TwoQubitPureState(bell_phi_plus()).density_matrix();
  const auto psi = TwoQubitPureState(bell_psi_minus()).density_matrix();
  EXPECT_NEAR(fidelity(phi, phi), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(phi, psi), 0.0, 1e-12);
}

TEST(Fidelity, ReferenceRank2) {
  const auto rho = canonical_paper_state();
  const auto r2 = rank2_truncate(rho);
  EXPECT_NEAR(fidelity(rho, r2.density_matrix()), ReferenceValues{}.rank2_fidelity, 5e-4);
}

TEST(Fidelity, SymmetryIdentityAndPureOverlap) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    const auto a = TwoQubitDensityMatrix::physical(ts::random_density(rng));
    const auto b = TwoQubitDensityMatrix::physical(ts::random_density(rng, 2));
    EXPECT_NEAR(fidelity(a, b), fidelity(b, a), 1e-10);
    EXPECT_NEAR(fidelity(a, a), 1.0, 1e-12);
    const Vec4c u = ts::random_pure(rng), v = ts::random_pure(rng);
    const auto pu = TwoQubitPureState(u).density_matrix();
    const auto pv = TwoQubitPureState(v).density_matrix();
    EXPECT_NEAR(fidelity(pu, pv), std::norm(u.dot(v)), 1e-10);
  }
}

TEST(Fidelity, MixedAgainstPureIsExpectation) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 20; ++t) {
    const Mat4c m = ts::random_density(rng);
    const Vec4c v = ts::random_pure(rng);
    const double expect = (v.adjoint() * m * v)(0, 0).real();
    EXPECT_NEAR(fidelity(TwoQubitDensityMatrix::physical(m), TwoQubitPureState(v).density_matrix()), expect,
                1e-10);
  }
}

TEST(Fidelity, RejectsNonPhysical) {
  const auto good = TwoQubitDensityMatrix::physical(Mat4c::Identity() / 4.0);
  const auto bad = TwoQubitDensityMatrix::raw(Mat4c::Identity() / 2.0);
  EXPECT_THROW(fidelity(good, bad), ValidationError);
}

TEST(PartialTrace, BellAndProduct) {
  const Mat2c r = partial_trace(TwoQubitPureState(bell_phi_plus()), Subsystem::B);
  EXPECT_LE((r - Mat2c::Identity() / 2.0).cwiseAbs().maxCoeff(), 1e-15);
  const Mat2c p = partial_trace(TwoQubitPureState(Vec4c(0, 1, 0, 0)), Subsystem::B);
  Mat2c expect = Mat2c::Zero();
  expect(0, 0) = 1.0;
  EXPECT_LE((p - expect).cwiseAbs().maxCoeff(), 1e-15);
  // Tracing out A keeps the second qubit.
  Mat2c q = Mat2c::Zero();
  q(1, 1) = 1.0;
  EXPECT_LE((partial_trace(TwoQubitPureState(Vec4c(0, 1, 0, 0)), Subsystem::A) - q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PartialTrace, TableEigenstateSpectrum) {
  const auto psi0 = TwoQubitPureState::normalized(reference_eigenstate_coefficients()[0]);
  const Mat2c r = partial_trace(psi0, Subsystem::B);
  Eigen::SelfAdjointEigenSolver<Mat2c> es(r);
  EXPECT_NEAR(es.eigenvalues()(1), 0.9331, 5e-4);
  EXPECT_NEAR(es.eigenvalues()(0), 0.0669, 5e-4);
}

TEST(PartialTrace, MatchesHandOracleAndSumsToOne) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 50; ++t) {
    const Vec4c v = ts::random_pure(rng);
    const Mat2c r = partial_trace(TwoQubitPureState(v), Subsystem::B);
    EXPECT_LE((r - ts::reduced_a(v)).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat2c> es(r);
    EXPECT_NEAR(es.eigenvalues().sum(), 1.0, 1e-12);
    // Both reductions of a pure state share a spectrum.
    Eigen::SelfAdjointEigenSolver<Mat2c> eb(partial_trace(TwoQubitPureState(v), Subsystem::A));
    EXPECT_NEAR(es.eigenvalues()(0), eb.eigenvalues()(0), 1e-12);
  }
}

TEST(DensityMatrixJson, RoundTripsLosslessly) {
  std::mt19937_64 rng(16);
  const auto rho = TwoQubitDensityMatrix::physical(ts::random_density(rng), {}, {{"note", "x"}});
  const std::string text = io::to_text(io::density_matrix_to_json(rho));
  const Mat4c back = io::json_to_matrix(io::parse_json(text, "mem"), "mem");
  EXPECT_EQ(back, rho.matrix());
  const auto j = io::parse_json(text, "mem");
  EXPECT_EQ(j["basis"], io::Json({"HH", "HV", "VH", "VV"}));
  EXPECT_TRUE(j["meta"]["validation"]["physical"].get<bool>());
  EXPECT_EQ(j["meta"]["note"], "x");
}
