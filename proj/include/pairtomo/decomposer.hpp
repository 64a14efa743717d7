#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pairtomo/entanglement.hpp"
#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/nelder_mead.hpp"
#include "pairtomo/qstate.hpp"

namespace pairtomo {

/// Published analysis of the measured XX-X photon pair state, used as the
/// reproduction target for `canonical_paper_state` and `paper-repro`.
struct ReferenceValues {
  std::array<double, 4> eigenvalues = {0.6402, 0.3535, 0.0063, 0.0};
  double concurrence = 0.145;
  double eof = 0.0476;
  std::array<double, 4> eigenstate_entropies = {0.3544, 0.3376, 0.4328, 0.4242};
  double eigen_average = 0.3490;
  std::array<double, 2> rank2_weights = {0.6443, 0.3557};
  double rank2_fidelity = 0.9937;
  double rank2_average = 0.3484;
  std::array<double, 2> eigenstate_schmidt_p0 = {0.9331, 0.9374};
  std::array<double, 2> eigenstate_schmidt_p1 = {0.0669, 0.0133};  // second entry violates p0 + p1 = 1
  double alpha = -0.2480;
  double beta_modulus = 0.9688;
  double beta_phase_over_pi = 0.9954;
  std::array<double, 2> optimal_weights = {0.3735, 0.6265};
  std::array<double, 2> optimal_entropies = {0.0497, 0.0507};
  double optimal_average = 0.0503;
  std::array<double, 2> optimal_schmidt_p0 = {0.9944, 0.9943};
  std::array<double, 2> optimal_schmidt_p1 = {0.0056, 0.0057};
  double overshoot_percent = 5.7;
};

/// Printed eigenvector coefficients (alpha_i, beta_i, gamma_i, delta_i) of the
/// measured state, rows ordered by descending eigenvalue. Rows are normalized
/// only to four decimals.
inline std::array<Vec4c, 4> reference_eigenstate_coefficients() {
  using C = Complex;
  std::array<Vec4c, 4> rows;
  rows[0] << C(-0.9475, 0), C(-0.0096, 0.1498), C(-0.1437, -0.0349), C(0.0969, -0.2201);
  rows[1] << C(0.2669, 0), C(-0.0971, 0.1254), C(-0.0531, 0.0628), C(0.3720, -0.8709);
  rows[2] << C(0.1527, 0), C(0.2309, 0.1903), C(-0.7972, -0.4975), C(-0.0503, 0.0397);
  rows[3] << C(0.0878, 0), C(-0.2096, 0.9049), C(-0.0033, 0.2971), C(0.0018, 0.2030);
  return rows;
}

namespace detail {

inline Mat4c reference_matrix(double a, double b, double c, double d) {
  using C = Complex;
  const C x(-3.16e-3, 0.0789), y(0.0815, -0.0267), z(-0.0237, -0.0514);
  const C p(6.18e-4, -0.0144), q(-0.0731, -5.56e-3), s(-0.0302, -0.0302);
  Mat4c m;
  m << a, x, y, z,
       std::conj(x), b, p, q,
       std::conj(y), std::conj(p), c, s,
       std::conj(z), std::conj(q), std::conj(s), d;
  return m;
}

}  // namespace detail

/// Trace tolerance under which the canonical reference state counts as physical.
inline constexpr double kReferenceTraceTolerance = 2e-3;

/// The measured reference state with its inconsistent printed diagonal resolved.
///
/// Two diagonals are tried: the printed one (trace 1.2132) rescaled to unit
/// trace, and the printed one with b = 0.0238 (trace 0.999). Off-diagonals are
/// as printed. The candidate whose eigenvalues are closest (max abs) to the
/// published spectrum wins; if none is within 0.02 the call fails. The winner
/// keeps its trace, its slightly negative eigenvalue is clamped to zero, and
/// it is validated with a trace tolerance of 2e-3. The decision record goes
/// into the metadata.
inline TwoQubitDensityMatrix canonical_paper_state() {
  const ReferenceValues ref;
  struct Candidate {
    const char* name;
    Mat4c m;
  };
  const Mat4c printed = detail::reference_matrix(0.6, 0.238, 0.0212, 0.354);
  const std::array<Candidate, 2> candidates = {{
      {"printed_diagonal_trace_normalized", printed / printed.trace().real()},
      {"b_0.0238", detail::reference_matrix(0.6, 0.0238, 0.0212, 0.354)},
  }};

  Metadata meta = {{"source", "canonical reference state"}};
  Metadata list = Metadata::array();
  std::size_t best = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto eig = detail::hermitian_eigen<4>(candidates[i].m);
    double residual = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      residual = std::max(residual, std::abs(eig.values[k] - ref.eigenvalues[k]));
    list.push_back({{"name", candidates[i].name},
                    {"trace", candidates[i].m.trace().real()},
                    {"eigenvalues", eig.values},
                    {"max_abs_residual", residual}});
    if (residual < best_residual) {
      best_residual = residual;
      best = i;
    }
  }
  meta["candidates"] = list;
  if (best_residual > 0.02)
    throw ValidationError("eigenvalues",
                          "no reference-state candidate reproduces the published spectrum within "
                          "0.02 (best " + std::to_string(best_residual) + "); manual review needed");

  auto eig = detail::hermitian_eigen<4>(candidates[best].m);
  Eigen::Vector4d vals;
  for (int k = 0; k < 4; ++k) vals(k) = std::max(eig.values[static_cast<std::size_t>(k)], 0.0);
  const Mat4c m = eig.vectors * vals.asDiagonal() * eig.vectors.adjoint();
  meta["selected"] = candidates[best].name;
  meta["max_abs_residual"] = best_residual;
  meta["clamped_eigenvalue"] = std::min(eig.values[3], 0.0);
  meta["trace_tolerance"] = kReferenceTraceTolerance;
  Tolerances tol;
  tol.trace = kReferenceTraceTolerance;
  return TwoQubitDensityMatrix::physical(m, tol, std::move(meta));
}

/// Two-eigenstate approximation rho~ = p~0 |psi0><psi0| + p~1 |psi1><psi1|.
struct Rank2State {
  std::array<double, 2> weights{};
  std::array<TwoQubitPureState, 2> states;
  double fidelity_to_original = 1.0;
  std::optional<std::string> warning;  // set when the tie-break rule was used

  Mat4c matrix() const {
    return weights[0] * states[0].projector() + weights[1] * states[1].projector();
  }
  TwoQubitDensityMatrix density_matrix() const { return TwoQubitDensityMatrix::physical(matrix()); }
};

/// Builds a rank-2 state directly from weights and orthonormal states.
inline Rank2State make_rank2(std::array<double, 2> weights, std::array<TwoQubitPureState, 2> states) {
  if (!(weights[0] > 0.0 && weights[1] > 0.0))
    throw ValidationError("weights", "rank-2 weights must be positive");
  const double sum = weights[0] + weights[1];
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("weights", "rank-2 weights sum to " + std::to_string(sum));
  if (std::abs(states[0].overlap(states[1])) > 1e-10)
    throw ValidationError("orthogonality", "rank-2 states are not orthogonal");
  return Rank2State{weights, states, 1.0, std::nullopt};
}

/// Keeps the two largest eigenvalues and renormalizes them. Ties for the
/// second slot go to the eigenvector with the larger |<HH|psi>|, then to the
/// lexicographically larger amplitude list.
inline Rank2State rank2_truncate(const TwoQubitDensityMatrix& rho) {
  rho.require_physical("rank2_truncate");
  const EigenDecomposition ed = eigendecompose(rho);
  const double trace = std::accumulate(ed.eigenvalues.begin(), ed.eigenvalues.end(), 0.0);
  if (!((ed.eigenvalues[0] + ed.eigenvalues[1]) / trace > 0.5))
    throw ValidationError("eigenvalues", "two largest eigenvalues carry no more than half the weight");

  Rank2State out;
  std::size_t second = 1;
  std::vector<std::size_t> tied;
  for (std::size_t k = 1; k < 4; ++k)
    if (std::abs(ed.eigenvalues[k] - ed.eigenvalues[1]) <= 1e-12) tied.push_back(k);
  if (tied.size() > 1) {
    auto key_less = [&](std::size_t a, std::size_t b) {
      const Vec4c& va = ed.eigenstates[a].amplitudes();
      const Vec4c& vb = ed.eigenstates[b].amplitudes();
      if (std::abs(va(0)) != std::abs(vb(0))) return std::abs(va(0)) < std::abs(vb(0));
      for (int i = 0; i < 4; ++i) {
        if (va(i).real() != vb(i).real()) return va(i).real() < vb(i).real();
        if (va(i).imag() != vb(i).imag()) return va(i).imag() < vb(i).imag();
      }
      return false;
    };
    second = *std::max_element(tied.begin(), tied.end(), key_less);
    out.warning = "degenerate second eigenvalue (" + std::to_string(tied.size()) +
                  "-fold); picked eigenvector by |<HH|psi>| tie-break";
  }
  const double n = ed.eigenvalues[0] + ed.eigenvalues[second];
  out.weights = {ed.eigenvalues[0] / n, ed.eigenvalues[second] / n};
  out.states = {ed.eigenstates[0], ed.eigenstates[second]};
  out.fidelity_to_original = fidelity(rho, out.density_matrix());
  return out;
}

struct OptimizerInfo {
  std::size_t evaluations = 0;
  double simplex_size = 0.0;
  bool converged = false;
  double grid_best = 0.0;  // best coarse-grid value before refinement
};

/// Two-element pure-state decomposition rho~ = q0 |phi0><phi0| + q1 |phi1><phi1|.
struct DecompositionResult {
  Complex alpha;
  Complex beta;
  std::array<double, 2> weights{};
  std::array<TwoQubitPureState, 2> states;
  double average_entanglement = 0.0;
  std::array<double, 2> per_state_entanglement{};
  std::optional<OptimizerInfo> optimizer;

  Mat4c reconstruct() const {
    return weights[0] * states[0].projector() + weights[1] * states[1].projector();
  }
};

/// Member of the two-element decomposition family generated by a unitary
/// mixing of the sqrt(weight)-scaled eigenstates:
///   phi0 ~ alpha sqrt(p~0) psi0 + beta sqrt(p~1) psi1,
///   phi1 ~ beta* sqrt(p~0) psi0 - alpha* sqrt(p~1) psi1,
///   q0 = |alpha|^2 p~0 + |beta|^2 p~1.
inline DecompositionResult nielsen_member(const Rank2State& r, Complex alpha, Complex beta) {
  const double norm = std::norm(alpha) + std::norm(beta);
  if (std::abs(norm - 1.0) > 1e-9)
    throw ValidationError("alpha_beta", "|alpha|^2 + |beta|^2 = " + std::to_string(norm));
  const double s0 = std::sqrt(r.weights[0]), s1 = std::sqrt(r.weights[1]);
  const Vec4c& psi0 = r.states[0].amplitudes();
  const Vec4c& psi1 = r.states[1].amplitudes();
  const Vec4c v0 = alpha * s0 * psi0 + beta * s1 * psi1;
  const Vec4c v1 = std::conj(beta) * s0 * psi0 - std::conj(alpha) * s1 * psi1;

  DecompositionResult out;
  out.alpha = alpha;
  out.beta = beta;
  const double q0 = (std::norm(alpha) * r.weights[0] + std::norm(beta) * r.weights[1]) / norm;
  out.weights = {q0, 1.0 - q0};
  if (out.weights[0] < 1e-14 || out.weights[1] < 1e-14)
    throw ValidationError("weights", "degenerate decomposition member (a weight below 1e-14)");
  out.states = {TwoQubitPureState::normalized(v0), TwoQubitPureState::normalized(v1)};
  for (std::size_t i = 0; i < 2; ++i) out.per_state_entanglement[i] = entanglement_entropy(out.states[i]);
  out.average_entanglement = out.weights[0] * out.per_state_entanglement[0] +
                             out.weights[1] * out.per_state_entanglement[1];
  return out;
}

struct DecomposerOptions {
  int grid_theta = 64;  // theta in [0, pi], endpoints included
  int grid_chi = 128;   // chi in [0, 2 pi)
  NelderMeadOptions refine = {.max_evaluations = 20000,
                              .f_tolerance = 1e-15,
                              .x_tolerance = 1e-10,
                              .initial_step = 0.02,
                              .steps = {},
                              .restarts = 2};
  std::optional<std::array<double, 2>> start;  // (theta, chi); skips the grid when set
};

namespace detail {

/// Entropy of a pure state from its unnormalized amplitudes via the pure-state
/// concurrence 2|det M|.
inline double fast_entropy(const Vec4c& v, double norm2) {
  const double c = std::min(1.0, 2.0 * std::abs(v(0) * v(3) - v(1) * v(2)) / norm2);
  const double root = std::sqrt(std::max(0.0, 1.0 - c * c));
  return entropy_term(0.5 * (1.0 + root)) + entropy_term(0.5 * (1.0 - root));
}

inline double member_average(const Rank2State& r, double theta, double chi) {
  const Complex alpha(std::cos(theta), 0.0);
  const Complex beta = std::polar(std::sin(theta), chi);
  const double s0 = std::sqrt(r.weights[0]), s1 = std::sqrt(r.weights[1]);
  const Vec4c v0 = alpha * s0 * r.states[0].amplitudes() + beta * s1 * r.states[1].amplitudes();
  const Vec4c v1 = std::conj(beta) * s0 * r.states[0].amplitudes() -
                   std::conj(alpha) * s1 * r.states[1].amplitudes();
  const double q0 = v0.squaredNorm(), q1 = v1.squaredNorm();
  double f = 0.0;
  if (q0 > 1e-300) f += q0 * fast_entropy(v0, q0);
  if (q1 > 1e-300) f += q1 * fast_entropy(v1, q1);
  return f;
}

}  // namespace detail

/// Minimizes q0 E(phi0) + q1 E(phi1) over the two-element family, with
/// alpha = cos(theta) and beta = sin(theta) e^{i chi}. A coarse grid picks the
/// start for a simplex refinement.
///
/// The returned member is relabelled so that q0 <= q1 and alpha is real and
/// non-positive; both are pure relabellings of the same decomposition.
inline DecompositionResult minimize_decomposition(const Rank2State& r,
                                                  const DecomposerOptions& opts = {}) {
  if (!(r.weights[0] > 0.0 && r.weights[1] > 0.0))
    throw ValidationError("weights", "minimize_decomposition needs two positive weights");
  std::size_t evaluations = 0;
  std::array<double, 2> best_x{0.0, 0.0};
  double best_f = std::numeric_limits<double>::infinity();
  if (opts.start) {
    best_x = *opts.start;
    best_f = detail::member_average(r, best_x[0], best_x[1]);
    ++evaluations;
  } else {
    for (int i = 0; i < opts.grid_theta; ++i) {
      const double theta = kPi * i / std::max(1, opts.grid_theta - 1);
      for (int j = 0; j < opts.grid_chi; ++j) {
        const double chi = 2.0 * kPi * j / opts.grid_chi;
        const double f = detail::member_average(r, theta, chi);
        ++evaluations;
        if (f < best_f) {
          best_f = f;
          best_x = {theta, chi};
        }
      }
    }
  }
  const double grid_best = best_f;

  auto objective = [&](std::span<const double> x) { return detail::member_average(r, x[0], x[1]); };
  const NelderMeadResult nm =
      NelderMead(opts.refine).minimize(objective, std::vector<double>(best_x.begin(), best_x.end()));
  evaluations += nm.evaluations;
  if (!nm.converged)
    throw ConvergenceError("decomposition refinement did not converge", nm.point, nm.value);
  if (nm.value <= best_f) best_x = {nm.point[0], nm.point[1]};

  Complex alpha(std::cos(best_x[0]), 0.0);
  Complex beta = std::polar(std::sin(best_x[0]), best_x[1]);
  if (std::norm(alpha) > std::norm(beta)) {  // swap phi0 <-> phi1
    const Complex a = alpha;
    alpha = std::conj(beta);
    beta = -std::conj(a);
  }
  if (std::abs(alpha) > 0.0) {  // common phase leaves the decomposition unchanged
    const Complex phase = -std::conj(alpha) / std::abs(alpha);
    alpha *= phase;
    beta *= phase;
    alpha = Complex(alpha.real(), 0.0);
  }
  DecompositionResult out = nielsen_member(r, alpha, beta);
  out.optimizer = OptimizerInfo{evaluations, nm.simplex_size, nm.converged, grid_best};
  return out;
}

/// Pure-state decomposition with an arbitrary number of elements.
struct MultiDecompositionResult {
  std::vector<double> weights;
  std::vector<TwoQubitPureState> states;
  double average_entanglement = 0.0;
};

/// Exhaustive mode: minimizes the average entanglement over k-element
/// decompositions inside the rank-2 support, phi~_i = sum_j U_ij sqrt(p~_j) psi_j
/// with U a k x 2 isometry. Starts from the embedded two-element optimum plus
/// `random_starts` seeded random isometries. Elements with weight below 1e-14
/// are dropped from the result.
inline MultiDecompositionResult minimize_decomposition_k(const Rank2State& r, int k,
                                                         int random_starts = 8,
                                                         std::uint64_t seed = 1) {
  if (k < 2) throw InputError("decomposition needs at least two elements");
  const auto ku = static_cast<std::size_t>(k);
  const double s0 = std::sqrt(r.weights[0]), s1 = std::sqrt(r.weights[1]);

  auto isometry = [&](std::span<const double> x) {
    Eigen::MatrixXcd u(k, 2);
    for (std::size_t i = 0; i < ku; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            Complex(x[4 * i + 2 * j], x[4 * i + 2 * j + 1]);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(u);
    return Eigen::MatrixXcd(qr.householderQ() * Eigen::MatrixXcd::Identity(k, 2));
  };
  auto objective = [&](std::span<const double> x) {
    const Eigen::MatrixXcd u = isometry(x);
    double f = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const Vec4c v = u(i, 0) * s0 * r.states[0].amplitudes() + u(i, 1) * s1 * r.states[1].amplitudes();
      const double q = v.squaredNorm();
      if (q > 1e-300) f += q * detail::fast_entropy(v, q);
    }
    return f;
  };

  std::vector<std::vector<double>> starts;
  {
    const DecompositionResult two = minimize_decomposition(r);
    std::vector<double> x(4 * ku, 0.0);
    const std::array<Complex, 4> rows = {two.alpha, two.beta, std::conj(two.beta), -std::conj(two.alpha)};
    for (std::size_t e = 0; e < 4; ++e) {
      x[2 * e] = rows[e].real();
      x[2 * e + 1] = rows[e].imag();
    }
    starts.push_back(std::move(x));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int s = 0; s < random_starts; ++s) {
    std::vector<double> x(4 * ku);
    for (double& v : x) v = gauss(rng);
    starts.push_back(std::move(x));
  }

  NelderMeadOptions nmo;
  nmo.f_tolerance = 1e-14;
  nmo.initial_step = 0.1;
  nmo.max_evaluations = 400000;
  NelderMeadResult best;
  for (const auto& x0 : starts) {
    NelderMeadResult res = NelderMead(nmo).minimize(objective, x0);
    if (res.value < best.value) best = std::move(res);
  }

  MultiDecompositionResult out;
  const Eigen::MatrixXcd u = isometry(best.point);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vec4c v = u(i, 0) * s0 * r.states[0].amplitudes() + u(i, 1) * s1 * r.states[1].amplitudes();
    const double q = v.squaredNorm();
    if (q < 1e-14) continue;
    out.weights.push_back(q);
    out.states.push_back(TwoQubitPureState::normalized(v));
    out.average_entanglement += q * entanglement_entropy(out.states.back());
  }
  return out;
}

}  // namespace pairtomo
