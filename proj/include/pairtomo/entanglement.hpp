#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/qstate.hpp"

namespace pairtomo {

/// Wootters concurrence C = max(0, l1 - l2 - l3 - l4), where l_i are the
/// descending square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy).
/// Those are the singular values of sqrt(rho) sqrt(rho~), with
/// sqrt(rho~) = (sy x sy) sqrt(rho)* (sy x sy).
inline double concurrence(const TwoQubitDensityMatrix& rho) {
  rho.require_physical("concurrence");
  const Mat4c yy = detail::kron(detail::pauli(2), detail::pauli(2));
  const Mat4c root = detail::psd_sqrt(rho.matrix(), rho.tolerances().sqrt_clamp);
  const Eigen::JacobiSVD<Mat4c> svd(root * yy * root.conjugate() * yy);
  const auto l = svd.singularValues();  // descending
  return std::clamp(l(0) - l(1) - l(2) - l(3), 0.0, 1.0);
}

inline double tangle(const TwoQubitDensityMatrix& rho) {
  const double c = concurrence(rho);
  return c * c;
}

/// Entanglement of formation of a two-qubit state with concurrence c.
inline double eof_from_concurrence(double c) {
  if (!(c >= -1e-12 && c <= 1.0 + 1e-12))
    throw ValidationError("concurrence", "value " + std::to_string(c) + " outside [0, 1]");
  c = std::clamp(c, 0.0, 1.0);
  const double root = std::sqrt(1.0 - c * c);
  return detail::entropy_term(0.5 * (1.0 + root)) + detail::entropy_term(0.5 * (1.0 - root));
}

/// psi = sum_j sqrt(p_j) e^{i phi_j} |a_j> (x) |b_j>, p_0 >= p_1.
struct SchmidtForm {
  std::array<double, 2> probabilities{};
  std::array<double, 2> phases{};  // radians
  std::array<SingleQubitState, 2> local_states_a;
  std::array<SingleQubitState, 2> local_states_b;

  Vec4c reassemble() const {
    Vec4c out = Vec4c::Zero();
    for (std::size_t j = 0; j < 2; ++j)
      out += std::sqrt(probabilities[j]) * std::polar(1.0, phases[j]) *
             detail::kron(local_states_a[j].amplitudes(), local_states_b[j].amplitudes());
    return out;
  }
};

/// Schmidt decomposition from the SVD of the 2x2 amplitude matrix
/// M(a, b) = <ab|psi>. Local states follow the usual phase convention; the
/// removed phases are collected in `phases`.
inline SchmidtForm schmidt_decompose(const TwoQubitPureState& psi) {
  Mat2c m;
  m << psi[0], psi[1], psi[2], psi[3];
  Eigen::JacobiSVD<Mat2c> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SchmidtForm out;
  for (int j = 0; j < 2; ++j) {
    const double s = svd.singularValues()(j);
    // psi = sum_j s_j u_j (x) conj(v_j)
    const Vec2c u = svd.matrixU().col(j);
    const Vec2c v = svd.matrixV().col(j).conjugate();
    const SingleQubitState a(u, Tolerances{.norm = 1e-10});
    const SingleQubitState b(v, Tolerances{.norm = 1e-10});
    // a = e^{-i t_a} u, b = e^{-i t_b} v  =>  u (x) v = e^{i(t_a + t_b)} a (x) b
    const Complex ra = (a.amplitudes().dot(u));
    const Complex rb = (b.amplitudes().dot(v));
    out.probabilities[static_cast<std::size_t>(j)] = s * s;
    out.phases[static_cast<std::size_t>(j)] = std::arg(ra * rb);
    out.local_states_a[static_cast<std::size_t>(j)] = a;
    out.local_states_b[static_cast<std::size_t>(j)] = b;
  }
  const double total = out.probabilities[0] + out.probabilities[1];
  out.probabilities[0] /= total;
  out.probabilities[1] /= total;
  return out;
}

/// Von Neumann entropy (bits) of either reduced state.
inline double entanglement_entropy(const TwoQubitPureState& psi) {
  const SchmidtForm sf = schmidt_decompose(psi);
  return detail::entropy_term(sf.probabilities[0]) + detail::entropy_term(sf.probabilities[1]);
}

/// sum_i w_i E(psi_i) for a pure-state ensemble.
inline double average_decomposition_entanglement(std::span<const double> weights,
                                                 std::span<const TwoQubitPureState> states) {
  if (weights.size() != states.size())
    throw InputError("weights and states differ in length");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ValidationError("weight", "negative weight " + std::to_string(w));
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("weight_sum", "weights sum to " + std::to_string(sum));
  double avg = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    avg += weights[i] * entanglement_entropy(states[i]);
  return avg;
}

}  // namespace pairtomo
