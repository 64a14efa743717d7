#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/nelder_mead.hpp"
#include "pairtomo/qstate.hpp"

namespace pairtomo {

enum class Polarization { H, V, D, A, R, L };

/// Sign of the V component in R. MinusI: R = (H - iV)/sqrt2, L = (H + iV)/sqrt2.
/// PlusI swaps the two circular states.
enum class CircularConvention { MinusI, PlusI };

/// g2 = bunching amplitudes proportional to detection probability; counts = raw coincidences.
enum class StrengthKind { G2, Counts };

inline char to_char(Polarization p) {
  static constexpr char kChars[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  return kChars[static_cast<int>(p)];
}

inline std::optional<Polarization> polarization_from_char(char c) {
  switch (c) {
    case 'H': return Polarization::H;
    case 'V': return Polarization::V;
    case 'D': return Polarization::D;
    case 'A': return Polarization::A;
    case 'R': return Polarization::R;
    case 'L': return Polarization::L;
    default: return std::nullopt;
  }
}

inline std::string to_string(StrengthKind k) { return k == StrengthKind::G2 ? "g2" : "counts"; }

inline std::optional<StrengthKind> strength_kind_from_string(std::string_view s) {
  if (s == "g2") return StrengthKind::G2;
  if (s == "counts") return StrengthKind::Counts;
  return std::nullopt;
}

/// Projection basis of the photon pair: first the XX photon, then the X photon.
struct BasisPair {
  Polarization xx = Polarization::H;
  Polarization x = Polarization::H;
  friend bool operator==(const BasisPair&, const BasisPair&) = default;
  std::string label() const { return {to_char(xx), to_char(x)}; }
};

inline std::optional<BasisPair> basis_pair_from_string(std::string_view s) {
  if (s.size() != 2) return std::nullopt;
  auto a = polarization_from_char(s[0]);
  auto b = polarization_from_char(s[1]);
  if (!a || !b) return std::nullopt;
  return BasisPair{*a, *b};
}

namespace detail {
using P = Polarization;
}  // namespace detail

/// The sixteen measured pairs, in acquisition order.
inline constexpr std::array<BasisPair, 16> kTomographyBases = {{
    {detail::P::H, detail::P::H}, {detail::P::H, detail::P::V}, {detail::P::V, detail::P::H},
    {detail::P::V, detail::P::V}, {detail::P::D, detail::P::D}, {detail::P::A, detail::P::A},
    {detail::P::D, detail::P::A}, {detail::P::R, detail::P::R}, {detail::P::L, detail::P::L},
    {detail::P::L, detail::P::R}, {detail::P::D, detail::P::V}, {detail::P::V, detail::P::D},
    {detail::P::R, detail::P::V}, {detail::P::V, detail::P::L}, {detail::P::D, detail::P::R},
    {detail::P::R, detail::P::D},
}};

/// Indices of HH, HV, VH, VV: their projectors sum to the identity.
inline constexpr std::array<int, 4> kNormalizationQuadruple = {0, 1, 2, 3};

inline Vec2c polarization_state(Polarization p,
                                CircularConvention conv = CircularConvention::MinusI) {
  const double r = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, conv == CircularConvention::MinusI ? 1.0 : -1.0);
  Vec2c v;
  switch (p) {
    case Polarization::H: v << 1.0, 0.0; break;
    case Polarization::V: v << 0.0, 1.0; break;
    case Polarization::D: v << r, r; break;
    case Polarization::A: v << r, -r; break;
    case Polarization::R: v << r, -i * r; break;
    case Polarization::L: v << r, i * r; break;
  }
  return v;
}

/// Rank-1 two-photon projector |a b><a b|.
inline Mat4c projector(BasisPair pair, CircularConvention conv = CircularConvention::MinusI) {
  const Vec4c v = detail::kron(polarization_state(pair.xx, conv), polarization_state(pair.x, conv));
  return v * v.adjoint();
}

struct MeasurementRecord {
  BasisPair basis;
  double strength = 0.0;
  StrengthKind kind = StrengthKind::G2;
};

/// Exactly the sixteen tomography records, stored in `kTomographyBases` order.
///
/// g2 strengths below zero are floored at zero; negative counts are rejected.
class TomographySet {
 public:
  explicit TomographySet(const std::vector<MeasurementRecord>& records) {
    if (records.empty()) throw InputError("tomography set is empty");
    kind_ = records.front().kind;
    std::array<bool, 16> seen{};
    for (const auto& rec : records) {
      const auto it = std::find(kTomographyBases.begin(), kTomographyBases.end(), rec.basis);
      if (it == kTomographyBases.end())
        throw InputError("basis pair '" + rec.basis.label() + "' is not one of the 16 tomography pairs");
      const auto idx = static_cast<std::size_t>(it - kTomographyBases.begin());
      if (seen[idx]) throw InputError("duplicate basis pair '" + rec.basis.label() + "'");
      if (rec.kind != kind_)
        throw InputError("mixed strength kinds: basis pair '" + rec.basis.label() + "' is " +
                         to_string(rec.kind) + ", expected " + to_string(kind_));
      if (!std::isfinite(rec.strength))
        throw InputError("non-finite strength for basis pair '" + rec.basis.label() + "'");
      if (rec.strength < 0.0 && kind_ == StrengthKind::Counts)
        throw InputError("negative count for basis pair '" + rec.basis.label() + "'");
      seen[idx] = true;
      records_[idx] = rec;
      records_[idx].strength = std::max(rec.strength, 0.0);
    }
    for (std::size_t i = 0; i < 16; ++i)
      if (!seen[i])
        throw InputError("missing basis pair '" + kTomographyBases[i].label() + "'");
  }

  const std::array<MeasurementRecord, 16>& records() const noexcept { return records_; }
  StrengthKind kind() const noexcept { return kind_; }
  double strength(std::size_t i) const { return records_.at(i).strength; }

  TomographySet scaled(double factor) const {
    std::vector<MeasurementRecord> recs(records_.begin(), records_.end());
    for (auto& r : recs) r.strength *= factor;
    return TomographySet(recs);
  }

 private:
  std::array<MeasurementRecord, 16> records_{};
  StrengthKind kind_ = StrengthKind::G2;
};

/// Per-basis detection probability estimates. Strengths of either kind are
/// treated as proportional to Tr(P rho) and divided by the HH+HV+VH+VV sum.
inline std::array<double, 16> normalize_strengths(const TomographySet& data) {
  double norm = 0.0;
  for (int i : kNormalizationQuadruple) norm += data.strength(static_cast<std::size_t>(i));
  if (!(norm > 0.0))
    throw InputError("normalization sum of HH, HV, VH, VV strengths is zero");
  std::array<double, 16> p{};
  for (std::size_t i = 0; i < 16; ++i) p[i] = data.strength(i) / norm;
  return p;
}

namespace detail {

/// B(i, 4a+b) = Tr(P_i (sigma_a x sigma_b)) / 4, so Tr(P_i rho) = B r for
/// rho = sum_k r_k (sigma_a x sigma_b).
inline Eigen::Matrix<double, 16, 16> tomography_design(CircularConvention conv) {
  Eigen::Matrix<double, 16, 16> b;
  std::array<Mat4c, 16> paulis;
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 4; ++c) paulis[4 * a + c] = kron(pauli(a), pauli(c));
  for (int i = 0; i < 16; ++i) {
    const Mat4c p = projector(kTomographyBases[i], conv);
    for (int k = 0; k < 16; ++k) b(i, k) = (p * paulis[k]).trace().real();
  }
  return b;
}

inline Mat4c from_pauli_coefficients(const Eigen::Matrix<double, 16, 1>& r) {
  Mat4c m = Mat4c::Zero();
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 4; ++c) m += r(4 * a + c) * kron(pauli(a), pauli(c));
  return m;
}

}  // namespace detail

/// Linear-inversion tomography. The result is Hermitian with unit trace but
/// may have negative eigenvalues; the returned raw matrix carries the report.
inline TwoQubitDensityMatrix linear_reconstruct(
    const TomographySet& data, CircularConvention conv = CircularConvention::MinusI,
    const Tolerances& tol = {}) {
  const auto p = normalize_strengths(data);
  Eigen::Matrix<double, 16, 1> probs;
  for (int i = 0; i < 16; ++i) probs(i) = p[static_cast<std::size_t>(i)];
  const Eigen::Matrix<double, 16, 1> r = detail::tomography_design(conv).fullPivLu().solve(probs);
  Mat4c rho = detail::hermitian_part(detail::from_pauli_coefficients(r));
  rho /= rho.trace().real();
  Metadata meta = {{"method", "linear"},
                   {"circular_convention", conv == CircularConvention::MinusI ? "minus-i" : "plus-i"}};
  return TwoQubitDensityMatrix::raw(rho, tol, std::move(meta));
}

struct MleOptions {
  CircularConvention convention = CircularConvention::MinusI;
  NelderMeadOptions optimizer = {.max_evaluations = 200000,
                                 .f_tolerance = 1e-12,
                                 .x_tolerance = 0.0,
                                 .initial_step = 0.05,
                                 .steps = {},
                                 .restarts = 4};
};

struct MleResult {
  TwoQubitDensityMatrix state;
  double objective = 0.0;        // minimized negative log-likelihood (shifted)
  double start_objective = 0.0;  // at the clamped linear-inversion start
  std::size_t evaluations = 0;
};

namespace detail {

/// rho = T T^dagger with T lower triangular: 4 real diagonal entries, then the
/// six strictly-lower entries as (re, im) pairs in row-major order.
inline Eigen::Matrix4cd cholesky_factor(std::span<const double> x) {
  Eigen::Matrix4cd t = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i) t(i, i) = x[static_cast<std::size_t>(i)];
  std::size_t k = 4;
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j, k += 2) t(i, j) = Complex(x[k], x[k + 1]);
  return t;
}

/// Inverse of cholesky_factor for a PSD (possibly singular) matrix.
inline std::vector<double> cholesky_parameters(const Mat4c& rho) {
  const auto eig = hermitian_eigen<4>(rho);
  Eigen::Vector4d roots;
  for (int i = 0; i < 4; ++i) roots(i) = std::sqrt(std::max(eig.values[i], 0.0));
  const Mat4c b = eig.vectors * roots.asDiagonal();
  // b^dagger = Q R  =>  b b^dagger = R^dagger R, and T = R^dagger is lower triangular.
  Eigen::HouseholderQR<Mat4c> qr(b.adjoint());
  Mat4c r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 4; ++i) {
    const double mag = std::abs(r(i, i));
    if (mag > 0.0) r.row(i) *= std::conj(r(i, i)) / mag;
  }
  const Mat4c t = r.adjoint();
  std::vector<double> x(16);
  for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(i)] = t(i, i).real();
  std::size_t k = 4;
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j, k += 2) {
      x[k] = t(i, j).real();
      x[k + 1] = t(i, j).imag();
    }
  return x;
}

/// Projects a Hermitian matrix onto unit-trace PSD matrices by clamping
/// negative eigenvalues.
inline Mat4c clamp_to_psd(const Mat4c& m) {
  auto eig = hermitian_eigen<4>(m);
  Eigen::Vector4d vals;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += (vals(i) = std::max(eig.values[i], 0.0));
  if (!(sum > 0.0)) return Mat4c::Identity() / 4.0;
  return eig.vectors * (vals / sum).asDiagonal() * eig.vectors.adjoint();
}

}  // namespace detail

/// Maximum-likelihood reconstruction over rho = T T^dagger / Tr(T T^dagger).
///
/// counts: Poisson deviance per total count, expected counts N_q Tr(P_i T T^dagger)
/// where N_q is the HH+HV+VH+VV total.
/// g2: least squares between normalized strengths and Tr(P_i rho).
inline MleResult mle_reconstruct(const TomographySet& data, const MleOptions& opts = {}) {
  const auto probs = normalize_strengths(data);
  std::array<Mat4c, 16> proj;
  for (std::size_t i = 0; i < 16; ++i) proj[i] = projector(kTomographyBases[i], opts.convention);

  double total = 0.0;
  for (std::size_t i = 0; i < 16; ++i) total += probs[i];
  const bool poisson = data.kind() == StrengthKind::Counts;

  auto objective = [&](std::span<const double> x) {
    const Mat4c t = detail::cholesky_factor(x);
    const Mat4c m = t * t.adjoint();
    const double tr = m.trace().real();
    if (!(tr > 0.0)) return std::numeric_limits<double>::infinity();
    double f = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double e = (proj[i] * m).trace().real();
      if (poisson) {
        const double mu = std::max(e, 1e-300);
        f += mu - probs[i] + (probs[i] > 0.0 ? probs[i] * std::log(probs[i] / mu) : 0.0);
      } else {
        const double d = probs[i] - e / tr;
        f += d * d;
      }
    }
    return poisson ? f / total : f;
  };

  const TwoQubitDensityMatrix linear = linear_reconstruct(data, opts.convention);
  const std::vector<double> start = detail::cholesky_parameters(detail::clamp_to_psd(linear.matrix()));
  const double start_value = objective(start);

  const NelderMeadResult nm = NelderMead(opts.optimizer).minimize(objective, start);
  if (!nm.converged)
    throw ConvergenceError("maximum-likelihood reconstruction did not converge within " +
                               std::to_string(opts.optimizer.max_evaluations) + " evaluations",
                           nm.point, nm.value);

  const Mat4c t = detail::cholesky_factor(nm.point);
  Mat4c rho = t * t.adjoint();
  rho = detail::hermitian_part(Mat4c(rho / rho.trace().real()));
  Metadata meta = {{"method", "mle"},
                   {"likelihood", poisson ? "poisson" : "gaussian"},
                   {"circular_convention",
                    opts.convention == CircularConvention::MinusI ? "minus-i" : "plus-i"},
                   {"objective", nm.value},
                   {"start_objective", start_value},
                   {"evaluations", nm.evaluations}};
  return MleResult{TwoQubitDensityMatrix::physical(rho, {}, std::move(meta)), nm.value,
                   start_value, nm.evaluations};
}

}  // namespace pairtomo
