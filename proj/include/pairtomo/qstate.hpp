#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/tolerances.hpp"

namespace pairtomo {

using Metadata = nlohmann::ordered_json;

/// Computational basis labels, |00>,|01>,|10>,|11> == |HH>,|HV>,|VH>,|VV>.
inline constexpr std::array<const char*, 4> kBasisLabels = {"HH", "HV", "VH", "VV"};

enum class Subsystem { A, B };

struct ValidationReport {
  double hermiticity_defect = 0.0;
  double trace = 0.0;
  double min_eigenvalue = 0.0;
  bool physical = false;
  std::vector<std::string> defects;  // one entry per violated tolerance
};

/// Inspects a raw 4x4 matrix against the tolerances. Never throws.
inline ValidationReport validate(const Mat4c& m, const Tolerances& tol = {}) {
  ValidationReport r;
  r.hermiticity_defect = detail::hermiticity_defect(m);
  r.trace = m.trace().real();
  r.min_eigenvalue = detail::hermitian_eigen<4>(m).values[3];
  auto note = [&](const char* field, double value, double limit) {
    std::ostringstream os;
    os.precision(6);
    os << field << " = " << value << " (limit " << limit << ")";
    r.defects.push_back(os.str());
  };
  if (!std::isfinite(m.cwiseAbs().sum())) r.defects.emplace_back("non-finite entries");
  if (r.hermiticity_defect > tol.hermiticity)
    note("hermiticity_defect", r.hermiticity_defect, tol.hermiticity);
  if (std::abs(r.trace - 1.0) > tol.trace) note("trace", r.trace, tol.trace);
  if (r.min_eigenvalue < -tol.min_eigenvalue)
    note("min_eigenvalue", r.min_eigenvalue, -tol.min_eigenvalue);
  r.physical = r.defects.empty();
  return r;
}

/// Two-qubit density matrix in the fixed HH,HV,VH,VV order.
///
/// `physical()` enforces Hermiticity, unit trace and positivity within the
/// given tolerances and symmetrizes the stored matrix. `raw()` accepts any
/// 4x4 matrix and records its defects in the report; operations that need a
/// state call `require_physical()`.
class TwoQubitDensityMatrix {
 public:
  static TwoQubitDensityMatrix physical(const Mat4c& m, const Tolerances& tol = {},
                                        Metadata meta = Metadata::object()) {
    ValidationReport report = validate(m, tol);
    if (!report.physical) {
      const std::string& first = report.defects.front();
      throw ValidationError(first.substr(0, first.find(' ')),
                            "not a physical density matrix: " + first);
    }
    Mat4c h = detail::hermitian_part(m);
    report.hermiticity_defect = detail::hermiticity_defect(h);
    return TwoQubitDensityMatrix(h, tol, std::move(report), std::move(meta));
  }

  static TwoQubitDensityMatrix raw(const Mat4c& m, const Tolerances& tol = {},
                                   Metadata meta = Metadata::object()) {
    ValidationReport report = validate(m, tol);
    return TwoQubitDensityMatrix(m, tol, std::move(report), std::move(meta));
  }

  const Mat4c& matrix() const noexcept { return m_; }
  Complex operator()(int i, int j) const { return m_(i, j); }
  const ValidationReport& report() const noexcept { return report_; }
  bool is_physical() const noexcept { return report_.physical; }
  const Tolerances& tolerances() const noexcept { return tol_; }
  const Metadata& metadata() const noexcept { return meta_; }
  double trace() const { return m_.trace().real(); }

  TwoQubitDensityMatrix with_metadata(Metadata meta) const {
    TwoQubitDensityMatrix out = *this;
    out.meta_ = std::move(meta);
    return out;
  }

  /// Raw copy scaled to unit trace.
  TwoQubitDensityMatrix trace_normalized() const {
    const double t = trace();
    if (!(std::abs(t) > 0.0)) throw ValidationError("trace", "cannot normalize a zero-trace matrix");
    return raw(m_ / t, tol_, meta_);
  }

  void require_physical(const char* operation) const {
    if (report_.physical) return;
    std::string what = std::string(operation) + " requires a physical density matrix";
    std::string field = "state";
    if (!report_.defects.empty()) {
      what += ": " + report_.defects.front();
      field = report_.defects.front().substr(0, report_.defects.front().find(' '));
    }
    throw ValidationError(field, what);
  }

 private:
  TwoQubitDensityMatrix(Mat4c m, Tolerances tol, ValidationReport report, Metadata meta)
      : m_(std::move(m)), tol_(tol), report_(std::move(report)), meta_(std::move(meta)) {}

  Mat4c m_;
  Tolerances tol_;
  ValidationReport report_;
  Metadata meta_;
};

namespace detail {

template <int N>
Eigen::Matrix<Complex, N, 1> checked_state(const Eigen::Matrix<Complex, N, 1>& v, double tol,
                                           double phase_cut) {
  const double n = v.norm();
  if (!(std::abs(n - 1.0) <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << "state norm " << n << " differs from 1 by more than " << tol;
    throw ValidationError("norm", os.str());
  }
  Eigen::Matrix<Complex, N, 1> out = v / n;
  canonicalize_phase(out, phase_cut);
  return out;
}

}  // namespace detail

/// Normalized, phase-canonical single-qubit state.
class SingleQubitState {
 public:
  SingleQubitState() : a_(1.0, 0.0) {}
  explicit SingleQubitState(const Vec2c& amplitudes, const Tolerances& tol = {})
      : a_(detail::checked_state<2>(amplitudes, tol.norm, tol.phase_cut)) {}
  static SingleQubitState normalized(const Vec2c& v, const Tolerances& tol = {}) {
    const double n = v.norm();
    if (!(n > 0.0)) throw ValidationError("norm", "zero vector cannot be normalized");
    return SingleQubitState(v / n, tol);
  }
  const Vec2c& amplitudes() const noexcept { return a_; }

 private:
  Vec2c a_;
};

/// Normalized two-qubit pure state. The first amplitude with magnitude above
/// the phase cut is real and positive.
class TwoQubitPureState {
 public:
  TwoQubitPureState() : a_(Vec4c::Zero()) { a_(0) = 1.0; }
  explicit TwoQubitPureState(const Vec4c& amplitudes, const Tolerances& tol = {})
      : a_(detail::checked_state<4>(amplitudes, tol.norm, tol.phase_cut)) {}
  static TwoQubitPureState normalized(const Vec4c& v, const Tolerances& tol = {}) {
    const double n = v.norm();
    if (!(n > 0.0)) throw ValidationError("norm", "zero vector cannot be normalized");
    return TwoQubitPureState(v / n, tol);
  }

  const Vec4c& amplitudes() const noexcept { return a_; }
  Complex operator[](int i) const { return a_(i); }
  /// <this|other>
  Complex overlap(const TwoQubitPureState& other) const { return a_.dot(other.a_); }
  Mat4c projector() const { return a_ * a_.adjoint(); }
  TwoQubitDensityMatrix density_matrix() const {
    return TwoQubitDensityMatrix::physical(projector());
  }

 private:
  Vec4c a_;
};

struct EigenDecomposition {
  std::array<double, 4> eigenvalues{};  // descending
  std::array<TwoQubitPureState, 4> eigenstates;

  Mat4c reconstruct() const {
    Mat4c out = Mat4c::Zero();
    for (int i = 0; i < 4; ++i) out += eigenvalues[i] * eigenstates[i].projector();
    return out;
  }
};

inline EigenDecomposition eigendecompose(const TwoQubitDensityMatrix& rho) {
  const double defect = detail::hermiticity_defect(rho.matrix());
  if (defect > rho.tolerances().hermiticity)
    throw ValidationError("hermiticity_defect", "eigendecompose needs a Hermitian matrix, defect " +
                                                    std::to_string(defect));
  const auto eig = detail::hermitian_eigen<4>(rho.matrix());
  EigenDecomposition out;
  Tolerances tol = rho.tolerances();
  tol.norm = 1e-10;
  for (int i = 0; i < 4; ++i) {
    out.eigenvalues[i] = eig.values[i];
    out.eigenstates[i] = TwoQubitPureState(eig.vectors.col(i), tol);
  }
  return out;
}

namespace detail {

/// Square root of a Hermitian PSD matrix. Eigenvalues in [-clamp, 0) are
/// treated as zero; anything more negative is an error. Eigenvalues below the
/// solver's rounding floor are also zeroed, otherwise sqrt turns 1e-17 noise
/// into 3e-9 and rank-deficient inputs lose eight digits.
inline Mat4c psd_sqrt(const Mat4c& m, double clamp) {
  const auto eig = hermitian_eigen<4>(m);
  double scale = 0.0;
  for (double v : eig.values) scale = std::max(scale, std::abs(v));
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  Eigen::Vector4d roots;
  for (int i = 0; i < 4; ++i) {
    const double v = eig.values[i];
    if (v < -clamp)
      throw ValidationError("min_eigenvalue",
                            "matrix square root of a non-PSD matrix (eigenvalue " +
                                std::to_string(v) + ")");
    roots(i) = v <= floor ? 0.0 : std::sqrt(v);
  }
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}

}  // namespace detail

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. The trace norm is
/// taken as the sum of singular values of sqrt(rho) sqrt(sigma), which avoids a
/// second square root of near-zero eigenvalues.
inline double fidelity(const TwoQubitDensityMatrix& rho, const TwoQubitDensityMatrix& sigma) {
  rho.require_physical("fidelity");
  sigma.require_physical("fidelity");
  const Mat4c a = detail::psd_sqrt(rho.matrix(), rho.tolerances().sqrt_clamp);
  const Mat4c b = detail::psd_sqrt(sigma.matrix(), sigma.tolerances().sqrt_clamp);
  const Eigen::JacobiSVD<Mat4c> svd(a * b);
  const double tr = svd.singularValues().sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

/// Reduced state after tracing out `traced`.
inline Mat2c partial_trace(const Mat4c& m, Subsystem traced) {
  Mat2c out = Mat2c::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        out(i, j) += traced == Subsystem::B ? m(2 * i + k, 2 * j + k) : m(2 * k + i, 2 * k + j);
  return out;
}

inline Mat2c partial_trace(const TwoQubitDensityMatrix& rho, Subsystem traced) {
  rho.require_physical("partial_trace");
  return partial_trace(rho.matrix(), traced);
}

inline Mat2c partial_trace(const TwoQubitPureState& psi, Subsystem traced) {
  return partial_trace(psi.projector(), traced);
}

}  // namespace pairtomo
