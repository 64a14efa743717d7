#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>

namespace pairtomo {

using Complex = std::complex<double>;
using Mat2c = Eigen::Matrix2cd;
using Mat4c = Eigen::Matrix4cd;
using Vec2c = Eigen::Vector2cd;
using Vec4c = Eigen::Vector4cd;

inline constexpr double kPi = 3.14159265358979323846;

namespace detail {

/// Largest elementwise deviation from Hermiticity.
template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  return Plain(0.5 * (m + m.adjoint()));
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
template <int N>
struct HermitianEigen {
  std::array<double, N> values{};
  Eigen::Matrix<Complex, N, N> vectors;  // columns
};

template <int N>
HermitianEigen<N> hermitian_eigen(const Eigen::Matrix<Complex, N, N>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Complex, N, N>> solver(hermitian_part(m));
  // Eigen returns ascending order.
  HermitianEigen<N> out;
  for (int i = 0; i < N; ++i) {
    out.values[i] = solver.eigenvalues()(N - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(N - 1 - i);
  }
  return out;
}

/// Multiplies v by a global phase so the first amplitude with magnitude above
/// `cut` is real and positive.
template <typename Vec>
void canonicalize_phase(Vec& v, double cut = 1e-8) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > cut) {
      v *= std::conj(v(i)) / std::abs(v(i));
      v(i) = Complex(std::abs(v(i)), 0.0);
      return;
    }
  }
}

inline Mat2c pauli(int k) {
  Mat2c s;
  switch (k) {
    case 0: s << 1, 0, 0, 1; break;
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, Complex(0, -1), Complex(0, 1), 0; break;
    default: s << 1, 0, 0, -1; break;
  }
  return s;
}

inline Mat4c kron(const Mat2c& a, const Mat2c& b) {
  Mat4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline Vec4c kron(const Vec2c& a, const Vec2c& b) {
  Vec4c out;
  out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return out;
}

/// -p log2 p with the convention 0 log 0 = 0.
inline double entropy_term(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

}  // namespace detail
}  // namespace pairtomo
