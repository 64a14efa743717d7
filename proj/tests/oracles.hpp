#pragma once

// Library-facing oracles and synthetic data shared by the unit tests and the
// acceptance binary. Everything here is computed by brute force (grids,
// quadrature, time integration) rather than through the closed forms under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pairtomo/cascade_sim.hpp"
#include "pairtomo/decomposer.hpp"
#include "pairtomo/fitting.hpp"
#include "pairtomo/tomography.hpp"
#include "test_support.hpp"

namespace testsupport {

/// Exact Born probabilities for all 16 bases, kind g2.
inline pairtomo::TomographySet exact_set(const M4& rho, bool plus_i = false) {
  std::vector<pairtomo::MeasurementRecord> recs;
  for (const auto& b : pairtomo::kTomographyBases)
    recs.push_back({b, born(rho, pairtomo::to_char(b.xx), pairtomo::to_char(b.x), plus_i),
                    pairtomo::StrengthKind::G2});
  return pairtomo::TomographySet(recs);
}

/// Random rank-2 state from two orthonormal columns of a Haar unitary.
inline pairtomo::Rank2State random_rank2(std::mt19937_64& rng) {
  const M4 u = random_unitary<4>(rng);
  std::uniform_real_distribution<double> w(0.5, 0.95);
  const double p = w(rng);
  return pairtomo::make_rank2({p, 1.0 - p},
                              {pairtomo::TwoQubitPureState(u.col(0)), pairtomo::TwoQubitPureState(u.col(1))});
}

/// Brute-force oracle: the members phi0 = c sqrt(p0) psi0 + e^{i chi} s sqrt(p1) psi1,
/// phi1 = -e^{-i chi} s sqrt(p0) psi0 + c sqrt(p1) psi1 cover every
/// rank-2-supported two-element decomposition up to per-element phases, which
/// do not change the average. 400 x 400 grid, then three zooms.
inline double grid_oracle(const pairtomo::Rank2State& r) {
  const V4 a = std::sqrt(r.weights[0]) * r.states[0].amplitudes();
  const V4 b = std::sqrt(r.weights[1]) * r.states[1].amplitudes();
  auto f = [&](double th, double chi) {
    const C e = std::polar(1.0, chi);
    const V4 v0 = std::cos(th) * a + e * std::sin(th) * b;
    const V4 v1 = -std::conj(e) * std::sin(th) * a + std::cos(th) * b;
    double s = 0.0;
    for (const V4& v : {v0, v1}) {
      const double q = v.squaredNorm();
      if (q > 1e-300) s += q * entropy_oracle(v);
    }
    return s;
  };
  double lo_t = 0.0, hi_t = kPi, lo_c = 0.0, hi_c = 2.0 * kPi;
  double best = 1e9, bt = 0.0, bc = 0.0;
  for (int level = 0; level < 4; ++level) {
    const int n = 400;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double th = lo_t + (hi_t - lo_t) * i / n;
        const double chi = lo_c + (hi_c - lo_c) * j / n;
        const double v = f(th, chi);
        if (v < best) {
          best = v;
          bt = th;
          bc = chi;
        }
      }
    const double dt = 4.0 * (hi_t - lo_t) / n, dc = 4.0 * (hi_c - lo_c) / n;
    lo_t = bt - dt;
    hi_t = bt + dt;
    lo_c = bc - dc;
    hi_c = bc + dc;
  }
  return best;
}

inline constexpr double kHbar = 0.6582119569;  // ueV ns

/// Composite Simpson quadrature of 1/2 int_0^T G e^{-G t} e^{-(gd + i S/hbar) t} dt,
/// normalized by the emitted fraction up to T.
inline C coherence_quadrature(double s, double tau_x, double gd, double t_end) {
  const double g = 1.0 / tau_x;
  const int n = 400000;
  const double h = t_end / n;
  C acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * h;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * g * std::exp(-g * t) * std::exp(C(-gd * t, -s * t / kHbar));
  }
  return 0.5 * acc * h / 3.0 / (1.0 - std::exp(-g * t_end));
}

/// Steady-state emission rates by RK4 integration of the ground/X/XX ladder
/// dn0 = -g n0 + n1/tx, dn1 = g n0 - g n1 - n1/tx + n2/txx, dn2 = g n1 - n2/txx,
/// started empty and run to t = 100 tx.
inline std::array<double, 2> integrate_ladder(double g, double tx, double txx) {
  std::array<double, 3> n{1.0, 0.0, 0.0};
  auto rhs = [&](const std::array<double, 3>& y) {
    return std::array<double, 3>{-g * y[0] + y[1] / tx, g * y[0] - g * y[1] - y[1] / tx + y[2] / txx,
                                 g * y[1] - y[2] / txx};
  };
  const double t_end = 100.0 * tx;
  const double rate = std::max({g, 1.0 / tx, 1.0 / txx});
  const int steps = static_cast<int>(std::ceil(t_end * rate / 0.01));
  const double h = t_end / steps;
  for (int s = 0; s < steps; ++s) {
    std::array<double, 3> k1 = rhs(n), y2, y3, y4;
    for (int i = 0; i < 3; ++i) y2[i] = n[i] + 0.5 * h * k1[i];
    const auto k2 = rhs(y2);
    for (int i = 0; i < 3; ++i) y3[i] = n[i] + 0.5 * h * k2[i];
    const auto k3 = rhs(y3);
    for (int i = 0; i < 3; ++i) y4[i] = n[i] + h * k3[i];
    const auto k4 = rhs(y4);
    for (int i = 0; i < 3; ++i) n[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return {n[1] / tx, n[2] / txx};
}

/// Power series from the rate model with g tau_X = s P, independent line scales
/// and optional multiplicative log-normal noise.
inline pairtomo::PowerSeries synthetic_power(double ratio, double s, double sigma, std::uint64_t seed,
                                             int n = 100, double p_lo = 0.5, double p_hi = 5000.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const double tx = 1.2, txx = tx / ratio;
  std::vector<pairtomo::PowerPoint> pts;
  for (int i = 0; i < n; ++i) {
    const double p = p_lo * std::pow(p_hi / p_lo, static_cast<double>(i) / (n - 1));
    const auto r = pairtomo::rate_model(s * p / tx, tx, txx);
    const double nx = sigma > 0 ? std::exp(noise(rng)) : 1.0;
    const double nxx = sigma > 0 ? std::exp(noise(rng)) : 1.0;
    pts.push_back({p, 3e4 * r.i_x * nx, 7e3 * r.i_xx * nxx});
  }
  return pairtomo::PowerSeries(pts);
}

inline constexpr double kMuB = 57.88;  // ueV/T

/// Both Zeeman branches on B = 0..5 T in steps of `step`, with optional
/// Gaussian energy noise in ueV.
inline pairtomo::MagnetoSeries synthetic_magneto(double e0, double g, double kappa, double sigma_uev,
                                                 std::uint64_t seed, double step = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma_uev);
  std::vector<pairtomo::MagnetoPoint> pts;
  const int n = static_cast<int>(std::lround(5.0 / step));
  for (int i = 0; i <= n; ++i) {
    const double b = step * i;
    const double base = e0 * 1e3 + kappa * b * b;
    const double z = 0.5 * g * kMuB * b;
    const double up = base + z + (sigma_uev > 0 ? noise(rng) : 0.0);
    const double lo = base - z + (sigma_uev > 0 ? noise(rng) : 0.0);
    pts.push_back({b, up * 1e-3, lo * 1e-3});
  }
  return pairtomo::MagnetoSeries(pts);
}

}  // namespace testsupport
