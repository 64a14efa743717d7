#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/qstate.hpp"
#include "pairtomo/tomography.hpp"

namespace pairtomo {

/// hbar in ueV * ns.
inline constexpr double kHbarUeVNs = 0.6582119569;

/// Biexciton-exciton cascade parameters. Units: ueV and ns.
struct CascadeParams {
  double fss = 7.0;         ///< exciton fine-structure splitting S, ueV
  double tau_x = 1.2;       ///< exciton lifetime, ns
  double tau_xx = 0.8;      ///< biexciton lifetime, ns
  double gamma_d = 0.0;     ///< pure dephasing rate of the exciton spin coherence, 1/ns
  double background = 0.0; ///< unpolarized coincidence fraction in [0, 1)
  std::optional<double> time_gate;  ///< keep only X emission times t < gate, ns

  void validate() const {
    if (!(tau_x > 0.0)) throw ValidationError("tau_x", "lifetime must be positive");
    if (!(tau_xx > 0.0)) throw ValidationError("tau_xx", "lifetime must be positive");
    if (!(gamma_d >= 0.0)) throw ValidationError("gamma_d", "dephasing rate must be non-negative");
    if (!(fss >= 0.0)) throw ValidationError("fss", "fine-structure splitting must be non-negative");
    if (!(background >= 0.0 && background < 1.0))
      throw ValidationError("background", "background fraction must lie in [0, 1)");
    if (time_gate && !(*time_gate > 0.0)) throw ValidationError("time_gate", "gate must be positive");
  }
};

/// Time-averaged HH-VV coherence: 1/2 <e^{-(gamma_d + i S/hbar) t}> over the
/// exponential exciton emission-time density, restricted to t < gate if set.
inline Complex cascade_coherence(const CascadeParams& p) {
  p.validate();
  const double gamma = 1.0 / p.tau_x;
  const Complex kappa(gamma + p.gamma_d, p.fss / kHbarUeVNs);
  if (!p.time_gate) return 0.5 * gamma / kappa;
  const double t = *p.time_gate;
  return 0.5 * gamma * (1.0 - std::exp(-kappa * t)) / kappa / (1.0 - std::exp(-gamma * t));
}

/// rho = (1 - bg) rho_cascade + bg I/4, rho_cascade = diag(1/2, 0, 0, 1/2)
/// plus the HH-VV coherence.
inline TwoQubitDensityMatrix cascade_state(const CascadeParams& p) {
  const Complex z = cascade_coherence(p);
  Mat4c c = Mat4c::Zero();
  c(0, 0) = 0.5;
  c(3, 3) = 0.5;
  c(0, 3) = z;
  c(3, 0) = std::conj(z);
  const Mat4c rho = (1.0 - p.background) * c + p.background * Mat4c::Identity() / 4.0;
  Metadata meta = {{"source", "cascade_state"},
                   {"fss_ueV", p.fss},
                   {"tau_x_ns", p.tau_x},
                   {"tau_xx_ns", p.tau_xx},
                   {"gamma_d_per_ns", p.gamma_d},
                   {"background", p.background}};
  if (p.time_gate) meta["time_gate_ns"] = *p.time_gate;
  return TwoQubitDensityMatrix::physical(rho, {}, std::move(meta));
}

/// Identity of the sampler, recorded with simulated data.
inline constexpr const char* kSamplerId = "mt19937_64+std::poisson_distribution (libstdc++), splitmix64 sub-seeds";

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Synthesizes the sixteen tomography records. n_per_basis = 0 returns the
/// exact Born probabilities as g2-kind strengths; otherwise each basis gets an
/// independent Poisson count with mean n_per_basis * Tr(P rho), drawn from a
/// generator seeded by (seed, basis index).
inline TomographySet simulate_counts(const TwoQubitDensityMatrix& rho, std::uint64_t n_per_basis,
                                     std::uint64_t seed,
                                     CircularConvention conv = CircularConvention::MinusI) {
  rho.require_physical("simulate_counts");
  std::vector<MeasurementRecord> recs;
  recs.reserve(16);
  for (std::size_t i = 0; i < kTomographyBases.size(); ++i) {
    const double prob = std::max(0.0, (projector(kTomographyBases[i], conv) * rho.matrix()).trace().real());
    MeasurementRecord rec{kTomographyBases[i], prob, StrengthKind::G2};
    if (n_per_basis > 0) {
      std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(i + 1)));
      const double mean = static_cast<double>(n_per_basis) * prob;
      rec.kind = StrengthKind::Counts;
      rec.strength = mean > 0.0 ? static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(rng)) : 0.0;
    }
    recs.push_back(rec);
  }
  return TomographySet(recs);
}

}  // namespace pairtomo
