#pragma once

namespace pairtomo {

/// Numerical tolerances shared by all state checks.
struct Tolerances {
  double hermiticity = 1e-12;     ///< max |rho - rho^dagger|
  double trace = 1e-9;            ///< allowed |trace - 1|
  double min_eigenvalue = 1e-10;  ///< eigenvalues >= -min_eigenvalue count as PSD
  double norm = 1e-12;            ///< allowed |norm - 1| for pure states
  double phase_cut = 1e-8;        ///< magnitude above which an amplitude fixes the global phase
  double sqrt_clamp = 1e-10;      ///< negative eigenvalues up to this magnitude are clamped in sqrt
};

}  // namespace pairtomo
