#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pairtomo/errors.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/nelder_mead.hpp"

namespace pairtomo {

// ---------------------------------------------------------------------------
// Power dependence

struct PowerPoint {
  double power = 0.0;  // uW
  double intensity_x = 0.0;
  double intensity_xx = 0.0;
};

class PowerSeries {
 public:
  explicit PowerSeries(std::vector<PowerPoint> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      const std::string row = "power series point " + std::to_string(i);
      if (!(p.power > 0.0)) throw InputError(row + ": power must be positive");
      if (i > 0 && !(p.power > points_[i - 1].power))
        throw InputError(row + ": powers must be strictly increasing");
      if (!(p.intensity_x >= 0.0) || !(p.intensity_xx >= 0.0))
        throw InputError(row + ": intensities must be non-negative");
    }
  }
  const std::vector<PowerPoint>& points() const noexcept { return points_; }

 private:
  std::vector<PowerPoint> points_;
};

struct RateIntensities {
  double i_x = 0.0;
  double i_xx = 0.0;
};

/// Steady-state emission rates of the ground -> X -> XX ladder with capture
/// rate g on both steps: i_X = g / D, i_XX = g^2 tau_X / D,
/// D = 1 + g tau_X + g^2 tau_X tau_XX.
inline RateIntensities rate_model(double g, double tau_x, double tau_xx) {
  if (!(g > 0.0 && tau_x > 0.0 && tau_xx > 0.0))
    throw ValidationError("rate_model", "pump rate and lifetimes must be positive");
  const double d = 1.0 + g * tau_x + g * g * tau_x * tau_xx;
  return {g / d, g * g * tau_x / d};
}

struct PowerFit {
  double lifetime_ratio = 0.0;  ///< tau_X / tau_XX
  double pump_scale = 0.0;      ///< g tau_X per unit power
  double scale_x = 0.0;         ///< I_X = scale_x * u / D
  double scale_xx = 0.0;        ///< I_XX = scale_xx * u^2 / D
  double residual = 0.0;        ///< rms of natural-log residuals
  std::size_t evaluations = 0;
};

namespace detail {

// With u = g tau_X and r = tau_X / tau_XX the model shape is
// I_X ~ u / D, I_XX ~ u^2 / D, D = 1 + u + u^2 / r.
inline double log_shape_x(double u, double r) { return std::log(u) - std::log1p(u + u * u / r); }
inline double log_shape_xx(double u, double r) { return 2.0 * std::log(u) - std::log1p(u + u * u / r); }

}  // namespace detail

/// Least-squares fit of the rate model in log-intensity space. The two
/// intensity scales are profiled out in closed form; the pump scale and the
/// lifetime ratio are searched on a grid, refined by simplex descent and
/// polished with Gauss-Newton steps.
/// Zero intensities are left out of the log fit.
inline PowerFit fit_power_series(const PowerSeries& data) {
  const auto& pts = data.points();
  if (pts.size() < 6) throw ValidationError("points", "power fit needs at least 6 points");
  if (pts.back().power / pts.front().power < 10.0)
    throw ValidationError("power", "power fit needs at least one decade of excitation power");
  std::size_t nx = 0, nxx = 0;
  for (const auto& p : pts) {
    nx += p.intensity_x > 0.0;
    nxx += p.intensity_xx > 0.0;
  }
  if (nx < 2 || nxx < 2) throw ValidationError("intensity", "power fit needs two positive intensities per line");

  double log_ref = 0.0;
  for (const auto& p : pts) log_ref += std::log(p.power);
  log_ref /= static_cast<double>(pts.size());
  std::vector<double> logp(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) logp[i] = std::log(pts[i].power) - log_ref;

  struct Eval {
    double sse, log_ax, log_axx;
  };
  auto evaluate = [&](double log_s, double log_r) {
    const double r = std::exp(log_r);
    double sx = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = std::exp(log_s + logp[i]);
      if (pts[i].intensity_x > 0.0) sx += std::log(pts[i].intensity_x) - detail::log_shape_x(u, r);
      if (pts[i].intensity_xx > 0.0) sxx += std::log(pts[i].intensity_xx) - detail::log_shape_xx(u, r);
    }
    const double ax = sx / static_cast<double>(nx), axx = sxx / static_cast<double>(nxx);
    double sse = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = std::exp(log_s + logp[i]);
      if (pts[i].intensity_x > 0.0) {
        const double d = std::log(pts[i].intensity_x) - ax - detail::log_shape_x(u, r);
        sse += d * d;
      }
      if (pts[i].intensity_xx > 0.0) {
        const double d = std::log(pts[i].intensity_xx) - axx - detail::log_shape_xx(u, r);
        sse += d * d;
      }
    }
    return Eval{sse, ax, axx};
  };

  std::size_t evaluations = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> x0{0.0, 0.0};
  for (int i = 0; i <= 64; ++i) {
    const double log_s = -8.0 + 16.0 * i / 64.0;
    for (int j = 0; j <= 40; ++j) {
      const double log_r = std::log(0.05) + (std::log(20.0) - std::log(0.05)) * j / 40.0;
      const double f = evaluate(log_s, log_r).sse;
      ++evaluations;
      if (f < best) {
        best = f;
        x0 = {log_s, log_r};
      }
    }
  }

  NelderMeadOptions opts;
  // Relative to the grid optimum so noisy data (sse ~ 1e-1) can still converge.
  opts.f_tolerance = 1e-13 * best + 1e-28;
  opts.x_tolerance = 1e-10;
  opts.initial_step = 0.1;
  opts.max_evaluations = 50000;
  const NelderMeadResult nm = NelderMead(opts).minimize(
      [&](std::span<const double> x) { return evaluate(x[0], x[1]).sse; }, x0);
  evaluations += nm.evaluations;
  if (!nm.converged) throw ConvergenceError("power-series fit did not converge", nm.point, nm.value);

  // The simplex only pins the minimum to ~sqrt(eps) through sse values.
  // Gauss-Newton on the residuals with analytic derivatives finishes the job.
  std::array<double, 2> x{nm.point[0], nm.point[1]};
  Eval e = evaluate(x[0], x[1]);
  for (int iter = 0; iter < 20; ++iter) {
    const std::size_t m = nx + nxx;
    Eigen::MatrixXd jac(m, 4);
    Eigen::VectorXd res(m);
    const double r = std::exp(x[1]);
    std::size_t row = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = std::exp(x[0] + logp[i]);
      const double d = 1.0 + u + u * u / r;
      const double l_a = (u + 2.0 * u * u / r) / d, l_b = -(u * u / r) / d;
      if (pts[i].intensity_x > 0.0) {
        res(row) = std::log(pts[i].intensity_x) - e.log_ax - detail::log_shape_x(u, r);
        jac.row(row++) << -1.0 + l_a, l_b, -1.0, 0.0;
      }
      if (pts[i].intensity_xx > 0.0) {
        res(row) = std::log(pts[i].intensity_xx) - e.log_axx - detail::log_shape_xx(u, r);
        jac.row(row++) << -2.0 + l_a, l_b, 0.0, -1.0;
      }
    }
    const Eigen::Vector4d step = jac.colPivHouseholderQr().solve(-res);
    const std::array<double, 2> trial{x[0] + step(0), x[1] + step(1)};
    const Eval et = evaluate(trial[0], trial[1]);
    ++evaluations;
    if (!(et.sse <= e.sse * (1.0 + 1e-12) + 1e-300)) break;
    x = trial;
    e = et;
    if (std::abs(step(0)) + std::abs(step(1)) < 1e-15) break;
  }

  PowerFit fit;
  fit.lifetime_ratio = std::exp(x[1]);
  fit.pump_scale = std::exp(x[0] - log_ref);
  fit.scale_x = std::exp(e.log_ax);
  fit.scale_xx = std::exp(e.log_axx);
  fit.residual = std::sqrt(e.sse / static_cast<double>(nx + nxx));
  fit.evaluations = evaluations;
  return fit;
}

// ---------------------------------------------------------------------------
// Zeeman / diamagnetic dispersion

/// Bohr magneton, ueV/T.
inline constexpr double kBohrMagnetonUeVPerT = 57.88;

struct MagnetoPoint {
  double field = 0.0;          // T
  double energy_upper = 0.0;   // meV
  std::optional<double> energy_lower;  // meV
};

class MagnetoSeries {
 public:
  explicit MagnetoSeries(std::vector<MagnetoPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw InputError("magneto series is empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const std::string row = "magneto point " + std::to_string(i);
      if (!(points_[i].field >= 0.0)) throw InputError(row + ": field must be non-negative");
      if (!std::isfinite(points_[i].energy_upper) ||
          (points_[i].energy_lower && !std::isfinite(*points_[i].energy_lower)))
        throw InputError(row + ": non-finite energy");
      for (std::size_t j = 0; j < i; ++j)
        if (points_[j].field == points_[i].field)
          throw InputError(row + ": field values must be distinct");
    }
  }
  const std::vector<MagnetoPoint>& points() const noexcept { return points_; }

 private:
  std::vector<MagnetoPoint> points_;
};

struct MagnetoFit {
  double e0 = 0.0;       ///< meV
  double g_factor = 0.0;
  double kappa = 0.0;    ///< ueV/T^2
  bool g_fixed = false;  ///< single branch: g held at 0
  std::array<bool, 3> identifiable{true, true, true};  ///< (e0, kappa, g)
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero(); ///< (e0 [meV], kappa [ueV/T^2], g)
  double rms_residual = 0.0;  ///< ueV
  std::size_t observations = 0;
};

struct MagnetoOptions {
  /// Return unidentifiable parameters as 0 with a flag instead of failing.
  bool allow_unidentifiable = false;
};

/// Linear least squares for E_pm(B) = E0 + kappa B^2 +- g mu_B B / 2; the upper
/// branch takes the + sign. Solved with a column-scaled SVD (minimum-norm on
/// unidentifiable directions).
inline MagnetoFit fit_magneto(const MagnetoSeries& data, const MagnetoOptions& opts = {}) {
  const auto& pts = data.points();
  const bool both = std::any_of(pts.begin(), pts.end(), [](const auto& p) { return p.energy_lower.has_value(); });

  std::vector<std::array<double, 4>> rows;  // 1, B^2, +-mu_B B / 2, energy [ueV]
  for (const auto& p : pts) {
    const double zeeman = 0.5 * kBohrMagnetonUeVPerT * p.field;
    rows.push_back({1.0, p.field * p.field, both ? zeeman : 0.0, p.energy_upper * 1e3});
    if (p.energy_lower) rows.push_back({1.0, p.field * p.field, -zeeman, *p.energy_lower * 1e3});
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const int cols = both ? 3 : 2;
  Eigen::MatrixXd x(n, cols);
  Eigen::VectorXd y(n);
  // Subtracting a reference energy keeps E0 well conditioned next to ueV-scale terms.
  const double y_ref = rows.front()[3];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < cols; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    y(i) = rows[static_cast<std::size_t>(i)][3] - y_ref;
  }
  Eigen::VectorXd scale(cols);
  for (int j = 0; j < cols; ++j) {
    scale(j) = x.col(j).norm();
    if (scale(j) == 0.0) scale(j) = 1.0;
  }
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cut = 1e-10 * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > cut;

  MagnetoFit fit;
  fit.g_fixed = !both;
  fit.observations = static_cast<std::size_t>(n);
  const Eigen::MatrixXd& v = svd.matrixV();
  std::array<bool, 3> ident{true, true, true};
  for (int j = 0; j < cols; ++j)
    for (Eigen::Index k = rank; k < cols; ++k)
      if (std::abs(v(j, k)) > 1e-8) ident[static_cast<std::size_t>(j)] = false;
  if (rank < cols && !opts.allow_unidentifiable) {
    static constexpr std::array<const char*, 3> kNames = {"e0", "kappa", "g_factor"};
    std::string names;
    for (int j = 0; j < cols; ++j)
      if (!ident[static_cast<std::size_t>(j)]) names += std::string(names.empty() ? "" : ", ") + kNames[static_cast<std::size_t>(j)];
    throw ValidationError("design", "rank-deficient magneto design; unidentifiable: " + names);
  }
  if (!opts.allow_unidentifiable && pts.size() < 4)
    throw ValidationError("points", "magneto fit needs at least 4 field points");

  // Minimum-norm solution restricted to the numerical rank.
  Eigen::VectorXd beta_s = Eigen::VectorXd::Zero(cols);
  const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
  for (int k = 0; k < rank; ++k) beta_s += v.col(k) * (uty(k) / sv(k));
  Eigen::VectorXd beta = beta_s.cwiseQuotient(scale);
  for (int j = 0; j < cols; ++j)
    if (!ident[static_cast<std::size_t>(j)]) beta(j) = 0.0;

  const Eigen::VectorXd resid = y - x * beta;
  const double rss = resid.squaredNorm();
  const Eigen::Index dof = n - rank;
  const double sigma2 = dof > 0 ? rss / static_cast<double>(dof) : 0.0;
  Eigen::MatrixXd cov_s = Eigen::MatrixXd::Zero(cols, cols);
  for (int k = 0; k < rank; ++k) cov_s += v.col(k) * v.col(k).transpose() / (sv(k) * sv(k));
  const Eigen::MatrixXd cov = sigma2 * scale.cwiseInverse().asDiagonal() * cov_s * scale.cwiseInverse().asDiagonal();

  // e0 back to meV, covariance entries for e0 likewise.
  fit.e0 = (beta(0) + y_ref) * 1e-3;
  fit.kappa = beta(1);
  fit.g_factor = both ? beta(2) : 0.0;
  fit.identifiable = {ident[0], ident[1], both ? ident[2] : false};
  const std::array<double, 3> unit = {1e-3, 1.0, 1.0};
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < cols; ++j)
      fit.covariance(i, j) = cov(i, j) * unit[static_cast<std::size_t>(i)] * unit[static_cast<std::size_t>(j)];
  fit.rms_residual = std::sqrt(rss / static_cast<double>(n));
  return fit;
}

}  // namespace pairtomo
