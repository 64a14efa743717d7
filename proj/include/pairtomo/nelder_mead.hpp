#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace pairtomo {

struct NelderMeadOptions {
  std::size_t max_evaluations = 200000;
  double f_tolerance = 1e-12;  // spread of simplex values
  double x_tolerance = 0.0;    // max vertex distance from best; 0 disables
  double initial_step = 0.1;   // used where `steps` is empty
  std::vector<double> steps;   // per-coordinate initial step
  int restarts = 3;            // fresh simplices around the best point after convergence
};

struct NelderMeadResult {
  std::vector<double> point;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  double simplex_size = 0.0;
  bool converged = false;
};

/// Derivative-free downhill simplex minimizer with standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
///
/// The best value never increases, so the result is never worse than `start`.
/// After each convergence the simplex is rebuilt around the best vertex; the
/// run ends when a rebuilt simplex no longer improves by more than
/// `f_tolerance` or the evaluation budget is spent.
class NelderMead {
 public:
  using Objective = std::function<double(std::span<const double>)>;

  explicit NelderMead(NelderMeadOptions opts = {}) : opts_(std::move(opts)) {}

  NelderMeadResult minimize(const Objective& f, std::vector<double> start) const {
    const std::size_t n = start.size();
    NelderMeadResult res;
    res.point = start;
    res.value = evaluate(f, start, res.evaluations);
    if (n == 0) {
      res.converged = true;
      return res;
    }
    for (int round = 0; round <= opts_.restarts; ++round) {
      const double before = res.value;
      const bool ok = run(f, res);
      if (!ok) return res;
      if (round > 0 && before - res.value <= opts_.f_tolerance) break;
    }
    res.converged = true;
    return res;
  }

 private:
  static double evaluate(const Objective& f, std::span<const double> x, std::size_t& count) {
    ++count;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  }

  double step(std::size_t i, const std::vector<double>& x) const {
    double s = i < opts_.steps.size() ? opts_.steps[i] : opts_.initial_step;
    if (s == 0.0) s = x[i] != 0.0 ? 0.05 * std::abs(x[i]) : 0.00025;
    return s;
  }

  // One simplex descent from res.point. Returns false if the budget ran out.
  bool run(const Objective& f, NelderMeadResult& res) const {
    const std::size_t n = res.point.size();
    std::vector<std::vector<double>> x(n + 1, res.point);
    std::vector<double> fx(n + 1, res.value);
    for (std::size_t i = 0; i < n; ++i) {
      x[i + 1][i] += step(i, res.point);
      fx[i + 1] = evaluate(f, x[i + 1], res.evaluations);
    }
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    auto trial = [&](std::vector<double>& out, double t, std::size_t worst) {
      for (std::size_t i = 0; i < n; ++i) out[i] = centroid[i] + t * (x[worst][i] - centroid[i]);
      return evaluate(f, out, res.evaluations);
    };

    bool ok = false;
    while (res.evaluations < opts_.max_evaluations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
      const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

      double size = 0.0;
      for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(x[j][i] - x[best][i]));
      res.simplex_size = size;
      if (fx[worst] - fx[best] <= opts_.f_tolerance &&
          (opts_.x_tolerance <= 0.0 || size <= opts_.x_tolerance)) {
        ok = true;
        break;
      }
      if (size == 0.0) {  // collapsed: nothing left to explore
        ok = true;
        break;
      }

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t j = 0; j <= n; ++j) {
        if (j == worst) continue;
        for (std::size_t i = 0; i < n; ++i) centroid[i] += x[j][i] / static_cast<double>(n);
      }

      const double fr = trial(xr, -1.0, worst);
      if (fr < fx[best]) {
        const double fe = trial(xe, -2.0, worst);
        if (fe < fr) {
          x[worst] = xe;
          fx[worst] = fe;
        } else {
          x[worst] = xr;
          fx[worst] = fr;
        }
      } else if (fr < fx[second]) {
        x[worst] = xr;
        fx[worst] = fr;
      } else {
        const bool outside = fr < fx[worst];
        const double fc = trial(xc, outside ? -0.5 : 0.5, worst);
        if (fc < (outside ? fr : fx[worst])) {
          x[worst] = xc;
          fx[worst] = fc;
        } else {
          for (std::size_t j = 0; j <= n; ++j) {
            if (j == best) continue;
            for (std::size_t i = 0; i < n; ++i) x[j][i] = x[best][i] + 0.5 * (x[j][i] - x[best][i]);
            fx[j] = evaluate(f, x[j], res.evaluations);
          }
        }
      }
    }
    const auto it = std::min_element(fx.begin(), fx.end());
    if (*it <= res.value) {
      res.value = *it;
      res.point = x[static_cast<std::size_t>(it - fx.begin())];
    }
    return ok;
  }

  NelderMeadOptions opts_;
};

}  // namespace pairtomo
