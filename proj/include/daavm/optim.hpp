#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "daavm/param.hpp"

namespace daavm {

struct NelderMeadResult {
  Vec x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free minimization (standard reflect/expand/contract/shrink).
inline NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                                    double init_step = 0.5, int max_evals = 2000,
                                    double ftol = 1e-9) {
  const int n = static_cast<int>(x0.size());
  std::vector<Vec> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  int evals = 0;
  auto eval = [&](const Vec& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : 1e300;
  };
  for (int i = 1; i <= n; ++i) xs[i][i - 1] += init_step;
  for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

  NelderMeadResult out;
  while (evals < max_evals) {
    std::vector<int> ord(n + 1);
    for (int i = 0; i <= n; ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    {
      std::vector<Vec> xs2(n + 1);
      std::vector<double> fs2(n + 1);
      for (int i = 0; i <= n; ++i) {
        xs2[i] = xs[ord[i]];
        fs2[i] = fs[ord[i]];
      }
      xs = std::move(xs2);
      fs = std::move(fs2);
    }
    if (std::abs(fs[n] - fs[0]) < ftol * (std::abs(fs[0]) + ftol)) {
      out.converged = true;
      break;
    }
    Vec centroid = Vec::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[i];
    centroid /= n;

    const Vec xr = centroid + (centroid - xs[n]);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const Vec xe = centroid + 2.0 * (centroid - xs[n]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const Vec xc = centroid + 0.5 * ((fr < fs[n] ? xr : xs[n]) - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fs[i] < fs[best]) best = i;
  out.x = xs[best];
  out.f = fs[best];
  out.evals = evals;
  return out;
}

// Projects a symmetric matrix to the nearest (in eigenvalue flooring sense)
// positive definite matrix.
inline Mat nearest_spd(const Mat& a, double floor_ratio = 1e-8) {
  Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  Vec ev = es.eigenvalues();
  const double max_ev = std::max(ev.maxCoeff(), 1e-300);
  const double floor = max_ev * floor_ratio;
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace daavm
