#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"

namespace daavm {

struct Window {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct PointPattern {
  std::vector<double> xs, ys;
  Window win;

  size_t size() const { return xs.size(); }
  void add(double x, double y) {
    xs.push_back(x);
    ys.push_back(y);
  }
  void validate() const {
    if (xs.size() != ys.size()) throw std::invalid_argument("PointPattern: coordinate size mismatch");
    for (size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
        throw std::invalid_argument("PointPattern: non-finite coordinate");
      if (!win.contains(xs[i], ys[i]))
        throw std::invalid_argument("PointPattern: point outside window");
    }
  }
};

struct InteractionParams {
  double lambda = 1.0;
  double t1 = 1.5;   // peak height of the interaction function
  double t2 = 10.0;  // distance at which the peak is attained
  double t3 = 0.2;   // tail decay rate
  double R = 2.0;    // hard-core radius (model constant)
  double d1 = 0.0, d2 = 0.0;  // derived breakpoints
  double cap = 1.2;
  bool unit_phi = false;  // test hook: interaction forced to 1 everywhere
};

struct ParamInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solves for (d1, d2) so that the middle and tail pieces of the interaction
// function agree in value and first derivative at d1. Eliminating d2 via the
// derivative equation leaves a monotone 1-d equation in u = d1 - t2, solved by
// safeguarded Newton.
inline void solve_breakpoints(InteractionParams& p) {
  if (!(p.t1 > 1.0 && p.t2 > p.R && p.t3 > 0.0))
    throw ParamInfeasible("solve_breakpoints: need t1 > 1, t2 > R, t3 > 0");
  const double a2 = p.t1 / ((p.t2 - p.R) * (p.t2 - p.R));  // (sqrt(t1)/(t2-R))^2
  const double c = std::pow(p.t3, -2.0 / 3.0);
  auto g = [&](double u) { return (p.t1 - 1.0) - a2 * u * u - c * std::pow(a2 * u, 2.0 / 3.0); };
  double u_lo = 0.0, u_hi = std::sqrt((p.t1 - 1.0) / a2);
  double u = 0.5 * u_hi;
  for (int it = 0; it < 200; ++it) {
    const double gu = g(u);
    if (std::abs(gu) < 1e-14 * std::max(1.0, p.t1)) break;
    if (gu > 0)
      u_lo = u;
    else
      u_hi = u;
    const double dg = -2.0 * a2 * u - (2.0 / 3.0) * c * std::pow(a2, 2.0 / 3.0) * std::pow(u, -1.0 / 3.0);
    const double step = u - gu / dg;
    u = (step > u_lo && step < u_hi) ? step : 0.5 * (u_lo + u_hi);
  }
  if (!(u > 0.0)) throw ParamInfeasible("solve_breakpoints: no solution with d1 > t2");
  const double v = std::pow(p.t3 * p.t3 * a2 * u, -1.0 / 3.0);  // d1 - d2
  p.d1 = p.t2 + u;
  p.d2 = p.d1 - v;
}

inline InteractionParams make_params(const Vec& theta, double R, double cap = 1.2,
                                     bool unit_phi = false) {
  if (theta.size() != 4) throw std::invalid_argument("point process: theta must be 4-dimensional");
  InteractionParams p;
  p.lambda = theta[0];
  p.t1 = theta[1];
  p.t2 = theta[2];
  p.t3 = theta[3];
  p.R = R;
  p.cap = cap;
  p.unit_phi = unit_phi;
  if (!unit_phi) solve_breakpoints(p);
  return p;
}

inline double phi(double d, const InteractionParams& p) {
  if (p.unit_phi) return 1.0;
  if (d < 0) throw std::invalid_argument("phi: negative distance");
  if (d <= p.R) return 0.0;
  if (d <= p.d1) {
    const double a = std::sqrt(p.t1) / (p.t2 - p.R);
    const double t = a * (d - p.t2);
    return p.t1 - t * t;
  }
  const double t = p.t3 * (d - p.d2);
  return 1.0 + 1.0 / (t * t);
}

namespace detail {

// Per-point inner sums S_i = sum_{j != i} log phi(d_ij); -inf marks a
// hard-core violation.
inline std::vector<double> pp_inner_sums(const PointPattern& x, const InteractionParams& p) {
  const size_t n = x.size();
  std::vector<double> s(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double dx = x.xs[i] - x.xs[j], dy = x.ys[i] - x.ys[j];
      const double d = std::sqrt(dx * dx + dy * dy);
      const double f = phi(d, p);
      const double lf = (f > 0.0) ? std::log(f) : kNegInf;
      s[i] += lf;
      s[j] += lf;
    }
  return s;
}

}  // namespace detail

// n log(lambda) + sum_i min{ sum_{j != i} log phi(d_ij), cap }; -inf when any
// pair sits inside the hard core.
inline double log_unnorm_pp(const PointPattern& x, const InteractionParams& p,
                            bool count_pairs_once = false) {
  const size_t n = x.size();
  double total = n * std::log(p.lambda);
  if (count_pairs_once) {
    // halved alternative: each unordered pair enters one per-point sum
    std::vector<double> s(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) {
        const double dx = x.xs[i] - x.xs[j], dy = x.ys[i] - x.ys[j];
        const double f = phi(std::sqrt(dx * dx + dy * dy), p);
        if (f <= 0.0) return kNegInf;
        s[i] += std::log(f);
      }
    for (double v : s) total += std::min(v, p.cap);
    return total;
  }
  const std::vector<double> s = detail::pp_inner_sums(x, p);
  for (double v : s) {
    if (v == kNegInf) return kNegInf;
    total += std::min(v, p.cap);
  }
  return total;
}

// Performs n_props birth/death proposals targeting the density of
// log_unnorm_pp relative to the unit-rate Poisson process on the window.
inline void bdmcmc_proposals(PointPattern& x, const InteractionParams& p, int n_props, Rng& rng) {
  const double area = x.win.area();
  std::vector<double> s = detail::pp_inner_sums(x, p);
  const double cap = p.cap;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> contrib;
  for (int it = 0; it < n_props; ++it) {
    const size_t n = x.size();
    if (unif(rng) < 0.5) {
      // birth: new point uniform in W
      const double px = x.win.x0 + unif(rng) * x.win.width();
      const double py = x.win.y0 + unif(rng) * x.win.height();
      contrib.assign(n, 0.0);
      double s_new = 0.0;
      bool hard = false;
      for (size_t i = 0; i < n; ++i) {
        const double dx = px - x.xs[i], dy = py - x.ys[i];
        const double f = phi(std::sqrt(dx * dx + dy * dy), p);
        if (f <= 0.0) {
          hard = true;
          break;
        }
        contrib[i] = std::log(f);
        s_new += contrib[i];
      }
      if (hard) continue;
      double dlogh = std::log(p.lambda) + std::min(s_new, cap);
      for (size_t i = 0; i < n; ++i)
        dlogh += std::min(s[i] + contrib[i], cap) - std::min(s[i], cap);
      if (std::log(unif(rng)) < dlogh + std::log(area / (n + 1))) {
        for (size_t i = 0; i < n; ++i) s[i] += contrib[i];
        s.push_back(s_new);
        x.add(px, py);
      }
    } else {
      // death: uniform victim
      if (n == 0) continue;
      const size_t k = std::uniform_int_distribution<size_t>(0, n - 1)(rng);
      contrib.assign(n, 0.0);
      double dlogh = -std::log(p.lambda) - std::min(s[k], cap);
      for (size_t i = 0; i < n; ++i) {
        if (i == k) continue;
        const double dx = x.xs[k] - x.xs[i], dy = x.ys[k] - x.ys[i];
        const double f = phi(std::sqrt(dx * dx + dy * dy), p);
        contrib[i] = std::log(f);
        dlogh += std::min(s[i] - contrib[i], cap) - std::min(s[i], cap);
      }
      if (std::log(unif(rng)) < dlogh + std::log(n / area)) {
        for (size_t i = 0; i < n; ++i)
          if (i != k) s[i] -= contrib[i];
        x.xs[k] = x.xs.back();
        x.ys[k] = x.ys.back();
        s[k] = s.back();
        x.xs.pop_back();
        x.ys.pop_back();
        s.pop_back();
      }
    }
  }
}

// One cycle = (current point count) proposals, at least one.
inline void bdmcmc_cycle(PointPattern& x, const InteractionParams& p, Rng& rng) {
  bdmcmc_proposals(x, p, std::max<int>(static_cast<int>(x.size()), 1), rng);
}

// Partitions W into K congruent rectangles (factor pair closest to the window
// aspect ratio), picks one uniformly, and returns the points inside it.
inline PointPattern subsample_window(const PointPattern& x, int K, Rng& rng) {
  if (K < 1) throw std::invalid_argument("subsample_window: K must be >= 1");
  if (K == 1) return x;
  int best_k1 = 1, best_k2 = K;
  double best = 1e300;
  for (int k1 = 1; k1 <= K; ++k1) {
    if (K % k1 != 0) continue;
    const int k2 = K / k1;
    const double aspect = (x.win.width() / k1) / (x.win.height() / k2);
    const double score = std::abs(std::log(aspect));
    if (score < best) {
      best = score;
      best_k1 = k1;
      best_k2 = k2;
    }
  }
  const int cell = std::uniform_int_distribution<int>(0, K - 1)(rng);
  const int ci = cell % best_k1, cj = cell / best_k1;
  const double w = x.win.width() / best_k1, h = x.win.height() / best_k2;
  Window sub{x.win.x0 + ci * w, x.win.y0 + cj * h, x.win.x0 + (ci + 1) * w, x.win.y0 + (cj + 1) * h};
  PointPattern out;
  out.win = sub;
  for (size_t i = 0; i < x.size(); ++i)
    if (sub.contains(x.xs[i], x.ys[i])) out.add(x.xs[i], x.ys[i]);
  return out;
}

// Model object consumed by the samplers; theta = (lambda, t1, t2, t3).
struct PointProcessModel {
  using State = PointPattern;
  static constexpr bool has_stats = false;

  Window win;
  double R = 2.0;
  double cap = 1.2;
  bool unit_phi = false;
  bool count_pairs_once = false;
  int n_ref = 100;  // observed point count; sets the inner-sampler cycle length

  int dim() const { return 4; }

  double log_unnorm(const State& x, const Vec& theta) const {
    try {
      const InteractionParams p = make_params(theta, R, cap, unit_phi);
      return log_unnorm_pp(x, p, count_pairs_once);
    } catch (const ParamInfeasible&) {
      return kNegInf;  // outside the model's feasible set
    }
  }

  // Canonical start: empty pattern; one cycle = n_ref proposals.
  State simulate_aux(const Vec& theta, int cycles, Rng& rng) const {
    if (cycles < 1) throw std::invalid_argument("simulate_aux: cycles must be >= 1");
    const InteractionParams p = make_params(theta, R, cap, unit_phi);
    State y;
    y.win = win;
    for (int c = 0; c < cycles; ++c) bdmcmc_proposals(y, p, std::max(n_ref, 1), rng);
    return y;
  }

  struct Sub;
  Sub subproblem(const State& x, int K, Rng& rng) const;
};

struct PointProcessModel::Sub {
  PointProcessModel model;
  State data;
};

inline PointProcessModel::Sub PointProcessModel::subproblem(const State& x, int K,
                                                            Rng& rng) const {
  State sub = subsample_window(x, K, rng);
  PointProcessModel m = *this;
  m.win = sub.win;
  m.n_ref = std::max<int>(static_cast<int>(sub.size()), n_ref / std::max(K, 1));
  return {m, std::move(sub)};
}

}  // namespace daavm
