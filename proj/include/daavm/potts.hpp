#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/rng.hpp"

namespace daavm {

// q-state lattice with entries in {1..q}. Square in the shipped experiments;
// rectangular strips appear as subsampled first-stage data.
struct PottsLattice {
  int rows = 0;
  int cols = 0;
  int q = 2;
  std::vector<int> cells;  // row-major
  bool toroidal = false;

  PottsLattice() = default;
  PottsLattice(int m, int q_, bool toroidal_ = false) : PottsLattice(m, m, q_, toroidal_) {}
  PottsLattice(int rows_, int cols_, int q_, bool toroidal_)
      : rows(rows_), cols(cols_), q(q_),
        cells(static_cast<size_t>(rows_) * cols_, 1), toroidal(toroidal_) {
    if (rows < 2 || cols < 1 || q < 2)
      throw std::invalid_argument("PottsLattice: need rows >= 2, cols >= 1, q >= 2");
  }

  int m() const { return rows; }  // side length, square case

  int& at(int r, int c) { return cells[static_cast<size_t>(r) * cols + c]; }
  int at(int r, int c) const { return cells[static_cast<size_t>(r) * cols + c]; }

  void validate() const {
    if (rows < 2 || cols < 1 || cells.size() != static_cast<size_t>(rows) * cols)
      throw std::invalid_argument("PottsLattice: bad shape");
    for (int v : cells)
      if (v < 1 || v > q) throw std::invalid_argument("PottsLattice: cell out of {1..q}");
  }
};

// S(x) = number of unordered neighbor pairs in the same state.
inline int potts_stat(const PottsLattice& x) {
  int s = 0;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      const int v = x.at(r, c);
      if (c + 1 < x.cols) s += (v == x.at(r, c + 1));
      if (r + 1 < x.rows) s += (v == x.at(r + 1, c));
      if (x.toroidal && c + 1 == x.cols && x.cols > 2) s += (v == x.at(r, 0));
      if (x.toroidal && r + 1 == x.rows && x.rows > 2) s += (v == x.at(0, c));
    }
  return s;
}

namespace detail {

inline void potts_neighbor_counts(const PottsLattice& x, int r, int c, std::array<int, 8>& cnt) {
  cnt.fill(0);
  auto add = [&](int rr, int cc) { ++cnt[x.at(rr, cc) - 1]; };
  if (x.toroidal) {
    add((r + 1) % x.rows, c);
    add((r + x.rows - 1) % x.rows, c);
    add(r, (c + 1) % x.cols);
    add(r, (c + x.cols - 1) % x.cols);
  } else {
    if (r > 0) add(r - 1, c);
    if (r + 1 < x.rows) add(r + 1, c);
    if (c > 0) add(r, c - 1);
    if (c + 1 < x.cols) add(r, c + 1);
  }
}

}  // namespace detail

// One raster-order Gibbs sweep; each site is resampled from
// p(x_i = k | x_{-i}) proportional to exp(theta * #{neighbors in state k}).
inline void potts_gibbs_cycle(PottsLattice& x, double theta, Rng& rng) {
  if (!std::isfinite(theta)) throw std::invalid_argument("potts_gibbs_cycle: theta must be finite");
  std::array<double, 5> w;  // exp(theta*k), k = 0..4
  for (int k = 0; k <= 4; ++k) w[k] = std::exp(theta * k);
  std::array<int, 8> cnt;
  std::array<double, 8> cum;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      detail::potts_neighbor_counts(x, r, c, cnt);
      double tot = 0.0;
      for (int k = 0; k < x.q; ++k) {
        tot += w[cnt[k]];
        cum[k] = tot;
      }
      const double u = unif(rng) * tot;
      int k = 0;
      while (k + 1 < x.q && u > cum[k]) ++k;
      x.at(r, c) = k + 1;
    }
}

// Sum over sites of log p(x_i | x_{-i}, theta).
inline double potts_log_pl(const PottsLattice& x, double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("potts_log_pl: theta must be finite");
  double s = 0.0;
  std::array<int, 8> cnt;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      detail::potts_neighbor_counts(x, r, c, cnt);
      double denom = 0.0;
      for (int k = 0; k < x.q; ++k) denom += std::exp(theta * cnt[k]);
      s += theta * cnt[x.at(r, c) - 1] - std::log(denom);
    }
  return s;
}

namespace detail {

inline void potts_log_pl_derivs(const PottsLattice& x, double theta, double& d1, double& d2) {
  d1 = 0.0;
  d2 = 0.0;
  std::array<int, 8> cnt;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      potts_neighbor_counts(x, r, c, cnt);
      double z = 0.0, m1 = 0.0, m2 = 0.0;
      for (int k = 0; k < x.q; ++k) {
        const double w = std::exp(theta * cnt[k]);
        z += w;
        m1 += cnt[k] * w;
        m2 += cnt[k] * cnt[k] * w;
      }
      const double mean = m1 / z;
      d1 += cnt[x.at(r, c) - 1] - mean;
      d2 -= m2 / z - mean * mean;
    }
}

}  // namespace detail

struct PottsMple {
  double theta_hat = 0.0;
  double fisher = 0.0;  // -d2 logPL at theta_hat
  bool degenerate = false;
};

// Newton on [lo,hi] with bisection safeguarding; logPL is concave in theta, so
// a monotone gradient on the box means a boundary optimum (flagged degenerate).
inline PottsMple potts_mple(const PottsLattice& x, double lo = 0.0, double hi = 2.0) {
  double d1_lo, d2_lo, d1_hi, d2_hi;
  detail::potts_log_pl_derivs(x, lo, d1_lo, d2_lo);
  detail::potts_log_pl_derivs(x, hi, d1_hi, d2_hi);
  PottsMple out;
  if (d1_lo <= 0.0) {
    out.theta_hat = lo;
    out.fisher = -d2_lo;
    out.degenerate = true;
    return out;
  }
  if (d1_hi >= 0.0) {
    out.theta_hat = hi;
    out.fisher = -d2_hi;
    out.degenerate = true;
    return out;
  }
  double a = lo, b = hi, t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    double d1, d2;
    detail::potts_log_pl_derivs(x, t, d1, d2);
    if (std::abs(d1) < 1e-12) break;
    if (d1 > 0)
      a = t;
    else
      b = t;
    const double step = (d2 < 0) ? t - d1 / d2 : 0.5 * (a + b);
    t = (step > a && step < b) ? step : 0.5 * (a + b);
  }
  double d1, d2;
  detail::potts_log_pl_derivs(x, t, d1, d2);
  out.theta_hat = t;
  out.fisher = -d2;
  return out;
}

// log sum over all q^(m^2) configurations of exp(theta * S(x)).
inline double potts_exact_log_z(int m, int q, double theta, bool toroidal = false) {
  const double n_conf_log2 = (static_cast<double>(m) * m) * std::log2(static_cast<double>(q));
  if (n_conf_log2 > 24.0) throw std::invalid_argument("potts_exact_log_z: instance too large");
  PottsLattice x(m, q, toroidal);
  const int n = m * m;
  double max_term = -1e300;
  std::vector<double> terms;
  bool done = false;
  while (!done) {
    const double t = theta * potts_stat(x);
    terms.push_back(t);
    if (t > max_term) max_term = t;
    done = true;
    for (int i = 0; i < n; ++i) {
      if (x.cells[i] < q) {
        ++x.cells[i];
        done = false;
        break;
      }
      x.cells[i] = 1;
    }
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - max_term);
  return max_term + std::log(s);
}

// Model object consumed by the samplers. rows == cols except for the
// subsampled first-stage strips.
struct PottsModel {
  using State = PottsLattice;
  static constexpr bool has_stats = true;

  int rows = 32;
  int cols = 32;
  int q = 4;
  bool toroidal = false;

  static PottsModel square(int m, int q, bool toroidal = false) { return {m, m, q, toroidal}; }

  int dim() const { return 1; }

  double log_unnorm(const State& x, const Vec& theta) const {
    if (theta.size() != 1) throw std::invalid_argument("potts log_unnorm: dimension mismatch");
    if (x.rows != rows || x.cols != cols || x.q != q)
      throw std::invalid_argument("potts log_unnorm: state does not match model shape");
    return theta[0] * potts_stat(x);
  }

  Vec suff_stats(const State& x) const {
    Vec s(1);
    s[0] = potts_stat(x);
    return s;
  }

  // Canonical start: all sites in state 1.
  State simulate_aux(const Vec& theta, int cycles, Rng& rng) const {
    if (cycles < 1) throw std::invalid_argument("simulate_aux: cycles must be >= 1");
    State y(rows, cols, q, toroidal);
    for (int i = 0; i < cycles; ++i) potts_gibbs_cycle(y, theta[0], rng);
    return y;
  }

  struct Sub;
  Sub subproblem(const State& x, int K, Rng& rng) const;
};

struct PottsModel::Sub {
  PottsModel model;
  State data;
};

// Splits the lattice into K vertical strips (widths differing by at most one
// column) and picks one uniformly. Strips get a free boundary.
inline PottsModel::Sub PottsModel::subproblem(const State& x, int K, Rng& rng) const {
  if (K < 1 || K > x.cols) throw std::invalid_argument("potts subproblem: bad K");
  if (K == 1) return {*this, x};
  const int k = std::uniform_int_distribution<int>(0, K - 1)(rng);
  const int base = x.cols / K, extra = x.cols % K;
  const int w = base + (k < extra ? 1 : 0);
  const int c0 = k * base + std::min(k, extra);
  Sub out{PottsModel{x.rows, w, q, false}, State(x.rows, w, q, false)};
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < w; ++c) out.data.at(r, c) = x.at(r, c0 + c);
  return out;
}

}  // namespace daavm
