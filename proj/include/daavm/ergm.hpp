#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"

namespace daavm {

// Undirected binary network with node covariates. Adjacency kept as bit rows
// for fast shared-partner counting.
struct Network {
  int n = 0;
  std::vector<std::uint64_t> rows;  // n * words bits, row-major
  std::vector<int> degree;
  std::vector<int> grade;  // in {7..12}
  std::vector<int> sex;    // carried for data fidelity, unused by the statistics
  int words = 0;

  Network() = default;
  explicit Network(int n_) : n(n_), degree(n_, 0), grade(n_, 7), sex(n_, 0) {
    words = (n + 63) / 64;
    rows.assign(static_cast<size_t>(n) * words, 0);
  }

  bool edge(int i, int j) const {
    return (rows[static_cast<size_t>(i) * words + j / 64] >> (j % 64)) & 1u;
  }

  void set_edge(int i, int j, bool v) {
    if (i == j) throw std::invalid_argument("Network: no self loops");
    auto flip = [&](int a, int b, bool on) {
      std::uint64_t& w = rows[static_cast<size_t>(a) * words + b / 64];
      const std::uint64_t bit = 1ULL << (b % 64);
      if (on)
        w |= bit;
      else
        w &= ~bit;
    };
    const bool cur = edge(i, j);
    if (cur == v) return;
    flip(i, j, v);
    flip(j, i, v);
    degree[i] += v ? 1 : -1;
    degree[j] += v ? 1 : -1;
  }

  int shared_partners(int i, int j) const {
    const std::uint64_t* ri = &rows[static_cast<size_t>(i) * words];
    const std::uint64_t* rj = &rows[static_cast<size_t>(j) * words];
    int c = 0;
    for (int w = 0; w < words; ++w) c += std::popcount(ri[w] & rj[w]);
    return c;
  }

  int n_edges() const {
    int s = 0;
    for (int d : degree) s += d;
    return s / 2;
  }

  void validate() const {
    for (int i = 0; i < n; ++i) {
      if (edge(i, i)) throw std::invalid_argument("Network: nonzero diagonal");
      if (grade[i] < 7 || grade[i] > 12) throw std::invalid_argument("Network: grade out of range");
      for (int j = i + 1; j < n; ++j)
        if (edge(i, j) != edge(j, i)) throw std::invalid_argument("Network: asymmetric adjacency");
    }
  }
};

inline constexpr double kGwDecay = 0.25;  // fixed decay of the GW terms

namespace detail {

// e^{0.25} * (1 - (1 - e^{-0.25})^k), the GW weight of count k; f(0) = 0.
inline double gw_weight(int k) {
  if (k <= 0) return 0.0;
  return std::exp(kGwDecay) * (1.0 - std::pow(1.0 - std::exp(-kGwDecay), k));
}

}  // namespace detail

// The 9-statistic vector: degree sum, grade homophily (g = 7..12),
// geometrically weighted degree, geometrically weighted edgewise shared
// partners.
inline Vec ergm_stats(const Network& x) {
  Vec s = Vec::Zero(9);
  for (int i = 0; i < x.n; ++i) {
    s[0] += x.degree[i];
    s[7] += detail::gw_weight(x.degree[i]);
  }
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j) {
      if (!x.edge(i, j)) continue;
      if (x.grade[i] == x.grade[j]) s[x.grade[i] - 6] += 1.0;
      s[8] += detail::gw_weight(x.shared_partners(i, j));
    }
  return s;
}

// Change statistics for adding edge (i,j) to a graph that currently lacks it.
inline Vec ergm_change_stats(const Network& x, int i, int j) {
  Vec d = Vec::Zero(9);
  d[0] = 2.0;
  if (x.grade[i] == x.grade[j]) d[x.grade[i] - 6] = 1.0;
  d[7] = detail::gw_weight(x.degree[i] + 1) - detail::gw_weight(x.degree[i]) +
         detail::gw_weight(x.degree[j] + 1) - detail::gw_weight(x.degree[j]);
  // new edge's own shared partners, plus the bump to each edge reaching a
  // common neighbor
  const int cn = x.shared_partners(i, j);
  double d9 = detail::gw_weight(cn);
  const std::uint64_t* ri = &x.rows[static_cast<size_t>(i) * x.words];
  const std::uint64_t* rj = &x.rows[static_cast<size_t>(j) * x.words];
  for (int w = 0; w < x.words; ++w) {
    std::uint64_t both = ri[w] & rj[w];
    while (both) {
      const int k = w * 64 + std::countr_zero(both);
      both &= both - 1;
      const int sik = x.shared_partners(i, k);
      const int sjk = x.shared_partners(j, k);
      d9 += detail::gw_weight(sik + 1) - detail::gw_weight(sik);
      d9 += detail::gw_weight(sjk + 1) - detail::gw_weight(sjk);
    }
  }
  d[8] = d9;
  return d;
}

// Sweeps all dyads i<j in row-major order; each dyad is set to 1 with
// probability logistic(theta . change stats).
inline void ergm_gibbs_cycle(Network& x, const Vec& theta, Rng& rng) {
  if (theta.size() != 9) throw std::invalid_argument("ergm_gibbs_cycle: theta must be 9-dimensional");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j) {
      if (x.edge(i, j)) x.set_edge(i, j, false);
      const double eta = theta.dot(ergm_change_stats(x, i, j));
      const double p = 1.0 / (1.0 + std::exp(-eta));
      if (unif(rng) < p) x.set_edge(i, j, true);
    }
}

inline double ergm_log_pl(const Network& x0, const Vec& theta) {
  Network x = x0;
  double s = 0.0;
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j) {
      const bool present = x.edge(i, j);
      if (present) x.set_edge(i, j, false);
      const double eta = theta.dot(ergm_change_stats(x, i, j));
      const double log1pe = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
      s += (present ? eta : 0.0) - log1pe;
      if (present) x.set_edge(i, j, true);
    }
  return s;
}

struct ErgmFit {
  Vec theta_hat;
  Mat fisher;  // 9x9 observed information
  bool ok = true;
};

struct SeparationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Logistic-regression MPLE via Newton on the dyad-level conditional
// likelihood; fisher is the negative Hessian at the optimum.
inline ErgmFit ergm_mple(const Network& x0, int max_iter = 100) {
  Network x = x0;
  std::vector<Vec> rows;
  std::vector<double> ys;
  rows.reserve(static_cast<size_t>(x.n) * (x.n - 1) / 2);
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j) {
      const bool present = x.edge(i, j);
      if (present) x.set_edge(i, j, false);
      rows.push_back(ergm_change_stats(x, i, j));
      ys.push_back(present ? 1.0 : 0.0);
      if (present) x.set_edge(i, j, true);
    }
  double y_sum = 0.0;
  for (double y : ys) y_sum += y;
  if (y_sum == 0.0 || y_sum == static_cast<double>(ys.size()))
    throw SeparationError("ergm_mple: all dyads identical (non-finite MPLE)");
  Vec theta = Vec::Zero(9);
  for (int it = 0; it < max_iter; ++it) {
    Vec grad = Vec::Zero(9);
    Mat hess = Mat::Zero(9, 9);
    for (size_t k = 0; k < rows.size(); ++k) {
      const double eta = theta.dot(rows[k]);
      const double p = 1.0 / (1.0 + std::exp(-eta));
      grad += (ys[k] - p) * rows[k];
      hess += p * (1.0 - p) * rows[k] * rows[k].transpose();
    }
    const Eigen::LDLT<Mat> ldlt(hess + 1e-10 * Mat::Identity(9, 9));
    const Vec step = ldlt.solve(grad);
    theta += step;
    if (theta.cwiseAbs().maxCoeff() > 50.0)
      throw SeparationError("ergm_mple: separation (non-finite MPLE)");
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  ErgmFit fit;
  fit.theta_hat = theta;
  fit.fisher = Mat::Zero(9, 9);
  for (size_t k = 0; k < rows.size(); ++k) {
    const double eta = theta.dot(rows[k]);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    fit.fisher += p * (1.0 - p) * rows[k] * rows[k].transpose();
  }
  return fit;
}

struct McmleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Monte Carlo MLE: maximizes theta . s(x) - log Zhat_IS(theta) with the
// gradient s(x) - sum_l w_l(theta) s(x_l), self-normalized weights
// w_l proportional to exp((theta - theta0) . s(x_l)). Newton with the
// weighted-covariance Hessian and a trust-region capped step.
inline ErgmFit ergm_mcmle(const Network& x, const Vec& theta0, int n_samples, int cycles, Rng& rng,
                          double ess_frac_min = 0.05, int max_iter = 50) {
  check_finite(theta0, "ergm_mcmle");
  const Vec sx = ergm_stats(x);
  Mat samples(n_samples, 9);
  Network y(x.n);
  y.grade = x.grade;
  y.sex = x.sex;
  for (int l = 0; l < n_samples; ++l) {
    for (int c = 0; c < cycles; ++c) ergm_gibbs_cycle(y, theta0, rng);
    samples.row(l) = ergm_stats(y).transpose();
  }
  Vec theta = theta0;
  Vec w(n_samples);
  Mat fisher = Mat::Identity(9, 9);
  for (int it = 0; it < max_iter; ++it) {
    Vec lw = samples * (theta - theta0);
    const double mx = lw.maxCoeff();
    w = (lw.array() - mx).exp();
    w /= w.sum();
    const double ess = 1.0 / w.squaredNorm();
    if (ess < ess_frac_min * n_samples)
      throw McmleError("ergm_mcmle: importance weights degenerate; move theta0 closer");
    const Vec mean = samples.transpose() * w;
    Mat cov = Mat::Zero(9, 9);
    for (int l = 0; l < n_samples; ++l) {
      const Vec d = samples.row(l).transpose() - mean;
      cov += w[l] * d * d.transpose();
    }
    fisher = cov;
    const Vec grad = sx - mean;
    Vec step = Eigen::LDLT<Mat>(cov + 1e-8 * Mat::Identity(9, 9)).solve(grad);
    const double cap = 1.0;  // trust region in parameter space
    const double norm = step.norm();
    if (norm > cap) step *= cap / norm;
    theta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-8) break;
  }
  ErgmFit fit;
  fit.theta_hat = theta;
  fit.fisher = fisher;
  return fit;
}

struct ErgmModel {
  using State = Network;
  static constexpr bool has_stats = true;

  int n = 203;
  std::vector<int> grade;
  std::vector<int> sex;

  static ErgmModel from_network(const Network& x) {
    ErgmModel m;
    m.n = x.n;
    m.grade = x.grade;
    m.sex = x.sex;
    return m;
  }

  int dim() const { return 9; }

  double log_unnorm(const State& x, const Vec& theta) const {
    if (theta.size() != 9) throw std::invalid_argument("ergm log_unnorm: dimension mismatch");
    return theta.dot(ergm_stats(x));
  }

  Vec suff_stats(const State& x) const { return ergm_stats(x); }

  // Canonical start: empty graph.
  State simulate_aux(const Vec& theta, int cycles, Rng& rng) const {
    if (cycles < 1) throw std::invalid_argument("simulate_aux: cycles must be >= 1");
    State y(n);
    y.grade = grade;
    y.sex = sex;
    for (int c = 0; c < cycles; ++c) ergm_gibbs_cycle(y, theta, rng);
    return y;
  }
};

}  // namespace daavm
