#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "daavm/optim.hpp"
#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"

namespace daavm {

struct SirParams {
  double beta = 2.0;   // transmission rate
  double gamma = 0.5;  // recovery rate
  double rho = 0.1;    // reporting probability

  void validate() const {
    if (!(beta > 0 && gamma > 0 && rho > 0 && rho < 1))
      throw std::invalid_argument("SirParams: need beta, gamma > 0 and rho in (0,1)");
  }
  static SirParams from_vec(const Vec& t) {
    if (t.size() != 3) throw std::invalid_argument("SirParams: theta must be 3-dimensional");
    return {t[0], t[1], t[2]};
  }
};

struct SirState {
  long long s = 0, i = 0, r = 0;
  long long total() const { return s + i + r; }
};

struct ObsSeries {
  std::vector<long long> cases;  // weekly reported counts, t = 1..T
  long long population = 0;

  int length() const { return static_cast<int>(cases.size()); }
  void validate() const {
    for (long long c : cases)
      if (c < 0 || c > population) throw std::invalid_argument("ObsSeries: cases out of [0, N]");
  }
};

inline SirState sir_initial(long long population) { return {population - 1, 1, 0}; }

// One weekly transition: Poisson increments truncated at the source
// compartment so counts stay feasible.
inline SirState sir_step(SirState st, const SirParams& p, long long population, Rng& rng) {
  const double rate_si = p.beta * static_cast<double>(st.s) * static_cast<double>(st.i) /
                         static_cast<double>(population);
  const double rate_ir = p.gamma * static_cast<double>(st.i);
  long long d_si = 0, d_ir = 0;
  if (rate_si > 0) d_si = std::min<long long>(std::poisson_distribution<long long>(rate_si)(rng), st.s);
  if (rate_ir > 0) d_ir = std::min<long long>(std::poisson_distribution<long long>(rate_ir)(rng), st.i);
  return {st.s - d_si, st.i + d_si - d_ir, st.r + d_ir};
}

inline double binom_log_pmf(long long k, long long n, double p) {
  if (k < 0 || k > n) return kNegInf;
  if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
         k * std::log(p) + (n - k) * std::log1p(-p);
}

struct PfResult {
  double log_lik = 0.0;
  bool degenerate = false;  // all weights vanished at some step
};

// Bootstrap particle filter: propagate, weight by the binomial reporting
// model, multinomial-resample every step. log_lik accumulates the log of the
// per-step mean weight.
inline PfResult bootstrap_pf(const SirParams& params, const ObsSeries& obs, int n_particles,
                             Rng& rng) {
  if (n_particles < 2) throw std::invalid_argument("bootstrap_pf: need at least 2 particles");
  params.validate();
  PfResult out;
  std::vector<SirState> particles(n_particles, sir_initial(obs.population));
  std::vector<double> logw(n_particles), w(n_particles);
  std::vector<SirState> next(n_particles);
  for (int t = 0; t < obs.length(); ++t) {
    double maxlw = kNegInf;
    for (int k = 0; k < n_particles; ++k) {
      particles[k] = sir_step(particles[k], params, obs.population, rng);
      logw[k] = binom_log_pmf(obs.cases[t], particles[k].i, params.rho);
      if (logw[k] > maxlw) maxlw = logw[k];
    }
    if (maxlw == kNegInf) {
      out.log_lik = kNegInf;
      out.degenerate = true;
      return out;
    }
    double sum = 0.0;
    for (int k = 0; k < n_particles; ++k) {
      w[k] = std::exp(logw[k] - maxlw);
      sum += w[k];
    }
    out.log_lik += maxlw + std::log(sum / n_particles);
    std::discrete_distribution<int> resample(w.begin(), w.end());
    for (int k = 0; k < n_particles; ++k) next[k] = particles[resample(rng)];
    particles.swap(next);
  }
  return out;
}

// Simulates a trajectory and reports the weekly binomial counts.
inline ObsSeries sir_simulate(const SirParams& params, long long population, int weeks, Rng& rng) {
  params.validate();
  ObsSeries obs;
  obs.population = population;
  SirState st = sir_initial(population);
  for (int t = 0; t < weeks; ++t) {
    st = sir_step(st, params, population, rng);
    obs.cases.push_back(std::binomial_distribution<long long>(st.i, params.rho)(rng));
  }
  return obs;
}

struct SirFit {
  SirParams theta_hat;
  Mat cov;  // 3x3 on the original (beta, gamma, rho) scale
  bool repaired = false;
};

namespace detail {

inline Vec sir_to_trans(const SirParams& p) {
  Vec t(3);
  t[0] = std::log(p.beta);
  t[1] = std::log(p.gamma);
  t[2] = std::log(p.rho / (1.0 - p.rho));
  return t;
}

inline SirParams sir_from_trans(const Vec& t) {
  return {std::exp(t[0]), std::exp(t[1]), 1.0 / (1.0 + std::exp(-t[2]))};
}

}  // namespace detail

// Derivative-free maximization of the particle-filter log-likelihood over
// (log beta, log gamma, logit rho), with common random numbers so the
// objective is deterministic. The covariance comes from a central
// finite-difference Hessian mapped back by the delta method.
inline SirFit sir_freq_fit(const ObsSeries& obs, int n_particles, std::uint64_t seed,
                           SirParams init = {1.0, 1.0, 0.2}, double fd_step = 0.05) {
  auto neg_ll = [&](const Vec& t) {
    const SirParams p = detail::sir_from_trans(t);
    Rng rng = substream(seed, "sir-freq-crn");
    return -bootstrap_pf(p, obs, n_particles, rng).log_lik;
  };
  const NelderMeadResult nm = nelder_mead(neg_ll, detail::sir_to_trans(init), 0.5, 1500, 1e-8);
  const Vec t_hat = nm.x;

  Mat hess(3, 3);
  const double f0 = neg_ll(t_hat);
  const double h = fd_step;
  for (int a = 0; a < 3; ++a) {
    Vec tp = t_hat, tm = t_hat;
    tp[a] += h;
    tm[a] -= h;
    hess(a, a) = (neg_ll(tp) - 2 * f0 + neg_ll(tm)) / (h * h);
    for (int b = a + 1; b < 3; ++b) {
      Vec tpp = t_hat, tpm = t_hat, tmp = t_hat, tmm = t_hat;
      tpp[a] += h;
      tpp[b] += h;
      tpm[a] += h;
      tpm[b] -= h;
      tmp[a] -= h;
      tmp[b] += h;
      tmm[a] -= h;
      tmm[b] -= h;
      hess(a, b) = hess(b, a) =
          (neg_ll(tpp) - neg_ll(tpm) - neg_ll(tmp) + neg_ll(tmm)) / (4 * h * h);
    }
  }
  SirFit fit;
  fit.theta_hat = detail::sir_from_trans(t_hat);
  Mat hess_spd = hess;
  const Eigen::LLT<Mat> llt(hess);
  if (llt.info() != Eigen::Success) {
    hess_spd = nearest_spd(hess);
    fit.repaired = true;
  }
  const Mat cov_trans = hess_spd.inverse();
  // delta method: d(original)/d(transformed) is diagonal
  Vec jac(3);
  jac[0] = fit.theta_hat.beta;
  jac[1] = fit.theta_hat.gamma;
  jac[2] = fit.theta_hat.rho * (1.0 - fit.theta_hat.rho);
  fit.cov = jac.asDiagonal() * cov_trans * jac.asDiagonal();
  return fit;
}

}  // namespace daavm
