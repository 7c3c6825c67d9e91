#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/samplers.hpp"

namespace daavm {

struct EssResult {
  double ess = 0.0;
  bool zero_variance = false;
};

// Effective sample size via the initial positive sequence estimator: sum
// paired autocovariances until a pair goes non-positive. Clamped to 1.5n.
inline EssResult ess(const Vec& chain) {
  const int n = static_cast<int>(chain.size());
  if (n < 2) throw std::invalid_argument("ess: need at least two draws");
  const double mean = chain.mean();
  Vec c = chain.array() - mean;
  const double var = c.squaredNorm() / n;
  if (var <= 0.0 || !std::isfinite(var)) return {0.0, true};

  auto gamma = [&](int k) { return c.head(n - k).dot(c.tail(n - k)) / n; };
  double sum_rho = 0.0;
  for (int k = 1; k + 1 < n; k += 2) {
    const double pair = gamma(k) + gamma(k + 1);
    if (pair <= 0.0) break;
    sum_rho += pair / var;
  }
  const double tau = 1.0 + 2.0 * sum_rho;
  const double out = std::min(n / tau, 1.5 * n);
  return {std::max(out, 1e-12), false};
}

struct HpdInterval {
  double lo = 0.0, hi = 0.0;
};

// Shortest interval containing a fraction `prob` of the draws (sliding
// window over the sorted sample).
inline HpdInterval hpd(const Vec& chain, double prob = 0.95) {
  const int n = static_cast<int>(chain.size());
  if (n < 2) throw std::invalid_argument("hpd: need at least two draws");
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("hpd: prob must be in (0,1)");
  std::vector<double> s(chain.data(), chain.data() + n);
  std::sort(s.begin(), s.end());
  const int k = std::max(2, static_cast<int>(std::ceil(prob * n)));  // points covered
  const int w = std::min(k - 1, n - 1);
  int best = 0;
  for (int i = 1; i + w < n; ++i)
    if (s[i + w] - s[i] < s[best + w] - s[best]) best = i;
  return {s[best], s[best + w]};
}

struct EffResult {
  double eff = 0.0;        // early rejections / all rejections
  long n_rejected = 0;
  long n_early = 0;
  bool undefined = false;  // no rejections at all
};

// Screening efficiency of a two-stage trace: the share of rejections decided
// before any auxiliary simulation.
inline EffResult eff(const Trace& tr, bool include_burnin = false) {
  if (!tr.has_stages)
    throw std::invalid_argument("eff: trace has no screening stage");
  EffResult out;
  const int start = include_burnin ? 0 : tr.burnin;
  for (int t = start; t < tr.n_total(); ++t) {
    const bool pass1 = tr.stage1_pass[t] == 1;
    const bool accepted = pass1 && tr.stage2_accept[t] == 1;
    if (accepted) continue;
    ++out.n_rejected;
    if (!pass1) ++out.n_early;
  }
  if (out.n_rejected == 0) {
    out.undefined = true;
    return out;
  }
  out.eff = static_cast<double>(out.n_early) / out.n_rejected;
  return out;
}

struct Summary {
  Vec mean;
  Vec sd;
  std::vector<HpdInterval> hpd95;
  Vec ess_coord;
  double ess_min = 0.0;
  double ess_per_min = 0.0;  // min-coordinate ESS per wall-clock minute
  double accept_rate = 0.0;
  double stage1_pass_rate = -1.0;  // -1 when the sampler has no stages
  double eff = -1.0;
  long aux_total = 0;
  double wall_ms = 0.0;
  int n_post = 0;
};

inline Summary summarize(const Trace& tr) {
  const Mat d = tr.post();
  const int n = static_cast<int>(d.rows());
  const int p = static_cast<int>(d.cols());
  if (n < 2) throw std::invalid_argument("summarize: need at least two post-burn-in draws");
  Summary s;
  s.n_post = n;
  s.mean = d.colwise().mean().transpose();
  s.sd.resize(p);
  s.ess_coord.resize(p);
  s.hpd95.resize(p);
  for (int j = 0; j < p; ++j) {
    const Vec col = d.col(j);
    s.sd[j] = std::sqrt((col.array() - s.mean[j]).square().sum() / (n - 1));
    s.ess_coord[j] = ess(col).ess;
    s.hpd95[j] = hpd(col, 0.95);
  }
  s.ess_min = s.ess_coord.minCoeff();
  s.wall_ms = tr.total_ms();
  if (s.wall_ms > 0.0) s.ess_per_min = s.ess_min / (s.wall_ms / 60000.0);

  long accepted = 0, pass1 = 0;
  for (int t = tr.burnin; t < tr.n_total(); ++t) {
    if (tr.stage2_accept[t] == 1 && (!tr.has_stages || tr.stage1_pass[t] == 1)) ++accepted;
    if (tr.stage1_pass[t] == 1) ++pass1;
    s.aux_total += tr.aux_sims[t];
  }
  s.accept_rate = static_cast<double>(accepted) / n;
  if (tr.has_stages) {
    s.stage1_pass_rate = static_cast<double>(pass1) / n;
    const EffResult e = eff(tr);
    s.eff = e.undefined ? -1.0 : e.eff;
  }
  return s;
}

// Monte Carlo standard error of the mean using the ESS in place of n.
inline double mcse(const Vec& chain) {
  const int n = static_cast<int>(chain.size());
  const double mean = chain.mean();
  const double var = (chain.array() - mean).square().sum() / (n - 1);
  const EssResult e = ess(chain);
  if (e.zero_variance || e.ess <= 0.0) return 0.0;
  return std::sqrt(var / e.ess);
}

}  // namespace daavm
