#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"
#include "daavm/sir.hpp"
#include "daavm/surrogate.hpp"

namespace daavm {

struct RunConfig {
  int n_iters = 1000;  // iterations kept after burn-in
  int burnin = 0;
  Vec init;
  Vec prop_scale;  // random-walk sd per coordinate
  std::uint64_t seed = 1;
  int aux_cycles = 10;      // inner-sampler cycles per auxiliary draw
  int sub_aux_cycles = 5;   // inner cycles for the subsample stage
  int n_sub = 2;            // number of data subregions
  bool adapt = true;        // tune prop_scale during burn-in, frozen after
  double adapt_target = 0.25;
  double adapt_rate = 0.66;

  int total() const { return n_iters + burnin; }
  void validate(int p) const {
    if (n_iters < 1 || burnin < 0) throw std::invalid_argument("RunConfig: bad iteration counts");
    if (init.size() != p || prop_scale.size() != p)
      throw std::invalid_argument("RunConfig: init/prop_scale dimension mismatch");
    if ((prop_scale.array() <= 0).any())
      throw std::invalid_argument("RunConfig: prop_scale must be positive");
    if (aux_cycles < 1 || sub_aux_cycles < 1 || n_sub < 1)
      throw std::invalid_argument("RunConfig: cycle/region counts must be positive");
  }
};

struct Trace {
  Mat draws;  // one row per iteration, burn-in included
  std::vector<std::int8_t> stage1_pass;    // -1 where undefined (single-stage sampler)
  std::vector<std::int8_t> stage2_accept;  // -1 where stage 2 was not reached
  std::vector<int> aux_sims;               // full-data auxiliary simulations that iteration
  std::vector<double> wall_ms;             // cumulative, includes any surrogate-build offset
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool has_stages = false;
  int burnin = 0;
  Vec final_scale;

  int n_total() const { return static_cast<int>(draws.rows()); }
  Mat post() const { return draws.bottomRows(n_total() - burnin); }
  double total_ms() const { return wall_ms.empty() ? 0.0 : wall_ms.back(); }
  long total_aux() const {
    long s = 0;
    for (int a : aux_sims) s += a;
    return s;
  }
};

namespace detail {

struct TraceBuilder {
  Trace tr;
  std::chrono::steady_clock::time_point t0;
  double offset_ms = 0.0;
  int row = 0;

  TraceBuilder(int n_total, int p, const RunConfig& cfg, bool stages, double offset = 0.0) {
    tr.draws.resize(n_total, p);
    tr.stage1_pass.assign(n_total, -1);
    tr.stage2_accept.assign(n_total, -1);
    tr.aux_sims.assign(n_total, 0);
    tr.wall_ms.assign(n_total, 0.0);
    tr.seed = cfg.seed;
    tr.has_stages = stages;
    tr.burnin = cfg.burnin;
    offset_ms = offset;
    t0 = std::chrono::steady_clock::now();
  }

  void record(const Vec& theta, int s1, int s2, int aux) {
    tr.draws.row(row) = theta.transpose();
    tr.stage1_pass[row] = static_cast<std::int8_t>(s1);
    tr.stage2_accept[row] = static_cast<std::int8_t>(s2);
    tr.aux_sims[row] = aux;
    tr.wall_ms[row] =
        offset_ms +
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ++row;
  }
};

inline Vec draw_proposal(const Vec& theta, const Vec& scale, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec out(theta.size());
  for (int i = 0; i < theta.size(); ++i) out[i] = theta[i] + scale[i] * nd(rng);
  return out;
}

// Robbins-Monro step on the log proposal scale, burn-in only.
inline void adapt_scale(Vec& scale, const RunConfig& cfg, int t, bool accepted) {
  if (!cfg.adapt || t >= cfg.burnin) return;
  const double g = 1.0 / std::pow(t + 1.0, cfg.adapt_rate);
  const double step = g * ((accepted ? 1.0 : 0.0) - cfg.adapt_target);
  scale = (scale.array() * std::exp(step)).matrix();
}

}  // namespace detail

// Exchange-style sampler: every proposal simulates auxiliary data and the
// normalizing constant cancels in the ratio.
template <class Model>
Trace avm_run(const Model& model, const typename Model::State& x, const PriorSpec& prior,
              const RunConfig& cfg) {
  const int p = model.dim();
  cfg.validate(p);
  Vec theta = cfg.init;
  double lp = prior.log_density(theta);
  double hx = model.log_unnorm(x, theta);
  if (lp == kNegInf || hx == kNegInf)
    throw std::invalid_argument("avm_run: init outside the support");
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), p, cfg, false);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lp_star = prior.log_density(theta_star);
    const double hx_star = lp_star > kNegInf ? model.log_unnorm(x, theta_star) : kNegInf;

    bool accepted = false;
    int aux = 0;
    if (lp_star > kNegInf && hx_star > kNegInf) {
      Rng aux_rng = substream(cfg.seed, "aux", t);
      const auto y = model.simulate_aux(theta_star, cfg.aux_cycles, aux_rng);
      aux = 1;
      const double log_a = (lp_star - lp) + (hx_star - hx) +
                           (model.log_unnorm(y, theta) - model.log_unnorm(y, theta_star));
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < log_a;
    }
    if (accepted) {
      theta = theta_star;
      lp = lp_star;
      hx = hx_star;
    }
    tb.record(theta, -1, accepted ? 1 : 0, aux);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

// Two-stage variant: a cheap surrogate screens proposals first; only
// survivors pay for the auxiliary simulation, and the second stage corrects
// the screening error exactly. With a flat surrogate the decisions coincide
// with avm_run under the same seed.
template <class Model>
Trace daavm_run(const Model& model, const typename Model::State& x, const PriorSpec& prior,
                const Surrogate& surr, const RunConfig& cfg, double surrogate_build_ms = 0.0) {
  const int p = model.dim();
  cfg.validate(p);
  Vec theta = cfg.init;
  double lp = prior.log_density(theta);
  double hx = model.log_unnorm(x, theta);
  double s_cur = surr(theta);
  if (lp == kNegInf || hx == kNegInf || s_cur == kNegInf)
    throw std::invalid_argument("daavm_run: init outside the support");
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), p, cfg, true, surrogate_build_ms);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lp_star = prior.log_density(theta_star);
    const double hx_star = lp_star > kNegInf ? model.log_unnorm(x, theta_star) : kNegInf;

    // Stage-1 uniform is drawn from its own stream even when the outcome is
    // forced, so downstream streams stay aligned across surrogate choices.
    Rng u1_rng = substream(cfg.seed, "u1", t);
    const double u1 = uniform01(u1_rng);

    bool pass1 = false;
    double s_star = kNegInf;
    if (lp_star > kNegInf && hx_star > kNegInf) {
      s_star = surr(theta_star);
      pass1 = std::log(u1) < s_star - s_cur;
    }

    bool accepted = false;
    int aux = 0;
    if (pass1) {
      Rng aux_rng = substream(cfg.seed, "aux", t);
      const auto y = model.simulate_aux(theta_star, cfg.aux_cycles, aux_rng);
      aux = 1;
      const double log_a2 = (lp_star - lp) + (hx_star - hx) +
                            (model.log_unnorm(y, theta) - model.log_unnorm(y, theta_star)) +
                            (s_cur - s_star);
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < log_a2;
    }
    if (accepted) {
      theta = theta_star;
      lp = lp_star;
      hx = hx_star;
      s_cur = s_star;
    }
    tb.record(theta, pass1 ? 1 : 0, pass1 ? (accepted ? 1 : 0) : -1, aux);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

// Subsampling variant: the first stage runs the exchange ratio on a randomly
// chosen data subregion with a short inner run; the second stage corrects
// with the full data. The subsample terms cancel across stages, so the full
// posterior is preserved.
template <class Model>
Trace daavm_s_run(const Model& model, const typename Model::State& x, const PriorSpec& prior,
                  const RunConfig& cfg) {
  const int p = model.dim();
  cfg.validate(p);
  Vec theta = cfg.init;
  double lp = prior.log_density(theta);
  double hx = model.log_unnorm(x, theta);
  if (lp == kNegInf || hx == kNegInf)
    throw std::invalid_argument("daavm_s_run: init outside the support");
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), p, cfg, true);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lp_star = prior.log_density(theta_star);
    const double hx_star = lp_star > kNegInf ? model.log_unnorm(x, theta_star) : kNegInf;

    bool pass1 = false;
    int aux = 0;
    double sub_diff = 0.0;  // h(x_sub|th*) - h(x_sub|th) + h(y_sub|th) - h(y_sub|th*)
    if (lp_star > kNegInf && hx_star > kNegInf) {
      Rng sub_rng = substream(cfg.seed, "sub", t);
      auto sp = model.subproblem(x, cfg.n_sub, sub_rng);
      Rng subaux_rng = substream(cfg.seed, "subaux", t);
      const auto y_sub = sp.model.simulate_aux(theta_star, cfg.sub_aux_cycles, subaux_rng);
      aux = 1;  // the subsample simulation counts too
      sub_diff = (sp.model.log_unnorm(sp.data, theta_star) - sp.model.log_unnorm(sp.data, theta)) +
                 (sp.model.log_unnorm(y_sub, theta) - sp.model.log_unnorm(y_sub, theta_star));
      const double log_a1 = (lp_star - lp) + sub_diff;
      Rng u1_rng = substream(cfg.seed, "u1", t);
      pass1 = std::log(uniform01(u1_rng)) < log_a1;
    }

    bool accepted = false;
    if (pass1) {
      Rng aux_rng = substream(cfg.seed, "aux", t);
      const auto y = model.simulate_aux(theta_star, cfg.aux_cycles, aux_rng);
      ++aux;
      const double log_a2 = (hx_star - hx) +
                            (model.log_unnorm(y, theta) - model.log_unnorm(y, theta_star)) -
                            sub_diff;
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < log_a2;
    }
    if (accepted) {
      theta = theta_star;
      lp = lp_star;
      hx = hx_star;
    }
    tb.record(theta, pass1 ? 1 : 0, pass1 ? (accepted ? 1 : 0) : -1, aux);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

// Plain random-walk MH on an arbitrary log target (used for pilot runs on a
// surrogate, and as the reference for unit checks).
inline Trace mh_run(const std::function<double(const Vec&)>& log_target, const RunConfig& cfg) {
  const int p = static_cast<int>(cfg.init.size());
  cfg.validate(p);
  Vec theta = cfg.init;
  double lt = log_target(theta);
  if (lt == kNegInf) throw std::invalid_argument("mh_run: init outside the support");
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), p, cfg, false);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lt_star = log_target(theta_star);
    bool accepted = false;
    if (lt_star > kNegInf) {
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < lt_star - lt;
    }
    if (accepted) {
      theta = theta_star;
      lt = lt_star;
    }
    tb.record(theta, -1, accepted ? 1 : 0, 0);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

// MH chain targeting the surrogate restricted to the prior support (used for
// density-comparison output against the full two-stage runs).
inline Trace mh_surrogate_run(const Surrogate& surr, const PriorSpec& prior,
                              const RunConfig& cfg) {
  return mh_run(
      [&](const Vec& t) {
        const double lp = prior.log_density(t);
        return lp == kNegInf ? kNegInf : lp + surr(t);
      },
      cfg);
}

// Pseudo-marginal MH for the epidemic model: the particle-filter likelihood
// estimate of the current state is stored and never refreshed.
inline Trace pmcmc_run(const ObsSeries& obs, const PriorSpec& prior, const RunConfig& cfg,
                       int n_particles) {
  cfg.validate(3);
  obs.validate();
  Vec theta = cfg.init;
  double lp = prior.log_density(theta);
  if (lp == kNegInf) throw std::invalid_argument("pmcmc_run: init outside the support");
  Rng init_rng = substream(cfg.seed, "pf-init", 0);
  double ll = bootstrap_pf(SirParams::from_vec(theta), obs, n_particles, init_rng).log_lik;
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), 3, cfg, false);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lp_star = prior.log_density(theta_star);

    bool accepted = false;
    int aux = 0;
    if (lp_star > kNegInf) {
      Rng pf_rng = substream(cfg.seed, "pf", t);
      const double ll_star =
          bootstrap_pf(SirParams::from_vec(theta_star), obs, n_particles, pf_rng).log_lik;
      aux = 1;
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < (lp_star - lp) + (ll_star - ll);
      if (accepted) ll = ll_star;
    }
    if (accepted) {
      theta = theta_star;
      lp = lp_star;
    }
    tb.record(theta, -1, accepted ? 1 : 0, aux);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

// Delayed-acceptance pseudo-marginal sampler: the surrogate screens before
// any particle filter runs; the second stage uses the stored estimate for the
// current state and a fresh one for the proposal.
inline Trace da_pmcmc_run(const ObsSeries& obs, const PriorSpec& prior, const Surrogate& surr,
                          const RunConfig& cfg, int n_particles,
                          double surrogate_build_ms = 0.0) {
  cfg.validate(3);
  obs.validate();
  Vec theta = cfg.init;
  double lp = prior.log_density(theta);
  double s_cur = surr(theta);
  if (lp == kNegInf || s_cur == kNegInf)
    throw std::invalid_argument("da_pmcmc_run: init outside the support");
  Rng init_rng = substream(cfg.seed, "pf-init", 0);
  double ll = bootstrap_pf(SirParams::from_vec(theta), obs, n_particles, init_rng).log_lik;
  Vec scale = cfg.prop_scale;

  detail::TraceBuilder tb(cfg.total(), 3, cfg, true, surrogate_build_ms);
  for (int t = 0; t < cfg.total(); ++t) {
    Rng prop_rng = substream(cfg.seed, "prop", t);
    const Vec theta_star = detail::draw_proposal(theta, scale, prop_rng);
    const double lp_star = prior.log_density(theta_star);

    Rng u1_rng = substream(cfg.seed, "u1", t);
    const double u1 = uniform01(u1_rng);

    bool pass1 = false;
    double s_star = kNegInf;
    if (lp_star > kNegInf) {
      s_star = surr(theta_star);
      pass1 = std::log(u1) < s_star - s_cur;
    }

    bool accepted = false;
    int aux = 0;
    if (pass1) {
      Rng pf_rng = substream(cfg.seed, "pf", t);
      const double ll_star =
          bootstrap_pf(SirParams::from_vec(theta_star), obs, n_particles, pf_rng).log_lik;
      aux = 1;
      const double log_a2 = (lp_star - lp) + (ll_star - ll) + (s_cur - s_star);
      Rng u_rng = substream(cfg.seed, "u2", t);
      accepted = std::log(uniform01(u_rng)) < log_a2;
      if (accepted) ll = ll_star;
    }
    if (accepted) {
      theta = theta_star;
      lp = lp_star;
      s_cur = s_star;
    }
    tb.record(theta, pass1 ? 1 : 0, pass1 ? (accepted ? 1 : 0) : -1, aux);
    detail::adapt_scale(scale, cfg, t, accepted);
  }
  tb.tr.final_scale = scale;
  return tb.tr;
}

}  // namespace daavm
