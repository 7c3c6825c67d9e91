#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "daavm/diagnostics.hpp"
#include "daavm/potts.hpp"
#include "daavm/rng.hpp"
#include "daavm/samplers.hpp"
#include "daavm/surrogate.hpp"

using namespace daavm;

namespace {

RunConfig base_cfg(double init, double scale, std::uint64_t seed, int iters, int burnin) {
  RunConfig cfg;
  cfg.n_iters = iters;
  cfg.burnin = burnin;
  cfg.init = Vec::Constant(1, init);
  cfg.prop_scale = Vec::Constant(1, scale);
  cfg.seed = seed;
  return cfg;
}

Box box1(double lo, double hi) { return Box{Vec::Constant(1, lo), Vec::Constant(1, hi)}; }

}  // namespace

TEST_CASE("plain MH recovers a Gaussian target") {
  const double mu = 1.5, sd = 0.7;
  auto target = [&](const Vec& t) {
    const double z = (t[0] - mu) / sd;
    return -0.5 * z * z;
  };
  RunConfig cfg = base_cfg(0.0, 1.0, 71, 40000, 2000);
  const Trace tr = mh_run(target, cfg);
  const Mat post = tr.post();
  const double mean = post.col(0).mean();
  const double var = (post.col(0).array() - mean).square().mean();
  const double se = mcse(post.col(0));
  CHECK(std::abs(mean - mu) < 4.0 * se + 0.01);
  CHECK(std::sqrt(var) == doctest::Approx(sd).epsilon(0.05));
  CHECK_FALSE(tr.has_stages);
  CHECK(tr.post().rows() == 40000);
  // wall clock is nondecreasing
  for (size_t i = 1; i < tr.wall_ms.size(); ++i) CHECK(tr.wall_ms[i] >= tr.wall_ms[i - 1]);
}

TEST_CASE("a constant target accepts every in-support proposal") {
  auto target = [](const Vec& t) { return std::abs(t[0]) < 1e6 ? 0.0 : kNegInf; };
  RunConfig cfg = base_cfg(0.0, 0.3, 72, 3000, 0);
  cfg.adapt = false;
  const Trace tr = mh_run(target, cfg);
  for (int t = 0; t < tr.n_total(); ++t) CHECK(tr.stage2_accept[t] == 1);
}

TEST_CASE("burn-in adaptation steers acceptance toward the target rate") {
  auto target = [](const Vec& t) { return -0.5 * t[0] * t[0]; };
  RunConfig cfg = base_cfg(0.0, 40.0, 73, 20000, 8000);  // badly oversized start
  const Trace tr = mh_run(target, cfg);
  double acc = 0;
  for (int t = cfg.burnin; t < tr.n_total(); ++t) acc += tr.stage2_accept[t];
  acc /= cfg.n_iters;
  CHECK(acc == doctest::Approx(0.25).epsilon(0.25));
  CHECK(tr.final_scale[0] < 40.0);
  CHECK(tr.final_scale[0] > 0.5);
}

TEST_CASE("two-stage run with a flat screen reproduces the one-stage chain exactly") {
  const PottsModel model = PottsModel::square(6, 2, false);
  Rng rng = substream(74, "data", 0);
  Vec truth(1);
  truth << 0.7;
  const PottsLattice x = model.simulate_aux(truth, 40, rng);
  const PriorSpec prior = PriorSpec::uniform(box1(0.0, 2.0));

  RunConfig cfg = base_cfg(0.7, 0.25, 75, 1500, 500);
  const Trace a = avm_run(model, x, prior, cfg);
  const Trace b = daavm_run(model, x, prior, Surrogate::flat(), cfg);
  REQUIRE(a.draws.rows() == b.draws.rows());
  for (int t = 0; t < a.n_total(); ++t) {
    CHECK(a.draws(t, 0) == b.draws(t, 0));  // bitwise equal paths
    const int acc_a = a.stage2_accept[t];
    const int acc_b = b.stage2_accept[t] == -1 ? 0 : b.stage2_accept[t];
    CHECK(acc_a == acc_b);
  }
  CHECK(a.final_scale[0] == b.final_scale[0]);
  // a flat screen passes every in-support proposal, so aux effort matches
  CHECK(a.total_aux() == b.total_aux());
  CHECK(b.has_stages);
}

TEST_CASE("two-stage traces obey the stage bookkeeping invariants") {
  const PottsModel model = PottsModel::square(6, 2, false);
  Rng rng = substream(76, "data", 0);
  Vec truth(1);
  truth << 0.8;
  const PottsLattice x = model.simulate_aux(truth, 40, rng);
  const PriorSpec prior = PriorSpec::uniform(box1(0.0, 2.0));
  const PottsMple fit = potts_mple(x);
  const Surrogate surr = freq_surrogate(fit.theta_hat, fit.fisher);

  RunConfig cfg = base_cfg(0.8, 0.3, 77, 2000, 500);
  const Trace tr = daavm_run(model, x, prior, surr, cfg, 12.5);
  int n_pass = 0;
  for (int t = 0; t < tr.n_total(); ++t) {
    REQUIRE(tr.stage1_pass[t] != -1);
    if (tr.stage1_pass[t] == 0) {
      CHECK(tr.stage2_accept[t] == -1);  // stage 2 never reached
      CHECK(tr.aux_sims[t] == 0);        // and no auxiliary simulation paid
    } else {
      ++n_pass;
      CHECK(tr.aux_sims[t] == 1);
      CHECK(tr.stage2_accept[t] != -1);
    }
  }
  CHECK(tr.total_aux() == n_pass);
  CHECK(n_pass < tr.n_total());  // the screen actually rejects sometimes
  CHECK(tr.wall_ms.front() >= 12.5);  // surrogate build time is charged

  const EffResult e = eff(tr);
  CHECK_FALSE(e.undefined);
  CHECK(e.eff > 0.0);
  CHECK(e.eff <= 1.0);
}

TEST_CASE("screened and unscreened chains agree on the posterior") {
  const PottsModel model = PottsModel::square(8, 2, false);
  Rng rng = substream(78, "data", 0);
  Vec truth(1);
  truth << 0.6;
  const PottsLattice x = model.simulate_aux(truth, 40, rng);
  const PriorSpec prior = PriorSpec::uniform(box1(0.0, 2.0));
  const PottsMple fit = potts_mple(x);
  const Surrogate surr = freq_surrogate(fit.theta_hat, fit.fisher);

  RunConfig cfg = base_cfg(0.6, 0.3, 79, 6000, 1000);
  const Trace a = avm_run(model, x, prior, cfg);
  cfg.seed = 80;
  const Trace b = daavm_run(model, x, prior, surr, cfg);
  const double ma = a.post().col(0).mean(), mb = b.post().col(0).mean();
  const double se = std::sqrt(std::pow(mcse(a.post().col(0)), 2) + std::pow(mcse(b.post().col(0)), 2));
  CHECK(std::abs(ma - mb) < 4.0 * se + 1e-3);
}

TEST_CASE("subsampled screening preserves the posterior") {
  const PottsModel model = PottsModel::square(8, 2, false);
  Rng rng = substream(81, "data", 0);
  Vec truth(1);
  truth << 0.6;
  const PottsLattice x = model.simulate_aux(truth, 40, rng);
  const PriorSpec prior = PriorSpec::uniform(box1(0.0, 2.0));

  RunConfig cfg = base_cfg(0.6, 0.3, 82, 6000, 1000);
  cfg.n_sub = 2;
  cfg.sub_aux_cycles = 5;
  const Trace s = daavm_s_run(model, x, prior, cfg);
  cfg.seed = 83;
  const Trace a = avm_run(model, x, prior, cfg);
  const double ms = s.post().col(0).mean(), ma = a.post().col(0).mean();
  const double se = std::sqrt(std::pow(mcse(s.post().col(0)), 2) + std::pow(mcse(a.post().col(0)), 2));
  CHECK(std::abs(ms - ma) < 4.0 * se + 1e-3);

  // every feasible proposal pays at least the subsample simulation
  for (int t = 0; t < s.n_total(); ++t) {
    if (s.stage1_pass[t] == 1) CHECK(s.aux_sims[t] == 2);
    if (s.stage1_pass[t] == 0) CHECK(s.aux_sims[t] <= 1);
  }
}

TEST_CASE("pseudo-marginal chain with no observations samples the prior") {
  ObsSeries obs;
  obs.population = 500;  // zero weeks: likelihood is constant
  PriorSpec prior;
  prior.add_uniform(0.5, 3.0).add_uniform(0.2, 1.0).add_uniform(0.05, 0.6);
  RunConfig cfg;
  cfg.n_iters = 30000;
  cfg.burnin = 2000;
  cfg.init = Vec::Zero(3);
  cfg.init << 1.5, 0.5, 0.3;
  cfg.prop_scale = Vec::Constant(3, 0.4);
  cfg.seed = 84;
  const Trace tr = pmcmc_run(obs, prior, cfg, 50);
  const Mat post = tr.post();
  CHECK(std::abs(post.col(0).mean() - 1.75) < 4.0 * mcse(post.col(0)) + 0.01);
  CHECK(std::abs(post.col(1).mean() - 0.60) < 4.0 * mcse(post.col(1)) + 0.01);
  CHECK(std::abs(post.col(2).mean() - 0.325) < 4.0 * mcse(post.col(2)) + 0.01);
}

TEST_CASE("screened pseudo-marginal chain matches the plain one with a flat screen") {
  Rng rng = substream(85, "sim", 0);
  const ObsSeries obs = sir_simulate({1.8, 0.5, 0.3}, 400, 8, rng);
  PriorSpec prior;
  prior.add_uniform(0.1, 5.0).add_uniform(0.1, 2.0).add_uniform(0.05, 0.9);
  RunConfig cfg;
  cfg.n_iters = 400;
  cfg.burnin = 100;
  cfg.init = Vec::Zero(3);
  cfg.init << 1.8, 0.5, 0.3;
  cfg.prop_scale = Vec::Constant(3, 0.1);
  cfg.seed = 86;
  const Trace a = pmcmc_run(obs, prior, cfg, 60);
  const Trace b = da_pmcmc_run(obs, prior, Surrogate::flat(), cfg, 60);
  for (int t = 0; t < a.n_total(); ++t)
    for (int j = 0; j < 3; ++j) CHECK(a.draws(t, j) == b.draws(t, j));
}

TEST_CASE("configuration validation catches bad inputs") {
  RunConfig cfg = base_cfg(0.5, 0.2, 1, 100, 10);
  CHECK_NOTHROW(cfg.validate(1));
  CHECK_THROWS(cfg.validate(2));
  cfg.prop_scale[0] = 0.0;
  CHECK_THROWS(cfg.validate(1));
  cfg = base_cfg(5.0, 0.2, 1, 100, 0);  // init outside the prior
  const PottsModel model = PottsModel::square(4, 2, false);
  Rng rng = substream(87, "v", 0);
  const PottsLattice x = model.simulate_aux(Vec::Constant(1, 0.5), 10, rng);
  CHECK_THROWS(avm_run(model, x, PriorSpec::uniform(box1(0.0, 2.0)), cfg));
}
