// Command-line front end: simulate synthetic data, build surrogates, run
// samplers, benchmark them, and summarize saved traces.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "daavm/daavm.hpp"

namespace {

using namespace daavm;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config_path, "TOML-style config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "output path (overrides config)");
  cmd->add_option("--threads", c.threads, "worker threads (currently single-threaded)");
  cmd->add_flag("--force", c.force, "overwrite existing outputs");
}

void check_out(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw ConfigError("output exists (use --force to overwrite): " + path);
}

Vec cfg_vec(const Config& cfg, const std::string& key, int expect) {
  const auto v = cfg.get_doubles(key);
  if (static_cast<int>(v.size()) != expect)
    throw ConfigError("config key " + key + " needs " + std::to_string(expect) + " values");
  return Eigen::Map<const Vec>(v.data(), expect);
}

std::uint64_t pick_seed(const Config& cfg, const Common& c) {
  if (c.seed) return *c.seed;
  return static_cast<std::uint64_t>(cfg.get_int("sampler.seed", 1));
}

PriorSpec make_prior(const Config& cfg, int p, const Box& fallback) {
  if (cfg.has("prior.lo") || cfg.has("prior.hi"))
    return PriorSpec::uniform(Box{cfg_vec(cfg, "prior.lo", p), cfg_vec(cfg, "prior.hi", p)});
  return PriorSpec::uniform(fallback);
}

PottsModel cfg_potts(const Config& cfg) {
  const int m = static_cast<int>(cfg.get_int("potts.m", 32));
  const int q = static_cast<int>(cfg.get_int("potts.q", 4));
  return PottsModel::square(m, q, cfg.get_bool("potts.toroidal", true));
}

PointProcessModel cfg_pointproc(const Config& cfg, const Window& win, int n_ref) {
  PointProcessModel m;
  m.win = win;
  m.R = cfg.get_double("pointproc.r");
  m.n_ref = n_ref;
  return m;
}

RunConfig cfg_run(const Config& cfg, const Common& c, int p, const Vec& init,
                  double default_scale) {
  RunConfig rc;
  rc.n_iters = static_cast<int>(cfg.get_int("sampler.n_iters", 10000));
  rc.burnin = static_cast<int>(cfg.get_int("sampler.burnin", rc.n_iters / 10));
  rc.seed = pick_seed(cfg, c);
  rc.init = cfg.has("sampler.init") ? cfg_vec(cfg, "sampler.init", p) : init;
  if (cfg.has("sampler.prop_scale")) {
    const auto v = cfg.get_doubles("sampler.prop_scale");
    if (static_cast<int>(v.size()) == 1)
      rc.prop_scale = Vec::Constant(p, v[0]);
    else
      rc.prop_scale = cfg_vec(cfg, "sampler.prop_scale", p);
  } else {
    rc.prop_scale = Vec::Constant(p, default_scale);
  }
  rc.aux_cycles = static_cast<int>(cfg.get_int("sampler.aux_cycles", 10));
  rc.sub_aux_cycles = static_cast<int>(cfg.get_int("sampler.sub_aux_cycles", 5));
  rc.n_sub = static_cast<int>(cfg.get_int("sampler.n_sub", 2));
  rc.adapt = cfg.get_bool("sampler.adapt", true);
  return rc;
}

// ---- simulate ----

int run_simulate(const Common& c) {
  Config cfg = Config::load(c.config_path);
  const std::string kind = cfg.get_str("model.kind");
  const std::string out = c.out.empty() ? cfg.get_str("data.path") : c.out;
  check_out(out, c.force);
  Rng rng = substream(pick_seed(cfg, c), "simulate", 0);
  const int cycles = static_cast<int>(cfg.get_int("simulate.cycles", 200));

  if (kind == "potts") {
    const PottsModel model = cfg_potts(cfg);
    Vec theta(1);
    theta[0] = cfg.get_double("potts.theta");
    save_lattice(model.simulate_aux(theta, cycles, rng), out);
  } else if (kind == "pointproc") {
    const Vec w = cfg_vec(cfg, "pointproc.window", 4);
    PointProcessModel model = cfg_pointproc(cfg, Window{w[0], w[1], w[2], w[3]}, 0);
    const Vec theta = cfg_vec(cfg, "pointproc.theta", 4);
    model.n_ref = static_cast<int>(theta[0] * model.win.area());
    save_points(model.simulate_aux(theta, cycles, rng), out);
  } else if (kind == "ergm") {
    const int n = static_cast<int>(cfg.get_int("ergm.n", 203));
    ErgmModel model;
    model.n = n;
    if (cfg.has("ergm.attrs")) {
      const Network attrs = load_network(cfg.get_str("ergm.edges"), cfg.get_str("ergm.attrs"));
      model = ErgmModel::from_network(attrs);
    } else {
      model.grade.resize(n);
      model.sex.resize(n);
      std::uniform_int_distribution<int> gd(7, 12), sd(0, 1);
      for (int i = 0; i < n; ++i) {
        model.grade[i] = gd(rng);
        model.sex[i] = sd(rng);
      }
    }
    const Vec theta = cfg_vec(cfg, "ergm.theta", 9);
    const Network y = model.simulate_aux(theta, cycles, rng);
    save_network(y, out, cfg.get_str("data.attrs", out + ".attrs.csv"));
  } else if (kind == "sir") {
    const long long n = cfg.get_int("sir.population");
    const int weeks = static_cast<int>(cfg.get_int("sir.weeks", 52));
    SirParams p = SirParams::from_vec(cfg_vec(cfg, "sir.theta", 3));
    save_obs(sir_simulate(p, n, weeks, rng), out);
  } else {
    throw ConfigError("unknown model.kind: " + kind);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

// ---- surrogate ----

template <class Model>
void build_gp(const Config& cfg, const Model& model, const typename Model::State& x,
              const Vec& theta_hat, const Mat& fisher, const PriorSpec& prior, Rng& rng,
              const std::string& out) {
  const int d = static_cast<int>(cfg.get_int("surrogate.particles", 100 * model.dim()));
  const int n_is = static_cast<int>(cfg.get_int("surrogate.is_draws", 1000));
  const int cycles = static_cast<int>(cfg.get_int("surrogate.aux_cycles", 50));
  const Vec sd = fisher.inverse().diagonal().cwiseMax(1e-12).cwiseSqrt();

  Mat particles;
  if (cfg.get_str("surrogate.design", "abc") == "abc") {
    AbcOptions opts;
    opts.aux_cycles = static_cast<int>(cfg.get_int("surrogate.abc_cycles", 20));
    opts.n_sim = static_cast<int>(cfg.get_int("surrogate.abc_sims", 500));
    particles = abc_particles(model, x, theta_hat, sd, d, rng, opts, &prior).particles;
  } else {
    Surrogate pilot = freq_surrogate(theta_hat, fisher);
    RunConfig pc;
    pc.n_iters = static_cast<int>(cfg.get_int("surrogate.pilot_iters", 2000));
    pc.burnin = pc.n_iters / 5;
    pc.init = theta_hat;
    pc.prop_scale = 2.38 / std::sqrt(static_cast<double>(model.dim())) * sd;
    pc.seed = hash_u64(rng(), 0);
    auto target = [&](const Vec& t) {
      return prior.log_density(t) == kNegInf ? kNegInf : pilot(t);
    };
    particles = shortrun_particles(mh_run(target, pc).post(), d, rng);
  }

  std::vector<typename Model::State> draws;
  draws.reserve(n_is);
  for (int l = 0; l < n_is; ++l) draws.push_back(model.simulate_aux(theta_hat, cycles, rng));
  const Vec z = is_logz(model, draws, theta_hat, particles);
  save_emulator(gp_fit(particles, z), out);
}

int run_surrogate(const Common& c) {
  Config cfg = Config::load(c.config_path);
  const std::string kind = cfg.get_str("model.kind");
  const std::string skind = cfg.get_str("surrogate.kind");
  const std::string out = c.out.empty() ? cfg.get_str("surrogate.path") : c.out;
  check_out(out, c.force);
  Rng rng = substream(pick_seed(cfg, c), "surrogate", 0);

  if (kind == "potts") {
    const PottsModel model = cfg_potts(cfg);
    const PottsLattice x = load_lattice(cfg.get_str("data.path"));
    const PottsMple fit = potts_mple(x);
    if (fit.degenerate) throw std::runtime_error("pseudo-likelihood fit is degenerate");
    if (skind == "freq") {
      save_freq(Vec::Constant(1, fit.theta_hat), Mat::Constant(1, 1, fit.fisher), out);
    } else if (skind == "gp") {
      const PriorSpec prior = make_prior(cfg, 1, Box{Vec::Zero(1), Vec::Constant(1, 2.0)});
      build_gp(cfg, model, x, Vec::Constant(1, fit.theta_hat), Mat::Constant(1, 1, fit.fisher),
               prior, rng, out);
    } else {
      throw ConfigError("unsupported surrogate.kind for potts: " + skind);
    }
  } else if (kind == "ergm") {
    const Network x = load_network(cfg.get_str("data.path"), cfg.get_str("data.attrs"));
    const ErgmModel model = ErgmModel::from_network(x);
    ErgmFit fit = ergm_mple(x);
    if (cfg.get_bool("surrogate.mcmle", false))
      fit = ergm_mcmle(x, fit.theta_hat, static_cast<int>(cfg.get_int("surrogate.is_draws", 500)),
                       static_cast<int>(cfg.get_int("surrogate.aux_cycles", 30)), rng);
    if (skind == "freq") {
      save_freq(fit.theta_hat, fit.fisher, out);
    } else if (skind == "gp") {
      const PriorSpec prior =
          make_prior(cfg, 9, Box{Vec::Constant(9, -15.0), Vec::Constant(9, 15.0)});
      build_gp(cfg, model, x, fit.theta_hat, fit.fisher, prior, rng, out);
    } else {
      throw ConfigError("unsupported surrogate.kind for ergm: " + skind);
    }
  } else if (kind == "sir") {
    if (skind != "freq") throw ConfigError("sir supports surrogate.kind = freq only");
    const ObsSeries obs = load_obs(cfg.get_str("data.path"));
    const SirFit fit = sir_freq_fit(obs, static_cast<int>(cfg.get_int("sir.n_particles", 200)),
                                    pick_seed(cfg, c));
    Mat fisher = fit.cov.inverse();
    Vec th(3);
    th << fit.theta_hat.beta, fit.theta_hat.gamma, fit.theta_hat.rho;
    save_freq(th, fisher, out);
  } else {
    throw ConfigError("no surrogate builder for model.kind: " + kind);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

// ---- run / bench ----

Surrogate load_surrogate_for(const Config& cfg, const std::string& skind, const PriorSpec& prior);

template <class Model>
Trace dispatch_run(const Config& cfg, const Common& c, const Model& model,
                   const typename Model::State& x, const PriorSpec& prior, const Vec& init,
                   double default_scale, const std::string& skind_override = "") {
  const std::string skind =
      skind_override.empty() ? cfg.get_str("sampler.kind", "avm") : skind_override;
  const RunConfig rc = cfg_run(cfg, c, model.dim(), init, default_scale);
  if (skind == "avm") return avm_run(model, x, prior, rc);
  if (skind == "da-sub") {
    if constexpr (requires(Rng& r) { model.subproblem(x, 1, r); })
      return daavm_s_run(model, x, prior, rc);
    else
      throw ConfigError("da-sub is not available for this model");
  }
  if (skind == "da-flat") return daavm_run(model, x, prior, Surrogate::flat(), rc);
  if (skind == "da-freq" || skind == "da-gp") {
    const auto t0 = std::chrono::steady_clock::now();
    Surrogate s = [&] {
      if (skind == "da-gp") {
        GPEmulator em = load_emulator(cfg.get_str("surrogate.path"));
        return gp_surrogate(std::move(em), prior, model, x);
      }
      const auto [th, fi] = load_freq(cfg.get_str("surrogate.path"));
      return freq_surrogate(th, fi);
    }();
    const double build_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return daavm_run(model, x, prior, s, rc, build_ms);
  }
  throw ConfigError("unknown sampler.kind: " + skind);
}

Trace run_any(const Config& cfg, const Common& c, const std::string& skind_override = "") {
  const std::string kind = cfg.get_str("model.kind");
  if (kind == "potts") {
    const PottsModel model = cfg_potts(cfg);
    const PottsLattice x = load_lattice(cfg.get_str("data.path"));
    const PriorSpec prior = make_prior(cfg, 1, Box{Vec::Zero(1), Vec::Constant(1, 2.0)});
    return dispatch_run(cfg, c, model, x, prior, prior.support_box().center(), 0.05,
                        skind_override);
  }
  if (kind == "pointproc") {
    const PointPattern x = load_points(cfg.get_str("data.path"));
    PointProcessModel model = cfg_pointproc(cfg, x.win, static_cast<int>(x.size()));
    if (!cfg.has("prior.lo"))
      throw ConfigError("pointproc requires prior.lo / prior.hi in the config");
    const PriorSpec prior = make_prior(cfg, 4, Box{Vec::Zero(4), Vec::Ones(4)});
    return dispatch_run(cfg, c, model, x, prior, prior.support_box().center(), 0.05,
                        skind_override);
  }
  if (kind == "ergm") {
    const Network x = load_network(cfg.get_str("data.path"), cfg.get_str("data.attrs"));
    const ErgmModel model = ErgmModel::from_network(x);
    const PriorSpec prior = make_prior(cfg, 9, Box{Vec::Constant(9, -15.0), Vec::Constant(9, 15.0)});
    Vec init = Vec::Zero(9);
    init[0] = -3.0;
    return dispatch_run(cfg, c, model, x, prior, init, 0.05, skind_override);
  }
  if (kind == "sir") {
    const ObsSeries obs = load_obs(cfg.get_str("data.path"));
    Vec lo(3), hi(3);
    lo << 1e-3, 1e-3, 1e-3;
    hi << 10.0, 10.0, 0.999;
    const PriorSpec prior = make_prior(cfg, 3, Box{lo, hi});
    Vec init(3);
    init << 2.0, 0.5, 0.1;
    const int np = static_cast<int>(cfg.get_int("sir.n_particles", 200));
    RunConfig rc = cfg_run(cfg, c, 3, init, 0.02);
    const std::string skind =
        skind_override.empty() ? cfg.get_str("sampler.kind", "pmcmc") : skind_override;
    if (skind == "pmcmc" || skind == "avm") return pmcmc_run(obs, prior, rc, np);
    if (skind == "da-pmcmc" || skind == "da-freq") {
      const auto [th, fi] = load_freq(cfg.get_str("surrogate.path"));
      return da_pmcmc_run(obs, prior, freq_surrogate(th, fi), rc, np);
    }
    throw ConfigError("unknown sampler.kind for sir: " + skind);
  }
  throw ConfigError("unknown model.kind: " + kind);
}

int run_run(const Common& c) {
  Config cfg = Config::load(c.config_path);
  const std::string out = c.out.empty() ? cfg.get_str("sampler.out", "trace.csv") : c.out;
  check_out(out, c.force);
  Trace tr = run_any(cfg, c);
  tr.config_hash = cfg.hash();
  save_trace(tr, out);
  std::cout << "wrote " << out << " (" << tr.n_total() << " iterations)\n";
  return 0;
}

void print_summary(const Trace& tr, const std::string& label) {
  const Summary s = summarize(tr);
  std::cout << label << ": n_post=" << s.n_post << " accept=" << s.accept_rate
            << " wall_ms=" << s.wall_ms << " ess_min=" << s.ess_min
            << " ess_per_min=" << s.ess_per_min << " aux=" << s.aux_total;
  if (tr.has_stages) std::cout << " stage1_pass=" << s.stage1_pass_rate << " eff=" << s.eff;
  std::cout << "\n";
  for (int j = 0; j < s.mean.size(); ++j)
    std::cout << "  theta_" << (j + 1) << ": mean=" << s.mean[j] << " sd=" << s.sd[j]
              << " hpd95=[" << s.hpd95[j].lo << ", " << s.hpd95[j].hi << "]"
              << " ess=" << s.ess_coord[j] << "\n";
}

int run_bench(const Common& c) {
  Config cfg = Config::load(c.config_path);
  const std::string base = cfg.get_str("bench.baseline", "avm");
  const std::string da = cfg.get_str("bench.candidate", "da-freq");
  Trace t_base = run_any(cfg, c, base);
  Trace t_da = run_any(cfg, c, da);
  print_summary(t_base, base);
  print_summary(t_da, da);
  const Summary sb = summarize(t_base), sd = summarize(t_da);
  if (sb.ess_per_min > 0)
    std::cout << "speedup (ess/min ratio): " << sd.ess_per_min / sb.ess_per_min << "\n";
  if (!c.out.empty()) {
    check_out(c.out, c.force);
    save_trace(t_da, c.out);
  }
  return 0;
}

int run_summarize(const Common& c, const std::string& trace_path) {
  const Trace tr = load_trace(trace_path);
  print_summary(tr, trace_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed-acceptance auxiliary-variable MCMC toolkit"};
  app.require_subcommand(1);

  Common c_sim, c_sur, c_run, c_bench, c_sum;
  std::string trace_path;

  auto* sim = app.add_subcommand("simulate", "draw synthetic data from a model");
  add_common(sim, c_sim);
  auto* sur = app.add_subcommand("surrogate", "fit and save a first-stage surrogate");
  add_common(sur, c_sur);
  auto* run = app.add_subcommand("run", "run a sampler and save the trace");
  add_common(run, c_run);
  auto* bench = app.add_subcommand("bench", "compare a baseline and a delayed-acceptance run");
  add_common(bench, c_bench);
  auto* sum = app.add_subcommand("summarize", "summarize a saved trace");
  add_common(sum, c_sum, false);
  sum->add_option("trace", trace_path, "trace CSV path (default: sampler.out from --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (sum->parsed() && trace_path.empty()) {
      if (c_sum.config_path.empty())
        throw daavm::ConfigError("summarize needs a trace path or --config");
      trace_path = daavm::Config::load(c_sum.config_path).get_str("sampler.out", "trace.csv");
    }
    if (sim->parsed()) return run_simulate(c_sim);
    if (sur->parsed()) return run_surrogate(c_sur);
    if (run->parsed()) return run_run(c_run);
    if (bench->parsed()) return run_bench(c_bench);
    if (sum->parsed()) return run_summarize(c_sum, trace_path);
  } catch (const daavm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
