#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"

namespace daavm {

// Latin hypercube sample: n points in box, one per stratum in each coordinate.
inline Mat lhs(int n, const Box& box, Rng& rng) {
  if (n < 1) throw std::invalid_argument("lhs: n must be positive");
  const int p = box.dim();
  Mat out(n, p);
  std::vector<int> perm(n);
  for (int j = 0; j < p; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const double w = box.width(j) / n;
    for (int i = 0; i < n; ++i)
      out(i, j) = box.lo[j] + (perm[i] + uniform01(rng)) * w;
  }
  return out;
}

struct AbcOptions {
  int n_sim = 500;        // pilot simulations over the initial region
  double eps = -1.0;      // acceptance threshold; <0 picks the 10% quantile
  double accept_frac = 0.10;
  int aux_cycles = 10;    // inner-sampler cycles per pilot draw
  bool standardize = true;
  double sd_mult = 10.0;  // initial region half-width in estimate SDs
};

struct AbcResult {
  Box region;      // bounding box of the accepted pilot draws
  Mat particles;   // d x p LHS design inside region
  double eps = 0.0;
  int n_accepted = 0;
};

// Shrinks a crude confidence region around a point estimate to the set of
// parameters whose simulated summary statistics land near the observed ones,
// then fills the accepted bounding box with a Latin hypercube design.
template <class Model>
AbcResult abc_particles(const Model& model, const typename Model::State& x, const Vec& theta_hat,
                        const Vec& sd_hat, int d, Rng& rng, AbcOptions opts = {},
                        const PriorSpec* prior = nullptr) {
  const int p = static_cast<int>(theta_hat.size());
  if (sd_hat.size() != p) throw std::invalid_argument("abc_particles: sd length mismatch");
  if (d < 1) throw std::invalid_argument("abc_particles: need d >= 1 design points");

  Box d1{theta_hat - opts.sd_mult * sd_hat, theta_hat + opts.sd_mult * sd_hat};
  if (prior) d1 = d1.intersect(prior->support_box());
  for (int j = 0; j < p; ++j)
    if (!(d1.lo[j] < d1.hi[j]))
      throw std::invalid_argument("abc_particles: initial region is empty");

  const Vec s_obs = model.suff_stats(x);
  Vec scale = Vec::Ones(s_obs.size());

  Mat thetas = lhs(opts.n_sim, d1, rng);
  Mat stats(opts.n_sim, s_obs.size());
  for (int i = 0; i < opts.n_sim; ++i) {
    const Vec theta = thetas.row(i).transpose();
    const auto y = model.simulate_aux(theta, opts.aux_cycles, rng);
    stats.row(i) = model.suff_stats(y).transpose();
  }
  if (opts.standardize) {
    for (int k = 0; k < s_obs.size(); ++k) {
      const double sd = std::sqrt((stats.col(k).array() - stats.col(k).mean()).square().mean());
      scale[k] = sd > 1e-12 ? sd : 1.0;
    }
  }

  Vec disc(opts.n_sim);
  for (int i = 0; i < opts.n_sim; ++i)
    disc[i] = ((stats.row(i).transpose() - s_obs).array() / scale.array()).matrix().norm();

  double eps = opts.eps;
  if (eps < 0.0) {
    Vec sorted = disc;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const int k = std::clamp(static_cast<int>(opts.accept_frac * opts.n_sim), 1, opts.n_sim - 1);
    eps = sorted[k];
  }

  AbcResult out;
  out.eps = eps;
  Vec lo = d1.hi, hi = d1.lo;
  for (int i = 0; i < opts.n_sim; ++i) {
    if (disc[i] >= eps) continue;
    ++out.n_accepted;
    lo = lo.cwiseMin(thetas.row(i).transpose());
    hi = hi.cwiseMax(thetas.row(i).transpose());
  }
  if (out.n_accepted < 2)
    throw std::runtime_error("abc_particles: too few accepted pilot draws; raise eps or n_sim");
  // Degenerate coordinates (all accepted draws equal) get a thin slab.
  for (int j = 0; j < p; ++j)
    if (!(lo[j] < hi[j])) {
      const double pad = 1e-3 * d1.width(j);
      lo[j] -= pad;
      hi[j] += pad;
    }
  out.region = Box{lo, hi};
  out.particles = lhs(d, out.region, rng);
  return out;
}

// Design region from a short pilot chain: per-coordinate range of the draws,
// expanded by a fraction on each side.
inline Box shortrun_region(const Mat& draws, double expand = 0.20) {
  if (draws.rows() < 2) throw std::invalid_argument("shortrun_region: need at least two draws");
  Vec lo = draws.colwise().minCoeff().transpose();
  Vec hi = draws.colwise().maxCoeff().transpose();
  for (int j = 0; j < lo.size(); ++j) {
    const double pad = expand * std::max(hi[j] - lo[j], 1e-8);
    lo[j] -= pad;
    hi[j] += pad;
  }
  return Box{lo, hi};
}

inline Mat shortrun_particles(const Mat& draws, int d, Rng& rng, double expand = 0.20) {
  return lhs(d, shortrun_region(draws, expand), rng);
}

}  // namespace daavm
