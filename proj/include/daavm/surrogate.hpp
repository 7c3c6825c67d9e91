#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "daavm/optim.hpp"
#include "daavm/param.hpp"
#include "daavm/prior.hpp"
#include "daavm/rng.hpp"

namespace daavm {

// First-stage approximation: log pi_hat(theta | x) up to an additive constant.
struct Surrogate {
  enum class Kind { Flat, Gp, Freq, Custom };
  Kind kind = Kind::Flat;
  std::function<double(const Vec&)> log_density;

  double operator()(const Vec& theta) const {
    if (kind == Kind::Flat) return 0.0;
    return log_density(theta);
  }

  static Surrogate flat() { return Surrogate{}; }

  static Surrogate custom(std::function<double(const Vec&)> f) {
    Surrogate s;
    s.kind = Kind::Custom;
    s.log_density = std::move(f);
    return s;
  }
};

// log Zhat_IS(theta) - log Z(theta_ref) for each particle:
// log[(1/N) sum_l h(x_l | theta) / h(x_l | theta_ref)], computed by
// log-sum-exp. Exponential-family models reduce the ratio to
// (theta - theta_ref) . s(x_l) and only statistics are kept.
template <class Model>
Vec is_logz(const Model& model, const std::vector<typename Model::State>& draws,
            const Vec& theta_ref, const Mat& particles) {
  const int n = static_cast<int>(draws.size());
  const int d = static_cast<int>(particles.rows());
  if (n < 1) throw std::invalid_argument("is_logz: need at least one reference draw");
  if (d < 1) throw std::invalid_argument("is_logz: need at least one particle");
  Vec out(d);
  if constexpr (Model::has_stats) {
    Mat stats(n, theta_ref.size());
    for (int l = 0; l < n; ++l) stats.row(l) = model.suff_stats(draws[l]).transpose();
    for (int i = 0; i < d; ++i) {
      const Vec diff = particles.row(i).transpose() - theta_ref;
      const Vec lr = stats * diff;
      const double mx = lr.maxCoeff();
      out[i] = mx + std::log((lr.array() - mx).exp().sum() / n);
    }
  } else {
    Vec ref(n);
    for (int l = 0; l < n; ++l) ref[l] = model.log_unnorm(draws[l], theta_ref);
    for (int i = 0; i < d; ++i) {
      const Vec theta = particles.row(i).transpose();
      Vec lr(n);
      for (int l = 0; l < n; ++l) lr[l] = model.log_unnorm(draws[l], theta) - ref[l];
      const double mx = lr.maxCoeff();
      out[i] = mx + std::log((lr.array() - mx).exp().sum() / n);
    }
  }
  return out;
}

inline constexpr double kNuggetFloor = 1e-8;

// Matern-3/2 covariance between two points.
inline double matern32(double dist, double sigma2, double range) {
  const double a = std::sqrt(3.0) * dist / range;
  return sigma2 * (1.0 + a) * std::exp(-a);
}

struct GPEmulator {
  Mat particles;  // d x p design
  Vec z;          // log Zhat_IS at the particles
  double sigma2 = 1.0, range = 1.0, nugget = kNuggetFloor;
  Vec beta;  // trend coefficients
  bool linear_trend = true;  // trend = theta' beta; otherwise a constant
  Eigen::LLT<Mat> chol;      // of the d x d training covariance
  Vec alpha;                 // C^{-1} (z - trend)

  int dim() const { return static_cast<int>(particles.cols()); }

  Mat trend_design() const {
    if (linear_trend) return particles;
    return Mat::Ones(particles.rows(), 1);
  }

  double trend_at(const Vec& theta) const {
    return linear_trend ? theta.dot(beta) : beta[0];
  }

  // Rebuilds the covariance factorization and GLS trend for the stored
  // hyperparameters; throws on a failed Cholesky.
  void refit_factorization() {
    const int d = static_cast<int>(particles.rows());
    Mat c(d, d);
    for (int i = 0; i < d; ++i) {
      c(i, i) = sigma2 + nugget;
      for (int j = i + 1; j < d; ++j)
        c(i, j) = c(j, i) = matern32((particles.row(i) - particles.row(j)).norm(), sigma2, range);
    }
    chol.compute(c);
    if (chol.info() != Eigen::Success)
      throw std::runtime_error("GPEmulator: Cholesky failed; raise the nugget floor");
    const Mat psi = trend_design();
    const Mat cinv_psi = chol.solve(psi);
    const Mat gram = psi.transpose() * cinv_psi;
    beta = Eigen::LDLT<Mat>(gram).solve(psi.transpose() * chol.solve(z));
    alpha = chol.solve(z - psi * beta);
  }
};

struct GpFitOptions {
  int n_starts = 8;
  bool linear_trend = true;
  double nugget_floor = kNuggetFloor;
};

namespace detail {

// Profile (negative) log marginal likelihood with the trend solved by GLS.
inline double gp_neg_loglik(const Mat& particles, const Vec& z, const Mat& psi, double sigma2,
                            double range, double nugget) {
  const int d = static_cast<int>(particles.rows());
  Mat c(d, d);
  for (int i = 0; i < d; ++i) {
    c(i, i) = sigma2 + nugget;
    for (int j = i + 1; j < d; ++j)
      c(i, j) = c(j, i) = matern32((particles.row(i) - particles.row(j)).norm(), sigma2, range);
  }
  Eigen::LLT<Mat> llt(c);
  if (llt.info() != Eigen::Success) return 1e300;
  const Mat cinv_psi = llt.solve(psi);
  const Vec beta = Eigen::LDLT<Mat>(psi.transpose() * cinv_psi).solve(psi.transpose() * llt.solve(z));
  const Vec resid = z - psi * beta;
  double logdet = 0.0;
  const Mat l = llt.matrixL();
  for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(l(i, i));
  return 0.5 * (logdet + resid.dot(llt.solve(resid)));
}

}  // namespace detail

// Maximum-likelihood fit of (sigma^2, range, nugget) with multi-start
// Nelder-Mead; range starts are log-spaced over the particle-distance range.
inline GPEmulator gp_fit(const Mat& particles, const Vec& z, GpFitOptions opts = {}) {
  const int d = static_cast<int>(particles.rows());
  const int p = static_cast<int>(particles.cols());
  if (d < p + 2) throw std::invalid_argument("gp_fit: need at least p + 2 particles");
  if (z.size() != d) throw std::invalid_argument("gp_fit: z length mismatch");

  double dmin = 1e300, dmax = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double dist = (particles.row(i) - particles.row(j)).norm();
      if (dist > 1e-12 && dist < dmin) dmin = dist;
      if (dist > dmax) dmax = dist;
    }
  if (dmax <= 0.0) throw std::invalid_argument("gp_fit: particles are collinear or identical");
  if (dmin > dmax) dmin = dmax / 100.0;

  const Mat psi = opts.linear_trend ? particles : Mat::Ones(d, 1);
  const double zvar = std::max((z.array() - z.mean()).square().mean(), 1e-12);

  auto objective = [&](const Vec& t) {
    const double sigma2 = std::exp(t[0]);
    const double range = std::exp(t[1]);
    const double nugget = opts.nugget_floor + std::exp(t[2]);
    return detail::gp_neg_loglik(particles, z, psi, sigma2, range, nugget);
  };

  Vec best = Vec::Zero(3);
  double best_f = 1e301;
  for (int s = 0; s < opts.n_starts; ++s) {
    const double frac = opts.n_starts > 1 ? static_cast<double>(s) / (opts.n_starts - 1) : 0.5;
    Vec t0(3);
    t0[0] = std::log(zvar);
    t0[1] = std::log(dmin) + frac * (std::log(dmax) - std::log(dmin));
    t0[2] = std::log(std::max(1e-6 * zvar, opts.nugget_floor));
    const NelderMeadResult nm = nelder_mead(objective, t0, 0.7, 400, 1e-9);
    if (nm.f < best_f) {
      best_f = nm.f;
      best = nm.x;
    }
  }
  if (best_f >= 1e300)
    throw std::runtime_error("gp_fit: all starts failed Cholesky; raise the nugget floor");

  GPEmulator em;
  em.particles = particles;
  em.z = z;
  em.linear_trend = opts.linear_trend;
  em.sigma2 = std::exp(best[0]);
  em.range = std::exp(best[1]);
  em.nugget = opts.nugget_floor + std::exp(best[2]);
  em.refit_factorization();
  return em;
}

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;  // clamped at 0
};

inline GpPrediction gp_predict(const GPEmulator& em, const Vec& theta) {
  if (theta.size() != em.dim()) throw std::invalid_argument("gp_predict: dimension mismatch");
  const int d = static_cast<int>(em.particles.rows());
  Vec c(d);
  for (int i = 0; i < d; ++i)
    c[i] = matern32((em.particles.row(i).transpose() - theta).norm(), em.sigma2, em.range);
  GpPrediction out;
  out.mean = em.trend_at(theta) + c.dot(em.alpha);
  const double var = em.sigma2 + em.nugget - c.dot(em.chol.solve(c));
  out.variance = std::max(var, 0.0);
  return out;
}

// pi_hat_GP(theta | x): log p(theta) + log h(x|theta) - predicted log Z.
template <class Model>
Surrogate gp_surrogate(GPEmulator em, const PriorSpec& prior, const Model& model,
                       typename Model::State x) {
  Surrogate s;
  s.kind = Surrogate::Kind::Gp;
  s.log_density = [em = std::move(em), prior, model, x = std::move(x)](const Vec& theta) {
    const double lp = prior.log_density(theta);
    if (lp == kNegInf) return kNegInf;
    return lp + model.log_unnorm(x, theta) - gp_predict(em, theta).mean;
  };
  return s;
}

// Gaussian density (up to constant) centered at a frequentist estimate with
// precision given by the observed Fisher information. Strictly positive
// everywhere, so the first stage never excludes admissible proposals.
inline Surrogate freq_surrogate(const Vec& theta_hat, const Mat& fisher) {
  Mat f = 0.5 * (fisher + fisher.transpose());
  if (Eigen::LLT<Mat>(f).info() != Eigen::Success) f = nearest_spd(f);
  if (Eigen::LLT<Mat>(f).info() != Eigen::Success && f.rows() > 0)
    throw std::invalid_argument("freq_surrogate: fisher not repairable");
  Surrogate s;
  s.kind = Surrogate::Kind::Freq;
  s.log_density = [theta_hat, f](const Vec& theta) {
    const Vec d = theta - theta_hat;
    return -0.5 * d.dot(f * d);
  };
  return s;
}

inline Surrogate freq_surrogate(double theta_hat, double fisher) {
  Vec t(1);
  t[0] = theta_hat;
  Mat f(1, 1);
  f(0, 0) = fisher;
  return freq_surrogate(t, f);
}

}  // namespace daavm
