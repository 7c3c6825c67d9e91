#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "daavm/param.hpp"
#include "daavm/rng.hpp"

namespace daavm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Independent per-coordinate prior.
struct PriorSpec {
  enum class Kind { Uniform, Normal, LogNormal, Beta };
  struct Coord {
    Kind kind;
    double a, b;  // uniform(lo,hi), normal(mean,var), lognormal(logmean,sdlog), beta(a,b)
  };
  std::vector<Coord> coords;

  static PriorSpec uniform(const Box& box) {
    PriorSpec p;
    for (int i = 0; i < box.dim(); ++i) p.coords.push_back({Kind::Uniform, box.lo[i], box.hi[i]});
    return p;
  }

  PriorSpec& add_uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("prior: uniform requires lo < hi");
    coords.push_back({Kind::Uniform, lo, hi});
    return *this;
  }
  PriorSpec& add_normal(double mean, double var) {
    if (!(var > 0)) throw std::invalid_argument("prior: normal requires var > 0");
    coords.push_back({Kind::Normal, mean, var});
    return *this;
  }
  PriorSpec& add_lognormal(double logmean, double sdlog) {
    if (!(sdlog > 0)) throw std::invalid_argument("prior: lognormal requires sdlog > 0");
    coords.push_back({Kind::LogNormal, logmean, sdlog});
    return *this;
  }
  PriorSpec& add_beta(double a, double b) {
    if (!(a > 0 && b > 0)) throw std::invalid_argument("prior: beta requires a,b > 0");
    coords.push_back({Kind::Beta, a, b});
    return *this;
  }

  int dim() const { return static_cast<int>(coords.size()); }

  double log_density(const Vec& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("log_prior: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      const Coord& c = coords[i];
      const double x = theta[i];
      switch (c.kind) {
        case Kind::Uniform:
          if (x < c.a || x > c.b) return kNegInf;
          s += -std::log(c.b - c.a);
          break;
        case Kind::Normal:
          s += -0.5 * std::log(2.0 * M_PI * c.b) - (x - c.a) * (x - c.a) / (2.0 * c.b);
          break;
        case Kind::LogNormal: {
          if (x <= 0) return kNegInf;
          const double lx = std::log(x);
          s += -std::log(x * c.b) - 0.5 * std::log(2.0 * M_PI) -
               (lx - c.a) * (lx - c.a) / (2.0 * c.b * c.b);
          break;
        }
        case Kind::Beta:
          if (x <= 0 || x >= 1) return kNegInf;
          s += std::lgamma(c.a + c.b) - std::lgamma(c.a) - std::lgamma(c.b) +
               (c.a - 1) * std::log(x) + (c.b - 1) * std::log(1 - x);
          break;
      }
    }
    return s;
  }

  // Box covering essentially all prior mass; used to intersect design regions.
  // Unbounded coordinates are truncated at +-10 sd around the center.
  Box support_box() const {
    Vec lo(dim()), hi(dim());
    for (int i = 0; i < dim(); ++i) {
      const Coord& c = coords[i];
      switch (c.kind) {
        case Kind::Uniform:
          lo[i] = c.a;
          hi[i] = c.b;
          break;
        case Kind::Normal:
          lo[i] = c.a - 10.0 * std::sqrt(c.b);
          hi[i] = c.a + 10.0 * std::sqrt(c.b);
          break;
        case Kind::LogNormal:
          lo[i] = std::exp(c.a - 10.0 * c.b);
          hi[i] = std::exp(c.a + 10.0 * c.b);
          break;
        case Kind::Beta:
          lo[i] = 1e-12;
          hi[i] = 1.0 - 1e-12;
          break;
      }
    }
    return Box(lo, hi);
  }

  Vec sample(Rng& rng) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) {
      const Coord& c = coords[i];
      switch (c.kind) {
        case Kind::Uniform:
          x[i] = std::uniform_real_distribution<double>(c.a, c.b)(rng);
          break;
        case Kind::Normal:
          x[i] = std::normal_distribution<double>(c.a, std::sqrt(c.b))(rng);
          break;
        case Kind::LogNormal:
          x[i] = std::exp(std::normal_distribution<double>(c.a, c.b)(rng));
          break;
        case Kind::Beta: {
          std::gamma_distribution<double> ga(c.a, 1.0), gb(c.b, 1.0);
          double u = ga(rng), v = gb(rng);
          x[i] = u / (u + v);
          break;
        }
      }
    }
    return x;
  }
};

inline double log_prior(const PriorSpec& prior, const Vec& theta) { return prior.log_density(theta); }

}  // namespace daavm
