#pragma once

#include <optional>
#include <stdexcept>
#include <utility>

#include "daavm/param.hpp"
#include "daavm/rng.hpp"

namespace daavm {

// Symmetric Gaussian random-walk proposal. Either per-coordinate scales or a
// dense covariance (its Cholesky factor is cached at construction).
struct ProposalSpec {
  Vec scale;
  std::optional<Mat> chol_cov;  // lower factor of the dense covariance, if given

  explicit ProposalSpec(Vec scale_) : scale(std::move(scale_)) {
    for (int i = 0; i < scale.size(); ++i)
      if (!(scale[i] > 0)) throw std::invalid_argument("proposal: scales must be > 0");
  }

  ProposalSpec(Vec scale_, const Mat& cov) : ProposalSpec(std::move(scale_)) {
    if (cov.rows() != scale.size() || cov.cols() != scale.size())
      throw std::invalid_argument("proposal: covariance dimension mismatch");
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("proposal: covariance not positive definite");
    chol_cov = Mat(llt.matrixL());
  }

  int dim() const { return static_cast<int>(scale.size()); }
};

// Returns (theta*, log q(theta|theta*) - log q(theta*|theta)); the ratio is 0
// for this symmetric kernel.
inline std::pair<Vec, double> propose(const ProposalSpec& spec, const Vec& theta, Rng& rng) {
  if (theta.size() != spec.dim()) throw std::invalid_argument("propose: dimension mismatch");
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec z(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) z[i] = nd(rng);
  Vec step = spec.chol_cov ? Vec(*spec.chol_cov * z) : Vec(spec.scale.cwiseProduct(z));
  return {theta + step, 0.0};
}

}  // namespace daavm
