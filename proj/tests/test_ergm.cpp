#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "daavm/ergm.hpp"
#include "daavm/rng.hpp"

using namespace daavm;

namespace {

// Independent statistics oracle: direct formulas, no bit tricks.
Vec stats_oracle(const Network& x) {
  const double tau = 0.25;
  auto f = [&](int k) {
    return k <= 0 ? 0.0 : std::exp(tau) * (1.0 - std::pow(1.0 - std::exp(-tau), k));
  };
  Vec s = Vec::Zero(9);
  std::vector<int> deg(x.n, 0);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j)
      if (i != j && x.edge(i, j)) ++deg[i];
  for (int i = 0; i < x.n; ++i) {
    s[0] += deg[i];
    s[7] += f(deg[i]);
  }
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j) {
      if (!x.edge(i, j)) continue;
      if (x.grade[i] == x.grade[j]) s[x.grade[i] - 6] += 1.0;
      int sp = 0;
      for (int k = 0; k < x.n; ++k)
        if (k != i && k != j && x.edge(i, k) && x.edge(j, k)) ++sp;
      s[8] += f(sp);
    }
  return s;
}

Network random_net(int n, double p, int g_lo, int g_hi, Rng& rng) {
  Network x(n);
  for (int i = 0; i < n; ++i) x.grade[i] = g_lo + static_cast<int>(uniform01(rng) * (g_hi - g_lo + 1));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < p) x.set_edge(i, j, true);
  return x;
}

}  // namespace

TEST_CASE("hand values for the statistic vector") {
  // single edge between same-grade nodes
  Network x(3);
  x.grade = {9, 9, 10};
  x.set_edge(0, 1, true);
  Vec s = ergm_stats(x);
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(s[3] == doctest::Approx(1.0));  // grade-9 slot: indices 1..6 are grades 7..12
  const double f1 = std::exp(0.25) * (1.0 - std::pow(1.0 - std::exp(-0.25), 1));
  CHECK(s[7] == doctest::Approx(2.0 * f1));  // = 2, since f(1) = 1
  CHECK(f1 == doctest::Approx(1.0));
  CHECK(s[8] == doctest::Approx(0.0));  // one edge, zero shared partners -> f(0)=0

  // triangle
  Network t(3);
  t.grade = {7, 8, 9};
  t.set_edge(0, 1, true);
  t.set_edge(0, 2, true);
  t.set_edge(1, 2, true);
  Vec st = ergm_stats(t);
  CHECK(st[0] == doctest::Approx(6.0));
  for (int g = 1; g <= 6; ++g) CHECK(st[g] == doctest::Approx(0.0));
  const double f2 = std::exp(0.25) * (1.0 - std::pow(1.0 - std::exp(-0.25), 2));
  CHECK(st[7] == doctest::Approx(3.0 * f2));
  CHECK(st[7] == doctest::Approx(3.6635).epsilon(1e-4));
  CHECK(st[8] == doctest::Approx(3.0 * f1));  // each edge has one shared partner
  CHECK(st[8] == doctest::Approx(3.0));
}

TEST_CASE("statistics match brute-force oracle on random graphs") {
  Rng rng = substream(41, "stats", 0);
  for (int rep = 0; rep < 30; ++rep) {
    Network x = random_net(12, 0.3, 7, 12, rng);
    const Vec a = ergm_stats(x);
    const Vec b = stats_oracle(x);
    for (int k = 0; k < 9; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}

TEST_CASE("change statistics agree with full recomputation") {
  Rng rng = substream(41, "change", 0);
  for (int rep = 0; rep < 20; ++rep) {
    Network x = random_net(10, 0.3, 7, 9, rng);
    for (int i = 0; i < x.n; ++i)
      for (int j = i + 1; j < x.n; ++j) {
        if (x.edge(i, j)) x.set_edge(i, j, false);
        const Vec before = ergm_stats(x);
        const Vec d = ergm_change_stats(x, i, j);
        x.set_edge(i, j, true);
        const Vec after = ergm_stats(x);
        for (int k = 0; k < 9; ++k) CHECK(d[k] == doctest::Approx(after[k] - before[k]).epsilon(1e-10));
        x.set_edge(i, j, false);
      }
  }
}

TEST_CASE("theta = 0 gives independent fair-coin dyads") {
  Rng rng = substream(42, "fair", 0);
  ErgmModel m;
  m.n = 16;
  m.grade.assign(16, 8);
  m.sex.assign(16, 0);
  const Vec zero = Vec::Zero(9);
  double edges = 0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) edges += m.simulate_aux(zero, 1, rng).n_edges();
  const double dyads = 16 * 15 / 2.0;
  const double se = std::sqrt(dyads * 0.25 / reps);
  CHECK(std::abs(edges / reps - dyads / 2.0) < 3.0 * se);
}

TEST_CASE("edges-only model has logistic(2 theta1) edge frequency") {
  Rng rng = substream(42, "edges", 0);
  ErgmModel m;
  m.n = 14;
  m.grade.assign(14, 8);
  m.sex.assign(14, 0);
  Vec theta = Vec::Zero(9);
  theta[0] = -0.4;
  // only the degree-sum coefficient is nonzero, so eta = 2 theta[0] for every
  // dyad and edges are independent Bernoulli
  const double p = 1.0 / (1.0 + std::exp(-2.0 * theta[0]));
  double edges = 0;
  const int reps = 1500;
  for (int r = 0; r < reps; ++r) {
    Network y = m.simulate_aux(theta, 2, rng);
    edges += y.n_edges();
  }
  const double dyads = 14 * 13 / 2.0;
  const double se = std::sqrt(dyads * p * (1 - p) / reps);
  CHECK(std::abs(edges / reps - dyads * p) < 3.5 * se);
}

TEST_CASE("pseudolikelihood at theta = 0 is -C(n,2) log 2 and oracle matches") {
  Rng rng = substream(43, "pl", 0);
  Network x = random_net(9, 0.4, 7, 12, rng);
  CHECK(ergm_log_pl(x, Vec::Zero(9)) == doctest::Approx(-(9 * 8 / 2.0) * std::log(2.0)));

  // independent oracle at a nonzero theta using brute-force stat differences
  Vec theta = Vec::Zero(9);
  theta[0] = -0.3;
  theta[7] = 0.2;
  theta[8] = 0.1;
  Network y = x;
  double expect = 0.0;
  for (int i = 0; i < y.n; ++i)
    for (int j = i + 1; j < y.n; ++j) {
      const bool present = y.edge(i, j);
      if (present) y.set_edge(i, j, false);
      const Vec before = stats_oracle(y);
      y.set_edge(i, j, true);
      const Vec delta = stats_oracle(y) - before;
      y.set_edge(i, j, present);
      const double eta = theta.dot(delta);
      expect += (present ? eta : 0.0) - std::log(1.0 + std::exp(eta));
    }
  CHECK(ergm_log_pl(x, theta) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("MPLE has zero gradient and recovers Erdos-Renyi density") {
  Rng rng = substream(44, "mple", 0);
  Network x = random_net(40, 0.15, 7, 12, rng);
  const ErgmFit fit = ergm_mple(x);
  // zero gradient of the pseudolikelihood via finite differences
  const double h = 1e-5;
  for (int k = 0; k < 9; ++k) {
    Vec tp = fit.theta_hat, tm = fit.theta_hat;
    tp[k] += h;
    tm[k] -= h;
    const double g = (ergm_log_pl(x, tp) - ergm_log_pl(x, tm)) / (2 * h);
    CHECK(std::abs(g) < 1e-3);
  }
  // fisher is positive semidefinite (can be near-singular for sparse terms)
  const Eigen::SelfAdjointEigenSolver<Mat> es(fit.fisher);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("MPLE throws on a separated (empty) graph") {
  Network x(8);
  CHECK_THROWS_AS(ergm_mple(x, 5000), SeparationError);
}

TEST_CASE("MCMLE moves toward the data and keeps an SPD information matrix") {
  Rng rng = substream(45, "mcmle", 0);
  // synthetic truth: draw a network at theta*, then fit
  ErgmModel m;
  m.n = 30;
  m.grade.assign(30, 0);
  for (int i = 0; i < 30; ++i) m.grade[i] = 7 + i % 3;
  m.sex.assign(30, 0);
  Vec truth = Vec::Zero(9);
  truth[0] = -1.0;
  truth[3] = 0.8;
  truth[7] = 0.3;
  Network x = m.simulate_aux(truth, 50, rng);
  const Vec theta0 = ergm_mple(x).theta_hat;
  const ErgmFit fit = ergm_mcmle(x, theta0, 400, 4, rng);
  // fixed-point property: IS-weighted mean statistic at theta_hat ~ observed
  CHECK(fit.theta_hat.allFinite());
  const Eigen::LLT<Mat> llt(fit.fisher + 1e-10 * Mat::Identity(9, 9));
  CHECK(llt.info() == Eigen::Success);
  // recovery: active coordinates within a loose band of the truth
  CHECK(std::abs(fit.theta_hat[0] - truth[0]) < 1.5);
}

TEST_CASE("statistics are invariant to node relabeling") {
  Rng rng = substream(46, "perm", 0);
  Network x = random_net(11, 0.3, 7, 12, rng);
  std::vector<int> perm(11);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 10; i > 0; --i) std::swap(perm[i], perm[static_cast<int>(uniform01(rng) * (i + 1))]);
  Network y(11);
  for (int i = 0; i < 11; ++i) {
    y.grade[perm[i]] = x.grade[i];
    y.sex[perm[i]] = x.sex[i];
  }
  for (int i = 0; i < 11; ++i)
    for (int j = i + 1; j < 11; ++j)
      if (x.edge(i, j)) y.set_edge(perm[i], perm[j], true);
  const Vec a = ergm_stats(x), b = ergm_stats(y);
  for (int k = 0; k < 9; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
}
