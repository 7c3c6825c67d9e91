#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "daavm/pointproc.hpp"
#include "daavm/rng.hpp"

using namespace daavm;

namespace {

// Independent breakpoint solver: pure bisection on d1 using only the printed
// piecewise formulas (value match after eliminating d2 via derivative match).
std::pair<double, double> breakpoints_bisect(double t1, double t2, double t3, double R) {
  const double a = std::sqrt(t1) / (t2 - R);
  auto mid = [&](double d) { return t1 - (a * (d - t2)) * (a * (d - t2)); };
  auto d2_of = [&](double d1) {
    // tail' = mid' at d1:  -2/(t3^2 (d1-d2)^3) = -2 a^2 (d1-t2)
    return d1 - std::cbrt(1.0 / (t3 * t3 * a * a * (d1 - t2)));
  };
  auto value_gap = [&](double d1) {
    const double d2 = d2_of(d1);
    const double tail = 1.0 + 1.0 / ((t3 * (d1 - d2)) * (t3 * (d1 - d2)));
    return mid(d1) - tail;
  };
  double lo = t2 + 1e-12, hi = t2 + (std::sqrt(t1) / a);  // mid hits 0 at hi
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    if (value_gap(m) > 0)
      lo = m;
    else
      hi = m;
  }
  const double d1 = 0.5 * (lo + hi);
  return {d1, d2_of(d1)};
}

double batch_se(const std::vector<double>& v) {
  const int b = 50;
  const int nb = static_cast<int>(v.size()) / b;
  std::vector<double> means(nb, 0.0);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < b; ++j) means[i] += v[i * b + j];
    means[i] /= b;
  }
  double m = 0;
  for (double x : means) m += x;
  m /= nb;
  double var = 0;
  for (double x : means) var += (x - m) * (x - m);
  var /= (nb - 1);
  return std::sqrt(var / nb);
}

}  // namespace

TEST_CASE("breakpoints match the independent bisection oracle") {
  InteractionParams p;
  p.t1 = 1.34;
  p.t2 = 11.5;
  p.t3 = 0.22;
  p.R = 2.0;
  solve_breakpoints(p);
  const auto [d1, d2] = breakpoints_bisect(1.34, 11.5, 0.22, 2.0);
  CHECK(p.d1 == doctest::Approx(d1).epsilon(1e-6));
  CHECK(p.d2 == doctest::Approx(d2).epsilon(1e-6));
  CHECK(p.d1 > p.t2);

  // value and derivative continuity at d1
  const double a = std::sqrt(p.t1) / (p.t2 - p.R);
  const double mid = p.t1 - (a * (p.d1 - p.t2)) * (a * (p.d1 - p.t2));
  const double tail = 1.0 + 1.0 / ((p.t3 * (p.d1 - p.d2)) * (p.t3 * (p.d1 - p.d2)));
  CHECK(std::abs(mid - tail) < 1e-8);
  const double mid_d = -2.0 * a * a * (p.d1 - p.t2);
  const double tail_d = -2.0 / (p.t3 * p.t3 * std::pow(p.d1 - p.d2, 3.0));
  CHECK(std::abs(mid_d - tail_d) < 1e-6);

  InteractionParams bad;
  bad.t1 = 0.9;  // no interaction peak above 1
  CHECK_THROWS_AS(solve_breakpoints(bad), ParamInfeasible);
}

TEST_CASE("phi piecewise values") {
  InteractionParams p;
  p.t1 = 1.5;
  p.t2 = 10.0;
  p.t3 = 0.2;
  p.R = 2.0;
  solve_breakpoints(p);
  CHECK(phi(p.R / 2, p) == 0.0);
  CHECK(phi(p.t2, p) == doctest::Approx(p.t1));
  CHECK(phi(p.d2 + 1e6, p) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(phi(p.d1 - 1e-9, p) == doctest::Approx(phi(p.d1 + 1e-9, p)).epsilon(1e-6));
  for (double d = 0.0; d < 40.0; d += 0.01) CHECK(phi(d, p) >= 0.0);
}

TEST_CASE("log_unnorm_pp oracle and invariances") {
  InteractionParams p;
  p.lambda = 2.0;
  p.t1 = 1.5;
  p.t2 = 1.0;
  p.t3 = 1.0;
  p.R = 0.2;
  p.cap = 1.2;
  solve_breakpoints(p);

  PointPattern empty;
  CHECK(log_unnorm_pp(empty, p) == doctest::Approx(0.0 * std::log(p.lambda)));

  PointPattern hard;
  hard.win = Window{0, 0, 10, 10};
  hard.add(1.0, 1.0);
  hard.add(1.0, 1.1);  // distance 0.1 < R
  CHECK(log_unnorm_pp(hard, p) == kNegInf);

  PointPattern x;
  x.win = Window{0, 0, 10, 10};
  x.add(1.0, 1.0);
  x.add(2.0, 1.0);
  x.add(1.5, 1.8);
  // independent double loop with the cap
  double expect = 3.0 * std::log(p.lambda);
  for (int i = 0; i < 3; ++i) {
    double s = 0;
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double dx = x.xs[i] - x.xs[j], dy = x.ys[i] - x.ys[j];
      s += std::log(phi(std::sqrt(dx * dx + dy * dy), p));
    }
    expect += std::min(s, 1.2);
  }
  CHECK(log_unnorm_pp(x, p) == doctest::Approx(expect).epsilon(1e-12));

  PointPattern perm = x;
  std::swap(perm.xs[0], perm.xs[2]);
  std::swap(perm.ys[0], perm.ys[2]);
  CHECK(log_unnorm_pp(perm, p) == doctest::Approx(log_unnorm_pp(x, p)));
}

TEST_CASE("bdmcmc with unit interaction matches the Poisson count law") {
  InteractionParams p;
  p.lambda = 2.5;
  p.unit_phi = true;
  PointPattern x;
  x.win = Window{0, 0, 1, 2};  // lambda|W| = 5
  Rng rng = substream(31, "pois", 0);
  for (int warm = 0; warm < 2000; ++warm) bdmcmc_proposals(x, p, 5, rng);
  std::vector<double> counts;
  counts.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    bdmcmc_proposals(x, p, 25, rng);
    counts.push_back(static_cast<double>(x.size()));
  }
  double mean = 0;
  for (double c : counts) mean += c;
  mean /= counts.size();
  const double se = batch_se(counts);
  CHECK(std::abs(mean - 5.0) < 3.0 * se + 1e-9);
}

TEST_CASE("death acceptance from a one-point pattern matches the hand formula") {
  InteractionParams p;
  p.lambda = 2.0;
  p.unit_phi = true;
  const Window win{0, 0, 1, 1};  // lambda * area = 2 -> death accept prob 1/2
  Rng rng = substream(32, "death", 0);
  int deaths = 0;
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) {
    PointPattern x;
    x.win = win;
    x.add(0.5, 0.5);
    bdmcmc_proposals(x, p, 1, rng);
    if (x.size() == 0) ++deaths;
  }
  // one proposal: death chosen w.p. 1/2, then accepted w.p. min{1, 1/(lambda*area)}
  const double expect = 0.5 * std::min(1.0, 1.0 / (p.lambda * win.area()));
  CHECK(deaths / static_cast<double>(reps) == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("bdmcmc stationary law matches exact enumeration on a two-point-max instance") {
  // Window so small that three points can never be pairwise >= R apart:
  // the exact stationary count law has support {0, 1, 2} and the n=2 weight
  // is a deterministic quadrature over the displacement distribution.
  InteractionParams p;
  p.lambda = 3.0;
  p.t1 = 1.34;
  p.t2 = 1.2;
  p.t3 = 0.5;
  p.R = 1.0;
  p.cap = 1.2;
  solve_breakpoints(p);
  const double side = 0.9;
  const Window win{0, 0, side, side};

  // I2 = integral over W^2 of exp(2 min{log phi(d), cap}) with the hard core.
  const int g = 600;
  const double h = 2.0 * side / g;
  double i2 = 0.0;
  for (int ix = 0; ix < g; ++ix)
    for (int iy = 0; iy < g; ++iy) {
      const double dx = -side + (ix + 0.5) * h, dy = -side + (iy + 0.5) * h;
      const double w = (side - std::abs(dx)) * (side - std::abs(dy));
      const double f = phi(std::sqrt(dx * dx + dy * dy), p);
      if (f > 0.0) i2 += w * std::exp(2.0 * std::min(std::log(f), p.cap)) * h * h;
    }
  const double w0 = 1.0, w1 = p.lambda * win.area(), w2 = 0.5 * p.lambda * p.lambda * i2;
  const double z = w0 + w1 + w2;

  Rng rng = substream(33, "tv", 0);
  PointPattern x;
  x.win = win;
  std::vector<double> freq(3, 0.0);
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    bdmcmc_proposals(x, p, 1, rng);
    REQUIRE(x.size() <= 2);
    freq[x.size()] += 1.0;
  }
  const double tv = 0.5 * (std::abs(freq[0] / steps - w0 / z) + std::abs(freq[1] / steps - w1 / z) +
                           std::abs(freq[2] / steps - w2 / z));
  CHECK(tv < 0.02);
}

TEST_CASE("subsample_window partitions and counts") {
  Rng rng = substream(34, "subw", 0);
  PointPattern x;
  x.win = Window{0, 0, 1, 1};
  for (int i = 0; i < 400; ++i) x.add(uniform01(rng), uniform01(rng));

  const PointPattern same = subsample_window(x, 1, rng);
  CHECK(same.size() == x.size());

  double total = 0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    const PointPattern sub = subsample_window(x, 4, rng);
    CHECK(sub.win.area() == doctest::Approx(0.25));
    for (std::size_t i = 0; i < sub.size(); ++i)
      CHECK(sub.win.contains(sub.xs[i], sub.ys[i]));
    total += static_cast<double>(sub.size());
  }
  // mean returned count = n/K within 3 SE (hypergeometric-ish, bound by binomial)
  const double se = std::sqrt(400 * 0.25 * 0.75 / reps);
  CHECK(std::abs(total / reps - 100.0) < 3.0 * se);
}

TEST_CASE("model wrapper handles infeasible parameters") {
  PointProcessModel model;
  model.win = Window{0, 0, 10, 10};
  model.R = 0.2;
  PointPattern x;
  x.win = model.win;
  x.add(1, 1);
  Vec theta(4);
  theta << 2.0, 0.9, 1.0, 1.0;  // t1 < 1: infeasible
  CHECK(model.log_unnorm(x, theta) == kNegInf);
  theta << 2.0, 1.5, 1.0, 1.0;
  CHECK(std::isfinite(model.log_unnorm(x, theta)));
}
