#include <catch2/catch_amalgamated.hpp>

#include "ampg/rng.hpp"
#include "ampg/simplex.hpp"

using namespace ampg;
using Catch::Matchers::WithinAbs;

namespace {

// Dense grid search over the 2-action simplex slice {(x, 1-x), x in [lo, 1-lo]}.
Eigen::VectorXd grid_project_2(const Eigen::VectorXd& v, double lo) {
  double best_x = lo, best = 1e300;
  const int steps = 2000000;
  for (int k = 0; k <= steps; ++k) {
    const double x = lo + (1.0 - 2 * lo) * k / steps;
    const double d = (x - v[0]) * (x - v[0]) + (1.0 - x - v[1]) * (1.0 - x - v[1]);
    if (d < best) {
      best = d;
      best_x = x;
    }
  }
  Eigen::VectorXd p(2);
  p << best_x, 1.0 - best_x;
  return p;
}

// KKT reconstruction: a projection must have the form p_i = max(v_i - tau, lo)
// for a single tau, with sum(p) = 1.
double kkt_residual(const Eigen::VectorXd& v, const Eigen::VectorXd& p, double lo) {
  double tau = 0.0;
  int free_count = 0;
  for (int i = 0; i < v.size(); ++i)
    if (p[i] > lo + 1e-12) {
      tau += v[i] - p[i];
      ++free_count;
    }
  if (free_count == 0) return std::abs(p.sum() - 1.0);
  tau /= free_count;
  double res = std::abs(p.sum() - 1.0);
  for (int i = 0; i < v.size(); ++i)
    res = std::max(res, std::abs(p[i] - std::max(v[i] - tau, lo)));
  return res;
}

}  // namespace

TEST_CASE("projection leaves feasible points unchanged") {
  Eigen::VectorXd v(3);
  v << 0.2, 0.5, 0.3;
  REQUIRE((project_simplex(v) - v).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE((project_simplex(v, 0.1) - v).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("projection worked examples") {
  Eigen::VectorXd v(2);
  v << 1.0, 0.5;
  Eigen::VectorXd p = project_simplex(v);
  REQUIRE_THAT(p[0], WithinAbs(0.75, 1e-12));
  REQUIRE_THAT(p[1], WithinAbs(0.25, 1e-12));

  v << 2.0, -1.0;
  p = project_simplex(v);
  REQUIRE_THAT(p[0], WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(p[1], WithinAbs(0.0, 1e-12));
}

TEST_CASE("projection matches a dense grid search with floors") {
  Philox rng(99, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v(2);
    v << 4.0 * rng.next_double() - 2.0, 4.0 * rng.next_double() - 2.0;
    const double lo = trial % 2 == 0 ? 0.0 : 0.3 * rng.next_double();
    const Eigen::VectorXd p = project_simplex(v, lo);
    const Eigen::VectorXd g = grid_project_2(v, lo);
    REQUIRE((p - g).cwiseAbs().maxCoeff() < 2e-6);
  }
}

TEST_CASE("projection satisfies the KKT conditions") {
  Philox rng(123, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.sample_uniform(6);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 6.0 * rng.next_double() - 3.0;
    const double lo = (trial % 3 == 0) ? 0.0 : rng.next_double() / n;
    const Eigen::VectorXd p = project_simplex(v, lo);
    REQUIRE_THAT(p.sum(), WithinAbs(1.0, 1e-12));
    REQUIRE(p.minCoeff() >= lo - 1e-15);
    REQUIRE(kkt_residual(v, p, lo) < 1e-12);
  }
}

TEST_CASE("projection handles the degenerate full-floor simplex") {
  Eigen::VectorXd v(4);
  v << 3.0, -1.0, 0.4, 0.1;
  const Eigen::VectorXd p = project_simplex(v, 0.25);
  REQUIRE_THAT(p.sum(), WithinAbs(1.0, 1e-12));
  for (int i = 0; i < 4; ++i) REQUIRE_THAT(p[i], WithinAbs(0.25, 1e-12));
}

TEST_CASE("infeasible floor throws") {
  Eigen::VectorXd v(3);
  v << 0.5, 0.5, 0.5;
  REQUIRE_THROWS_AS(project_simplex(v, 0.4), InfeasibleError);
}
