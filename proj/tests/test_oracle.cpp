#include <catch2/catch_amalgamated.hpp>

#include "ampg/constants.hpp"
#include "ampg/generators.hpp"
#include "ampg/oracle.hpp"
#include "ampg/sampling.hpp"
#include "helpers.hpp"

using namespace ampg;
using Catch::Matchers::WithinAbs;

TEST_CASE("stationary distribution") {
  SECTION("manual chain solves to (0.75, 0.25)") {
    Mat p(2, 2);
    p << 0.9, 0.1, 0.3, 0.7;
    const Vec nu = stationary_distribution(p);
    REQUIRE_THAT(nu[0], WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(nu[1], WithinAbs(0.25, 1e-12));
  }
  SECTION("doubly stochastic chain is uniform") {
    Mat p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    const Vec nu = stationary_distribution(p);
    REQUIRE_THAT(nu[0], WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(nu[1], WithinAbs(0.5, 1e-12));
  }
  SECTION("random ergodic chain matches the power-iteration oracle") {
    Philox rng(404, 0);
    Mat p(4, 4);
    for (int s = 0; s < 4; ++s) {
      for (int t = 0; t < 4; ++t) p(s, t) = rng.next_double();
      p.row(s) /= p.row(s).sum();
    }
    Eigen::RowVectorXd dist = Eigen::RowVectorXd::Constant(4, 0.25);
    for (int step = 0; step < 1000000; ++step) dist = dist * p;
    const Vec nu = stationary_distribution(p);
    REQUIRE((nu.transpose() - dist).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("two closed classes raise ErgodicityError") {
    Mat p = Mat::Identity(3, 3);
    REQUIRE_THROWS_AS(stationary_distribution(p), ErgodicityError);
  }
  SECTION("vanishing stationary mass raises ErgodicityError") {
    // state 2 is transient: all mass drains into the {0,1} block
    Mat p(3, 3);
    p << 0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.5, 0.5, 0.0;
    REQUIRE_THROWS_AS(stationary_distribution(p), ErgodicityError);
  }
}

TEST_CASE("average reward") {
  SECTION("constant reward") {
    const MarkovGame g = test::small_random_game(3, {2, 2}, 2);
    Mat c = Mat::Constant(3, 4, 0.42);
    MarkovGame cg(3, {2, 2}, g.transition(), {c, c});
    REQUIRE_THAT(average_reward(cg, JointPolicy::uniform(cg), 0), WithinAbs(0.42, 1e-12));
  }
  SECTION("point state rewards dot the stationary distribution") {
    Mat chain(2, 2);
    chain << 0.9, 0.1, 0.3, 0.7;
    Mat reward(2, 1);
    reward << 1.0, 0.0;
    const MarkovGame g = test::chain_game(chain, reward);
    REQUIRE_THAT(average_reward(g, JointPolicy::uniform(g), 0), WithinAbs(0.75, 1e-12));
  }
  SECTION("manual game at uniform, cross-checked by simulation") {
    const MarkovGame g = manual_fixture();
    const JointPolicy uni = JointPolicy::uniform(g);
    const double rho = average_reward(g, uni, 0);
    REQUIRE_THAT(rho, WithinAbs(0.53125, 1e-12));
    REQUIRE_THAT(average_reward(g, uni, 1), WithinAbs(0.53125, 1e-12));
    const Trajectory traj = simulate(g, uni, 10000000, /*seed=*/1234);
    double mean = 0.0;
    for (long t = 0; t < traj.length(); ++t) mean += traj.reward(t, 0);
    mean /= traj.length();
    REQUIRE_THAT(mean, WithinAbs(rho, 3e-3));
  }
}

TEST_CASE("differential values") {
  SECTION("constant reward has zero bias and zero Q") {
    const MarkovGame g = test::small_random_game(3, {2, 2}, 6);
    Mat c = Mat::Constant(3, 4, 0.5);
    MarkovGame cg(3, {2, 2}, g.transition(), {c, c});
    const DifferentialValues dv = differential_values(cg, JointPolicy::uniform(cg), 0);
    REQUIRE(dv.v.cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(dv.q.cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("hand-solved two-state chain") {
    Mat chain(2, 2);
    chain << 0.9, 0.1, 0.3, 0.7;
    Mat reward(2, 1);
    reward << 1.0, 0.0;
    const MarkovGame g = test::chain_game(chain, reward);
    const DifferentialValues dv = differential_values(g, JointPolicy::uniform(g), 0);
    REQUIRE_THAT(dv.v[0], WithinAbs(0.625, 1e-10));
    REQUIRE_THAT(dv.v[1], WithinAbs(-1.875, 1e-10));
  }
  SECTION("manual game at uniform") {
    const MarkovGame g = manual_fixture();
    const DifferentialValues dv = differential_values(g, JointPolicy::uniform(g), 0);
    REQUIRE_THAT(dv.v[0], WithinAbs(0.046875, 1e-10));
    REQUIRE_THAT(dv.v[1], WithinAbs(-0.140625, 1e-10));
  }
  SECTION("Poisson residual and normalization on random games") {
    Philox rng(52, 0);
    for (int trial = 0; trial < 10; ++trial) {
      const MarkovGame g = test::small_random_game(4, {2, 3}, 100 + trial);
      const JointPolicy pol = random_policy(g, rng);
      const OracleReport rep = compute_report(g, pol);
      const MarginalReward mr = marginal_reward(g, pol, 0);
      for (int i = 0; i < 2; ++i) {
        // V = r^pi - rho 1 + P_pi V
        const Vec residual = mr.state[i] - Vec::Constant(4, rep.rho[i]) +
                             rep.chain * rep.value[i] - rep.value[i];
        REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(std::abs(rep.nu.dot(rep.value[i])) < 1e-10);
      }
    }
  }
}

TEST_CASE("marginalized Q") {
  const MarkovGame g = manual_fixture();
  const JointPolicy uni = JointPolicy::uniform(g);
  SECTION("manual value") {
    const MarginalQ mq = marginal_q(g, uni, 0, 0);
    REQUIRE_THAT(mq.qbar(0, 0), WithinAbs(0.396875, 1e-10));
    REQUIRE_THAT(mq.qbar(0, 1), WithinAbs(-0.303125, 1e-10));
  }
  SECTION("single-agent marginal equals the joint Q") {
    Mat chain(2, 2);
    chain << 0.6, 0.4, 0.2, 0.8;
    Mat reward(2, 2);
    reward << 0.1, 0.5, 0.3, 0.2;
    const MarkovGame sg = test::chain_game(chain, reward);
    const JointPolicy pol = JointPolicy::uniform(sg);
    const OracleReport rep = compute_report(sg, pol);
    const MarginalQ mq = marginal_q_from_report(sg, pol, rep, 0, 0);
    REQUIRE((mq.qbar - rep.q[0]).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("policy-weighted Qbar recovers V and Abar is centered") {
    Philox rng(61, 0);
    for (int trial = 0; trial < 8; ++trial) {
      const MarkovGame rg = test::small_random_game(4, {3, 2}, 300 + trial);
      const JointPolicy pol = random_policy(rg, rng);
      const OracleReport rep = compute_report(rg, pol);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const MarginalQ mq = marginal_q_from_report(rg, pol, rep, j, i);
          for (int s = 0; s < 4; ++s) {
            const double recovered = mq.qbar.row(s).dot(pol.agent(j).row(s));
            REQUIRE_THAT(recovered, WithinAbs(rep.value[i][s], 1e-10));
            REQUIRE_THAT(mq.abar.row(s).dot(pol.agent(j).row(s)), WithinAbs(0.0, 1e-10));
          }
        }
    }
  }
}

TEST_CASE("policy gradient") {
  SECTION("constant reward has zero gradient") {
    const MarkovGame g = test::small_random_game(3, {2, 2}, 8);
    Mat c = Mat::Constant(3, 4, 0.5);
    MarkovGame cg(3, {2, 2}, g.transition(), {c, c});
    REQUIRE(policy_gradient(cg, JointPolicy::uniform(cg), 0, 0).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("manual value") {
    const MarkovGame g = manual_fixture();
    const Mat grad = policy_gradient(g, JointPolicy::uniform(g), 0, 0);
    REQUIRE_THAT(grad(0, 0), WithinAbs(0.29765625, 1e-10));
  }
  SECTION("finite-difference agreement on a random game") {
    const MarkovGame g = test::small_random_game(3, {2, 2}, 777);
    Philox rng(88, 0);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
      JointPolicy base = random_policy(g, rng);
      for (int i = 0; i < 2; ++i)
        base.agent(i) = 0.9 * base.agent(i) + 0.1 * Mat::Constant(3, 2, 0.5);
      const int j = trial % 2;
      const int i = (trial / 2) % 2;
      Mat u(3, 2);
      for (int s = 0; s < 3; ++s) {
        const double x = rng.next_double() - 0.5;
        u(s, 0) = x;
        u(s, 1) = -x;
      }
      u /= u.norm();
      JointPolicy plus = base, minus = base;
      plus.agent(j) += h * u;
      minus.agent(j) -= h * u;
      const double fd = (average_reward(g, plus, i) - average_reward(g, minus, i)) / (2 * h);
      const Mat grad = policy_gradient(g, base, j, i);
      REQUIRE_THAT(fd, WithinAbs(grad.cwiseProduct(u).sum(), 1e-6));
    }
  }
}

TEST_CASE("best response") {
  SECTION("manual game, agent 0 against uniform") {
    const MarkovGame g = manual_fixture();
    const BestResponse br = best_response(g, JointPolicy::uniform(g), 0);
    REQUIRE(br.policy(0, 0) == 1.0);  // state 1: action 1
    REQUIRE(br.policy(1, 1) == 1.0);  // state 2: action 2
    REQUIRE_THAT(br.rho, WithinAbs(0.875, 1e-10));
  }
  SECTION("reward ignoring the agent's action makes any policy optimal") {
    Mat chain(2, 2);
    chain << 0.9, 0.1, 0.3, 0.7;
    Mat reward(2, 2);
    reward << 0.8, 0.8, 0.1, 0.1;  // same value per state for both actions
    const MarkovGame g = test::chain_game(chain, reward);
    const JointPolicy uni = JointPolicy::uniform(g);
    const BestResponse br = best_response(g, uni, 0);
    REQUIRE_THAT(br.rho, WithinAbs(average_reward(g, uni, 0), 1e-10));
  }
  SECTION("matches exhaustive deterministic enumeration") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const MarkovGame g = test::small_random_game(3, {2, 2}, seed);
      Philox rng(seed, 1);
      const JointPolicy pol = random_policy(g, rng);
      const BestResponse br = best_response(g, pol, 0);
      double brute = -1.0;
      for (int c0 = 0; c0 < 2; ++c0)
        for (int c1 = 0; c1 < 2; ++c1)
          for (int c2 = 0; c2 < 2; ++c2) {
            JointPolicy dev = pol;
            Mat pi = Mat::Zero(3, 2);
            pi(0, c0) = pi(1, c1) = pi(2, c2) = 1.0;
            dev.agent(0) = pi;
            brute = std::max(brute, average_reward(g, dev, 0));
          }
      REQUIRE_THAT(br.rho, WithinAbs(brute, 1e-9));
    }
  }
}

TEST_CASE("nash gap") {
  SECTION("manual game at uniform") {
    const MarkovGame g = manual_fixture();
    const NashGap gap = nash_gap(g, JointPolicy::uniform(g));
    REQUIRE_THAT(gap.gap, WithinAbs(0.34375, 1e-10));
    REQUIRE_THAT(gap.per_agent[0], WithinAbs(0.34375, 1e-10));
    REQUIRE_THAT(gap.per_agent[1], WithinAbs(0.06875, 1e-10));
  }
  SECTION("best-response-stable policy has gap at the solver floor") {
    const MarkovGame g = manual_fixture();
    JointPolicy pol = JointPolicy::uniform(g);
    // alternate best responses to a fixed point
    for (int round = 0; round < 6; ++round)
      for (int i = 0; i < 2; ++i) pol.agent(i) = best_response(g, pol, i).policy;
    REQUIRE(nash_gap(g, pol).gap <= 1e-10);
  }
  SECTION("single-agent optimum has zero gap") {
    Mat chain(2, 2);
    chain << 0.9, 0.1, 0.3, 0.7;
    Mat reward(2, 2);
    reward << 0.9, 0.2, 0.1, 0.8;
    const MarkovGame g = test::chain_game(chain, reward);
    JointPolicy pol = JointPolicy::uniform(g);
    pol.agent(0) = best_response(g, pol, 0).policy;
    REQUIRE(nash_gap(g, pol).gap <= 1e-10);
  }
}

TEST_CASE("potential value") {
  SECTION("cooperative game potential is the common gain") {
    const MarkovGame g = manual_fixture();
    const JointPolicy uni = JointPolicy::uniform(g);
    REQUIRE_THAT(potential_value(g, uni), WithinAbs(0.53125, 1e-12));
    Philox rng(3, 0);
    for (int k = 0; k < 5; ++k) {
      const JointPolicy pol = random_policy(g, rng);
      REQUIRE_THAT(potential_value(g, pol), WithinAbs(average_reward(g, pol, 0), 1e-12));
    }
  }
  SECTION("stored-potential game satisfies the deviation identity") {
    GeneratorSpec spec;
    spec.num_states = 3;
    spec.action_counts = {2, 2};
    spec.seed = 9;
    const MarkovGame g = make_potential_game(spec, 1);
    Philox rng(14, 0);
    for (int probe = 0; probe < 100; ++probe) {
      JointPolicy a = random_policy(g, rng);
      const int i = probe % 2;
      JointPolicy b = a;
      b.agent(i) = random_policy(g, rng).agent(i);
      const double lhs = potential_value(g, a) - potential_value(g, b);
      const double rhs = average_reward(g, a, i) - average_reward(g, b, i);
      REQUIRE_THAT(lhs, WithinAbs(rhs, 1e-9));
    }
  }
  SECTION("general game throws") {
    const MarkovGame g = test::small_random_game(3, {2, 2}, 5);
    Mat r2 = g.reward(0);
    r2(0, 0) = 0.123;
    MarkovGame general(3, {2, 2}, g.transition(), {g.reward(0), r2}, StructureTag{});
    REQUIRE_THROWS_AS(potential_value(general, JointPolicy::uniform(general)),
                      UnsupportedStructureError);
  }
}

TEST_CASE("exploration factor") {
  const MarkovGame g = manual_fixture();
  SECTION("uniform policy with unique greedy actions") {
    REQUIRE_THAT(exploration_factor(g, JointPolicy::uniform(g)), WithinAbs(0.5, 1e-12));
  }
  SECTION("greedy deterministic policy reaches 1") {
    JointPolicy pol = JointPolicy::uniform(g);
    for (int round = 0; round < 6; ++round)
      for (int i = 0; i < 2; ++i) pol.agent(i) = best_response(g, pol, i).policy;
    REQUIRE_THAT(exploration_factor(g, pol), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("second directional differences stay below the smoothness constant") {
  const MarkovGame g = manual_fixture();
  const GameConstants c = estimate_constants(g);
  REQUIRE(c.smooth_rho.provenance == Provenance::exact);
  Philox rng(5150, 0);
  const double h = 1e-4;
  for (int probe = 0; probe < 20; ++probe) {
    JointPolicy base = random_policy(g, rng);
    for (int i = 0; i < 2; ++i)
      base.agent(i) = 0.9 * base.agent(i) + 0.1 * Mat::Constant(2, 2, 0.5);
    const int i = probe % 2;
    Mat u(2, 2);
    for (int s = 0; s < 2; ++s) {
      const double x = rng.next_double() - 0.5;
      u(s, 0) = x;
      u(s, 1) = -x;
    }
    u /= u.norm();
    JointPolicy plus = base, minus = base;
    plus.agent(i) += h * u;
    minus.agent(i) -= h * u;
    const double second = (average_reward(g, plus, i) - 2.0 * average_reward(g, base, i) +
                           average_reward(g, minus, i)) /
                          (h * h);
    REQUIRE(std::abs(second) <= c.smooth_rho.value + 1e-3);
  }
}
