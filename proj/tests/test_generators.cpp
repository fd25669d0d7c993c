#include <catch2/catch_amalgamated.hpp>

#include "ampg/generators.hpp"
#include "ampg/oracle.hpp"
#include "helpers.hpp"

using namespace ampg;
using Catch::Matchers::WithinAbs;

TEST_CASE("generation is seed-deterministic") {
  GeneratorSpec spec;
  spec.num_states = 5;
  spec.action_counts = {2, 3};
  spec.seed = 11;
  const MarkovGame a = generate(spec);
  const MarkovGame b = generate(spec);
  REQUIRE(a.transition() == b.transition());
  REQUIRE(a.reward(0) == b.reward(0));
  spec.seed = 12;
  const MarkovGame c = generate(spec);
  REQUIRE(a.transition() != c.transition());
}

TEST_CASE("experiment-scale shapes generate and validate") {
  GeneratorSpec spec;
  spec.num_states = 100;
  spec.action_counts = {4, 3, 2};
  spec.lvr = LvrMode::medium;
  spec.seed = 5;
  const MarkovGame g = generate(spec);
  REQUIRE(g.num_states() == 100);
  REQUIRE(g.num_agents() == 3);
  REQUIRE(g.num_joint_actions() == 24);
  REQUIRE(validate_game(g).empty());
  REQUIRE(g.structure().cooperative);
}

TEST_CASE("small lvr suppresses the least-visited state") {
  int smaller = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorSpec spec;
    spec.num_states = 6;
    spec.action_counts = {2, 2};
    spec.seed = seed;
    spec.lvr = LvrMode::small;
    const MarkovGame low = generate(spec);
    spec.lvr = LvrMode::large;
    const MarkovGame high = generate(spec);
    const JointPolicy uni = JointPolicy::uniform(low);
    const double min_low =
        stationary_distribution(induced_state_chain(low, uni).state).minCoeff();
    const double min_high =
        stationary_distribution(induced_state_chain(high, uni).state).minCoeff();
    if (min_low < min_high) ++smaller;
  }
  REQUIRE(smaller >= 9);
}

TEST_CASE("near-tie rewards place the runner-up exactly 0.001 below the top") {
  GeneratorSpec spec;
  spec.num_states = 8;
  spec.action_counts = {2, 3};
  spec.reward_gap = RewardGapMode::small_near_tie;
  spec.seed = 21;
  const MarkovGame g = generate(spec);
  for (int s = 0; s < 8; ++s) {
    std::vector<double> row(g.num_joint_actions());
    for (int j = 0; j < g.num_joint_actions(); ++j) row[j] = g.reward(0)(s, j);
    std::sort(row.begin(), row.end(), std::greater<double>());
    REQUIRE_THAT(row[0] - row[1], WithinAbs(0.001, 1e-15));
  }
}

TEST_CASE("large reward gap separates the optimum") {
  GeneratorSpec spec;
  spec.num_states = 6;
  spec.action_counts = {2, 2};
  spec.reward_gap = RewardGapMode::large;
  spec.seed = 2;
  const MarkovGame g = generate(spec);
  for (int s = 0; s < 6; ++s) {
    const double top = g.reward(0).row(s).maxCoeff();
    REQUIRE(top >= 0.4);
    int above = 0;
    for (int j = 0; j < 4; ++j)
      if (g.reward(0)(s, j) > 0.6) ++above;
    REQUIRE(above <= 1);
  }
}

TEST_CASE("manual fixture matches its defining tensors") {
  const MarkovGame g = manual_fixture();
  REQUIRE(validate_game(g).empty());
  REQUIRE_THAT(average_reward(g, JointPolicy::uniform(g), 0), WithinAbs(0.53125, 1e-12));
  REQUIRE_THAT(nash_gap(g, JointPolicy::uniform(g)).gap, WithinAbs(0.34375, 1e-10));
  REQUIRE(g.reward(0) == g.reward(1));
  REQUIRE_THAT(g.transition_row(0, 2)[0], WithinAbs(0.9, 1e-15));
}

TEST_CASE("condition-1 potential games satisfy the deviation identity") {
  GeneratorSpec spec;
  spec.num_states = 4;
  spec.action_counts = {2, 2, 2};
  spec.seed = 31;
  const MarkovGame g = make_potential_game(spec, 1);
  REQUIRE(validate_game(g).empty());
  REQUIRE(g.structure().action_independent);
  REQUIRE(g.structure().state_potential);
  REQUIRE(g.potential().has_value());
  Philox rng(77, 0);
  for (int probe = 0; probe < 100; ++probe) {
    JointPolicy a = random_policy(g, rng);
    const int i = probe % 3;
    JointPolicy b = a;
    b.agent(i) = random_policy(g, rng).agent(i);
    const double dphi = potential_value(g, a) - potential_value(g, b);
    const double drho = average_reward(g, a, i) - average_reward(g, b, i);
    REQUIRE_THAT(dphi, WithinAbs(drho, 1e-9));
  }
}

TEST_CASE("condition-2 cooperative special case matches the plain generator") {
  GeneratorSpec spec;
  spec.num_states = 4;
  spec.action_counts = {2, 2};
  spec.seed = 51;
  const MarkovGame via_condition = make_potential_game(spec, 2);
  spec.structure = StructureKind::cooperative;
  const MarkovGame direct = generate(spec);
  REQUIRE(via_condition.transition() == direct.transition());
  REQUIRE(via_condition.reward(0) == direct.reward(0));
  REQUIRE(via_condition.reward(1) == via_condition.reward(0));
}

TEST_CASE("single-agent condition-1 potential equals the gain") {
  GeneratorSpec spec;
  spec.num_states = 3;
  spec.action_counts = {3};
  spec.seed = 61;
  const MarkovGame g = make_potential_game(spec, 1);
  Philox rng(8, 0);
  for (int k = 0; k < 20; ++k) {
    const JointPolicy pol = random_policy(g, rng);
    REQUIRE_THAT(potential_value(g, pol), WithinAbs(average_reward(g, pol, 0), 1e-12));
  }
}

TEST_CASE("generated games are ergodic under the uniform policy") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GeneratorSpec spec;
    spec.num_states = 5;
    spec.action_counts = {2, 2};
    spec.seed = seed;
    spec.lvr = LvrMode::small;
    const MarkovGame g = generate(spec);
    REQUIRE_NOTHROW(stationary_distribution(induced_state_chain(g, JointPolicy::uniform(g)).state));
  }
}

TEST_CASE("impossible specs are rejected") {
  GeneratorSpec spec;
  spec.num_states = 0;
  REQUIRE_THROWS_AS(generate(spec), InfeasibleSpecError);
  spec.num_states = 2;
  spec.action_counts = {};
  REQUIRE_THROWS_AS(generate(spec), InfeasibleSpecError);
  spec.action_counts = {2, 0};
  REQUIRE_THROWS_AS(generate(spec), InfeasibleSpecError);
  spec.action_counts = {2, 2};
  spec.rare_fraction = 1.5;
  REQUIRE_THROWS_AS(generate(spec), InfeasibleSpecError);
  spec.rare_fraction = 0.5;
  REQUIRE_THROWS_AS(make_potential_game(spec, 3), InfeasibleSpecError);
}

TEST_CASE("structure kind action_independent produces a policy-free chain") {
  GeneratorSpec spec;
  spec.num_states = 4;
  spec.action_counts = {2, 2};
  spec.structure = StructureKind::action_independent;
  spec.seed = 71;
  const MarkovGame g = generate(spec);
  REQUIRE(g.structure().action_independent);
  REQUIRE(g.structure().cooperative);
  for (int s = 0; s < 4; ++s)
    for (int j = 1; j < 4; ++j)
      REQUIRE((g.transition_row(s, j) - g.transition_row(s, 0)).cwiseAbs().maxCoeff() == 0.0);
}
