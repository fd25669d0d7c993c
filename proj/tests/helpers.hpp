#pragma once

#include <vector>

#include "ampg/game.hpp"
#include "ampg/generators.hpp"

namespace ampg::test {

/// Single-agent chain game: one action per... caller picks action count; the
/// transition is shared across actions unless overridden.
inline MarkovGame chain_game(const Mat& chain, const Mat& reward_per_action,
                             StructureTag tag = {}) {
  const int S = static_cast<int>(chain.rows());
  const int A = static_cast<int>(reward_per_action.cols());
  Mat transition(S * A, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) transition.row(s * A + a) = chain.row(s);
  tag.action_independent = true;
  return MarkovGame(S, {A}, std::move(transition), {reward_per_action}, tag);
}

/// Small random cooperative game for brute-force cross-checks.
inline MarkovGame small_random_game(int S, std::vector<int> actions, std::uint64_t seed,
                                    LvrMode lvr = LvrMode::large) {
  GeneratorSpec spec;
  spec.num_states = S;
  spec.action_counts = std::move(actions);
  spec.lvr = lvr;
  spec.seed = seed;
  return generate(spec);
}

inline JointPolicy deterministic_policy(const MarkovGame& game,
                                        const std::vector<std::vector<int>>& choice) {
  std::vector<Mat> rows;
  for (int i = 0; i < game.num_agents(); ++i) {
    Mat pi = Mat::Zero(game.num_states(), game.action_count(i));
    for (int s = 0; s < game.num_states(); ++s) pi(s, choice[i][s]) = 1.0;
    rows.push_back(std::move(pi));
  }
  return JointPolicy(std::move(rows));
}

}  // namespace ampg::test
