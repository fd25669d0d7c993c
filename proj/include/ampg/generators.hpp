#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ampg/game.hpp"
#include "ampg/oracle.hpp"
#include "ampg/rng.hpp"

namespace ampg {

/// Visitation-control mode: range of the redraw for the incoming
/// probabilities of the rarely-visited states.
enum class LvrMode { small, medium, large };  // Unif[0,0.01] / Unif[0,0.1] / Unif[0,1]

/// Reward-gap mode: plain uniform entries, a forced near-tie between the two
/// best joint actions of every state, or a well-separated random optimum.
enum class RewardGapMode { small_uniform, small_near_tie, large };

enum class StructureKind { cooperative, action_independent, state_potential };

struct GeneratorSpec {
  int num_states = 4;
  std::vector<int> action_counts = {2, 2};
  LvrMode lvr = LvrMode::large;
  RewardGapMode reward_gap = RewardGapMode::small_uniform;
  double rare_fraction = 0.5;  // fraction of states whose visitation is suppressed
  StructureKind structure = StructureKind::cooperative;
  std::uint64_t seed = 0;
};

namespace detail {

inline double lvr_scale(LvrMode mode) {
  switch (mode) {
    case LvrMode::small: return 0.01;
    case LvrMode::medium: return 0.1;
    case LvrMode::large: return 1.0;
  }
  return 1.0;
}

/// floor(S * fraction) states chosen without replacement, by partial
/// Fisher-Yates on the seeded stream.
inline std::vector<int> choose_rare_states(int S, double fraction, Philox& rng) {
  const int count = static_cast<int>(std::floor(S * fraction));
  std::vector<int> idx(S);
  for (int i = 0; i < S; ++i) idx[i] = i;
  for (int k = 0; k < count; ++k) std::swap(idx[k], idx[k + rng.sample_uniform(S - k)]);
  idx.resize(count);
  return idx;
}

/// Unif[0,1] fill, column redraw for the chosen states, then row
/// normalization, on a (rows x S) block.
inline Mat random_transition_block(int rows, int S, LvrMode lvr, double fraction, Philox& rng) {
  Mat P(rows, S);
  for (int r = 0; r < rows; ++r)
    for (int s2 = 0; s2 < S; ++s2) P(r, s2) = rng.next_double();
  const double scale = lvr_scale(lvr);
  for (int s2 : choose_rare_states(S, fraction, rng))
    for (int r = 0; r < rows; ++r) P(r, s2) = scale * rng.next_double();
  for (int r = 0; r < rows; ++r) {
    const double sum = P.row(r).sum();
    if (sum <= 0.0) throw GenerationError("generate: degenerate transition row");
    P.row(r) /= sum;
  }
  return P;
}

inline Mat random_reward(int S, int J, RewardGapMode mode, Philox& rng) {
  Mat R(S, J);
  for (int s = 0; s < S; ++s) {
    for (;;) {
      if (mode == RewardGapMode::large) {
        const int best = rng.sample_uniform(J);
        for (int j = 0; j < J; ++j) R(s, j) = 0.6 * rng.next_double();
        R(s, best) = 0.4 + 0.6 * rng.next_double();
        break;
      }
      for (int j = 0; j < J; ++j) R(s, j) = rng.next_double();
      if (mode == RewardGapMode::small_uniform || J < 2) break;
      int best = 0, second = -1;
      for (int j = 1; j < J; ++j)
        if (R(s, j) > R(s, best)) best = j;
      for (int j = 0; j < J; ++j)
        if (j != best && (second < 0 || R(s, j) > R(s, second))) second = j;
      if (R(s, best) >= 0.001) {
        R(s, second) = R(s, best) - 0.001;
        break;
      }
      // all entries below the tie offset: redraw the state's row
    }
  }
  return R;
}

inline void check_spec(const GeneratorSpec& spec) {
  if (spec.num_states < 1) throw InfeasibleSpecError("generator spec: num_states must be >= 1");
  if (spec.action_counts.empty())
    throw InfeasibleSpecError("generator spec: at least one agent required");
  for (int a : spec.action_counts)
    if (a < 1) throw InfeasibleSpecError("generator spec: action counts must be >= 1");
  if (spec.rare_fraction < 0.0 || spec.rare_fraction > 1.0)
    throw InfeasibleSpecError("generator spec: rare_fraction must lie in [0, 1]");
}

inline bool uniform_chain_ergodic(const MarkovGame& game) {
  try {
    stationary_distribution(induced_state_chain(game, JointPolicy::uniform(game)).state);
    return true;
  } catch (const ErgodicityError&) {
    return false;
  }
}

}  // namespace detail

MarkovGame make_potential_game(const GeneratorSpec& spec, int condition);

/// Random game per the spec's structure kind. Cooperative games use an
/// action-dependent transition tensor; the other kinds delegate to the
/// potential-game constructors. Ergodicity of the uniform-policy chain is
/// verified, with up to 10 seeded redraws.
inline MarkovGame generate(const GeneratorSpec& spec) {
  detail::check_spec(spec);
  if (spec.structure == StructureKind::state_potential) return make_potential_game(spec, 1);

  const int S = spec.num_states;
  int J = 1;
  for (int a : spec.action_counts) J *= a;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Philox rng(spec.seed, /*stream=*/0x67656e00u + attempt);
    Mat transition;
    StructureTag tag;
    tag.cooperative = true;
    if (spec.structure == StructureKind::action_independent) {
      const Mat block = detail::random_transition_block(S, S, spec.lvr, spec.rare_fraction, rng);
      transition.resize(S * J, S);
      for (int s = 0; s < S; ++s)
        for (int j = 0; j < J; ++j) transition.row(s * J + j) = block.row(s);
      tag.action_independent = true;
    } else {
      transition = detail::random_transition_block(S * J, S, spec.lvr, spec.rare_fraction, rng);
    }
    const Mat reward = detail::random_reward(S, J, spec.reward_gap, rng);
    std::vector<Mat> rewards(spec.action_counts.size(), reward);
    MarkovGame game(S, spec.action_counts, std::move(transition), std::move(rewards), tag);
    if (detail::uniform_chain_ergodic(game)) return game;
  }
  throw GenerationError("generate: no ergodic instance within 10 redraws");
}

/// The hand-built 2-state, 2x2-action cooperative game with an
/// action-independent chain. Used as the exactness fixture everywhere.
inline MarkovGame manual_fixture() {
  const int S = 2, J = 4;
  Mat chain(2, 2);
  chain << 0.9, 0.1, 0.3, 0.7;
  Mat transition(S * J, S);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) transition.row(s * J + j) = chain.row(s);
  // joint index = a1 * 2 + a2
  Mat reward(S, J);
  reward.row(0) << 1.0, 0.8, 0.2, 0.2;
  reward.row(1) << 0.2, 0.1, 1.0, 0.6;
  StructureTag tag;
  tag.cooperative = true;
  tag.action_independent = true;
  return MarkovGame(S, {2, 2}, std::move(transition), {reward, reward}, tag);
}

/// Structured potential games with a certified potential.
///
/// Condition 1: action-independent transitions; rewards phi(s,a) + u_i(s,a_{-i})
/// with both drawn Unif[0,1] and mapped into [0,1] by the shared affine map
/// x -> x/2; the stored potential is phi/2. A single agent gets u = 0 so the
/// potential coincides with its average reward.
///
/// Condition 2 (cooperative special case): u_i = 0 and a shared reward phi
/// over an action-dependent chain.
inline MarkovGame make_potential_game(const GeneratorSpec& spec, int condition) {
  detail::check_spec(spec);
  if (condition != 1 && condition != 2)
    throw InfeasibleSpecError("make_potential_game: condition must be 1 or 2");
  const int S = spec.num_states;
  const int N = static_cast<int>(spec.action_counts.size());
  int J = 1;
  for (int a : spec.action_counts) J *= a;

  if (condition == 2) {
    GeneratorSpec coop = spec;
    coop.structure = StructureKind::cooperative;
    return generate(coop);
  }

  for (int attempt = 0; attempt < 10; ++attempt) {
    Philox rng(spec.seed, /*stream=*/0x706f7400u + attempt);
    const Mat block = detail::random_transition_block(S, S, spec.lvr, spec.rare_fraction, rng);
    Mat transition(S * J, S);
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < J; ++j) transition.row(s * J + j) = block.row(s);

    const Mat phi = detail::random_reward(S, J, spec.reward_gap, rng);
    auto decode = [&](int j) {
      std::vector<int> a(N);
      for (int k = N - 1; k >= 0; --k) {
        a[k] = j % spec.action_counts[k];
        j /= spec.action_counts[k];
      }
      return a;
    };
    std::vector<Mat> rewards;
    rewards.reserve(N);
    for (int i = 0; i < N; ++i) {
      Mat r(S, J);
      if (N == 1) {
        r = phi / 2.0;
      } else {
        // u_i depends on the other agents' actions only
        const int Ai = spec.action_counts[i];
        Mat u(S, J / Ai);
        for (int s = 0; s < S; ++s)
          for (int rest = 0; rest < J / Ai; ++rest) u(s, rest) = rng.next_double();
        std::vector<int> rest_of(J);
        for (int j = 0; j < J; ++j) {
          const std::vector<int> acts = decode(j);
          int rest = 0;
          for (int k = 0; k < N; ++k)
            if (k != i) rest = rest * spec.action_counts[k] + acts[k];
          rest_of[j] = rest;
        }
        for (int s = 0; s < S; ++s)
          for (int j = 0; j < J; ++j) r(s, j) = (phi(s, j) + u(s, rest_of[j])) / 2.0;
      }
      rewards.push_back(std::move(r));
    }
    StructureTag tag;
    tag.action_independent = true;
    tag.state_potential = true;
    tag.cooperative = (N == 1);
    MarkovGame game(S, spec.action_counts, std::move(transition), std::move(rewards), tag,
                    Mat(phi / 2.0));
    if (detail::uniform_chain_ergodic(game)) return game;
  }
  throw GenerationError("make_potential_game: no ergodic instance within 10 redraws");
}

}  // namespace ampg
