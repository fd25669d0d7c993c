#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ampg/errors.hpp"

namespace ampg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Probability tolerance applied at construction time. Rows are never
/// renormalized silently; anything further off than this is a violation.
inline constexpr double kProbTolerance = 1e-12;

/// Structural facts a game is certified to satisfy by construction.
/// All flags clear means a general Markov game.
struct StructureTag {
  bool cooperative = false;          // all agents share one reward tensor
  bool action_independent = false;   // P(.|s,a) identical across joint actions
  bool state_potential = false;      // carries a static per-state potential

  bool general() const { return !cooperative && !action_independent && !state_potential; }
  bool operator==(const StructureTag&) const = default;
};

/// Tabular average-reward Markov game (S, {A_i}, P, {r_i}) with dense
/// tensors. Index order is (state, a_1, ..., a_N, next-state), joint actions
/// flattened row-major so a_1 is the most significant digit; iteration over
/// flat joint indices is the canonical lexicographic order.
///
/// Immutable after construction and safe to share across threads.
class MarkovGame {
 public:
  /// `transition`: (S*J) x S, row (s*J + a) is P(.|s,a).
  /// `rewards`: one S x J matrix per agent.
  /// `potential`: optional static per-state potential phi(s,a), S x J.
  MarkovGame(int num_states, std::vector<int> action_counts, Mat transition,
             std::vector<Mat> rewards, StructureTag tag = {}, std::optional<Mat> potential = {})
      : num_states_(num_states),
        action_counts_(std::move(action_counts)),
        transition_(std::move(transition)),
        rewards_(std::move(rewards)),
        tag_(tag),
        potential_(std::move(potential)) {
    if (num_states_ <= 0) throw Error("MarkovGame: num_states must be positive");
    if (rewards_.empty()) throw Error("MarkovGame: at least one agent required");
    if (rewards_.size() != action_counts_.size())
      throw Error("MarkovGame: one reward tensor per agent required");
    num_joint_ = 1;
    for (int a : action_counts_) {
      if (a <= 0) throw Error("MarkovGame: action counts must be positive");
      num_joint_ *= a;
    }
    if (transition_.rows() != static_cast<long>(num_states_) * num_joint_ ||
        transition_.cols() != num_states_)
      throw Error("MarkovGame: transition tensor has wrong shape");
    for (const Mat& r : rewards_)
      if (r.rows() != num_states_ || r.cols() != num_joint_)
        throw Error("MarkovGame: reward tensor has wrong shape");
    if (potential_ && (potential_->rows() != num_states_ || potential_->cols() != num_joint_))
      throw Error("MarkovGame: potential tensor has wrong shape");
  }

  int num_states() const { return num_states_; }
  int num_agents() const { return static_cast<int>(action_counts_.size()); }
  const std::vector<int>& action_counts() const { return action_counts_; }
  int action_count(int agent) const { return action_counts_[agent]; }
  int max_action_count() const {
    int m = 0;
    for (int a : action_counts_) m = std::max(m, a);
    return m;
  }
  int num_joint_actions() const { return num_joint_; }

  const Mat& transition() const { return transition_; }
  /// P(.|s,a) as a row view.
  auto transition_row(int s, int joint) const { return transition_.row(s * num_joint_ + joint); }
  const Mat& reward(int agent) const { return rewards_[agent]; }
  const std::vector<Mat>& rewards() const { return rewards_; }
  const StructureTag& structure() const { return tag_; }
  const std::optional<Mat>& potential() const { return potential_; }

  /// Flat joint index of (a_1, ..., a_N).
  int joint_index(const std::vector<int>& actions) const {
    int idx = 0;
    for (int i = 0; i < num_agents(); ++i) idx = idx * action_counts_[i] + actions[i];
    return idx;
  }

  /// Decode a flat joint index into per-agent actions.
  std::vector<int> joint_actions(int index) const {
    std::vector<int> a(num_agents());
    for (int i = num_agents() - 1; i >= 0; --i) {
      a[i] = index % action_counts_[i];
      index /= action_counts_[i];
    }
    return a;
  }

  /// Agent i's action inside a flat joint index.
  int agent_action(int joint, int agent) const {
    int div = 1;
    for (int i = num_agents() - 1; i > agent; --i) div *= action_counts_[i];
    return (joint / div) % action_counts_[agent];
  }

 private:
  int num_states_;
  std::vector<int> action_counts_;
  int num_joint_;
  Mat transition_;
  std::vector<Mat> rewards_;
  StructureTag tag_;
  std::optional<Mat> potential_;
};

/// Per-agent stochastic policies pi_i(a|s), one S x A_i matrix per agent.
/// Immutable by convention; algorithms return fresh copies.
class JointPolicy {
 public:
  JointPolicy() = default;
  explicit JointPolicy(std::vector<Mat> agents) : agents_(std::move(agents)) {}

  static JointPolicy uniform(const MarkovGame& game) {
    std::vector<Mat> rows;
    rows.reserve(game.num_agents());
    for (int i = 0; i < game.num_agents(); ++i)
      rows.push_back(Mat::Constant(game.num_states(), game.action_count(i),
                                   1.0 / game.action_count(i)));
    return JointPolicy(std::move(rows));
  }

  int num_agents() const { return static_cast<int>(agents_.size()); }
  const Mat& agent(int i) const { return agents_[i]; }
  Mat& agent(int i) { return agents_[i]; }
  const std::vector<Mat>& agents() const { return agents_; }

  /// Joint probability of the flat joint action `joint` at state s.
  double joint_probability(const MarkovGame& game, int s, int joint) const {
    double p = 1.0;
    for (int i = 0; i < num_agents(); ++i) p *= agents_[i](s, game.agent_action(joint, i));
    return p;
  }

  /// Product over agents except `skip` (the marginalization weight).
  double others_probability(const MarkovGame& game, int s, int joint, int skip) const {
    double p = 1.0;
    for (int i = 0; i < num_agents(); ++i)
      if (i != skip) p *= agents_[i](s, game.agent_action(joint, i));
    return p;
  }

  /// Exact membership test for the alpha-truncated class: every entry of
  /// agent i at least alpha / A_i.
  bool in_truncated_class(double alpha) const {
    for (const Mat& pi : agents_) {
      const double floor = alpha / static_cast<double>(pi.cols());
      if ((pi.array() < floor).any()) return false;
    }
    return true;
  }

  bool shape_matches(const MarkovGame& game) const {
    if (num_agents() != game.num_agents()) return false;
    for (int i = 0; i < num_agents(); ++i)
      if (agents_[i].rows() != game.num_states() || agents_[i].cols() != game.action_count(i))
        return false;
    return true;
  }

  /// FNV-1a over the raw double bits; identifies the generating policy of a
  /// trajectory.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    mix(static_cast<std::uint64_t>(agents_.size()));
    for (const Mat& pi : agents_) {
      mix(static_cast<std::uint64_t>(pi.rows()));
      mix(static_cast<std::uint64_t>(pi.cols()));
      for (long s = 0; s < pi.rows(); ++s)
        for (long a = 0; a < pi.cols(); ++a) {
          double x = pi(s, a);
          std::uint64_t bits;
          static_assert(sizeof bits == sizeof x);
          std::memcpy(&bits, &x, sizeof bits);
          mix(bits);
        }
    }
    return h;
  }

 private:
  std::vector<Mat> agents_;
};

/// One invariant violation: which tensor, where, and by how much.
struct Violation {
  std::string field;
  std::vector<int> index;
  double magnitude = 0.0;
  std::string message;
};

/// Checks every MarkovGame invariant and reports all violations (empty
/// report means the game is valid). Never throws.
inline std::vector<Violation> validate_game(const MarkovGame& game) {
  std::vector<Violation> out;
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  auto describe = [](const std::string& field, std::vector<int> idx, double mag,
                     const std::string& what) {
    std::ostringstream os;
    os << field << "[";
    for (size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << idx[k];
    os << "] " << what << " by " << mag;
    return Violation{field, std::move(idx), mag, os.str()};
  };

  for (int s = 0; s < S; ++s) {
    for (int j = 0; j < J; ++j) {
      const auto row = game.transition_row(s, j);
      const double sum = row.sum();
      if (std::abs(sum - 1.0) > kProbTolerance)
        out.push_back(describe("transition", {s, j}, sum - 1.0, "row sum off 1"));
      for (int s2 = 0; s2 < S; ++s2)
        if (row[s2] < 0.0)
          out.push_back(describe("transition", {s, j, s2}, row[s2], "negative entry"));
    }
  }
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat& r = game.reward(i);
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < J; ++j) {
        if (r(s, j) < 0.0)
          out.push_back(describe("rewards", {i, s, j}, -r(s, j), "below 0"));
        else if (r(s, j) > 1.0)
          out.push_back(describe("rewards", {i, s, j}, r(s, j) - 1.0, "above 1"));
      }
  }
  if (game.structure().cooperative) {
    for (int i = 1; i < game.num_agents(); ++i)
      if (game.reward(i) != game.reward(0)) {
        out.push_back(describe("rewards", {i}, (game.reward(i) - game.reward(0)).cwiseAbs().maxCoeff(),
                               "cooperative tag but reward differs from agent 0"));
      }
  }
  if (game.structure().action_independent) {
    for (int s = 0; s < S; ++s)
      for (int j = 1; j < J; ++j) {
        const double dev = (game.transition_row(s, j) - game.transition_row(s, 0)).cwiseAbs().maxCoeff();
        if (dev != 0.0)
          out.push_back(describe("transition", {s, j}, dev,
                                 "action_independent tag but row differs across actions"));
      }
  }
  return out;
}

/// Policy validity: stochastic rows within tolerance.
inline std::vector<Violation> validate_policy(const JointPolicy& policy) {
  std::vector<Violation> out;
  for (int i = 0; i < policy.num_agents(); ++i) {
    const Mat& pi = policy.agent(i);
    for (long s = 0; s < pi.rows(); ++s) {
      const double sum = pi.row(s).sum();
      if (std::abs(sum - 1.0) > kProbTolerance)
        out.push_back({"policy", {i, static_cast<int>(s)}, sum - 1.0, "row sum off 1"});
      for (long a = 0; a < pi.cols(); ++a)
        if (pi(s, a) < 0.0)
          out.push_back({"policy", {i, static_cast<int>(s), static_cast<int>(a)}, pi(s, a),
                         "negative entry"});
    }
  }
  return out;
}

/// Policy-induced transition structure. The state-action chain and the
/// infinite-step matrix are built on request; the state chain is always
/// present.
struct InducedChain {
  Mat state;  // S x S, P_pi
};

inline void require_valid_pair(const MarkovGame& game, const JointPolicy& policy) {
  if (!policy.shape_matches(game)) throw Error("policy shape does not match game");
}

/// P_pi(s'|s) = sum_a prod_i pi_i(a_i|s) P(s'|s,a).
inline InducedChain induced_state_chain(const MarkovGame& game, const JointPolicy& policy) {
  require_valid_pair(game, policy);
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  Mat P = Mat::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) {
      const double w = policy.joint_probability(game, s, j);
      if (w != 0.0) P.row(s) += w * game.transition_row(s, j);
    }
  return InducedChain{std::move(P)};
}

/// Joint state-action chain P^pi((s',a')|(s,a)) = P(s'|s,a) pi(a'|s'),
/// indexed s*J + a.
inline Mat induced_state_action_chain(const MarkovGame& game, const JointPolicy& policy) {
  require_valid_pair(game, policy);
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  Mat P = Mat::Zero(S * J, S * J);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j)
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = game.transition_row(s, j)[s2];
        if (p == 0.0) continue;
        for (int j2 = 0; j2 < J; ++j2)
          P(s * J + j, s2 * J + j2) = p * policy.joint_probability(game, s2, j2);
      }
  return P;
}

/// Rank-one matrix whose rows all equal nu.
inline Mat infinite_step_matrix(const Vec& nu) {
  return Vec::Ones(nu.size()) * nu.transpose();
}

/// Marginalized rewards for every agent i given agent j's action is held
/// out: r_i^pi(s) and r_i^{pi_{-j}}(s, a_j).
struct MarginalReward {
  std::vector<Vec> state;        // per agent i: r_i^pi(s)
  std::vector<Mat> state_action; // per agent i: S x A_j, r_i^{pi_{-j}}(s, a_j)
};

inline MarginalReward marginal_reward(const MarkovGame& game, const JointPolicy& policy, int j) {
  require_valid_pair(game, policy);
  if (j < 0 || j >= game.num_agents()) throw Error("marginal_reward: agent index out of range");
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  const int N = game.num_agents();
  const int Aj = game.action_count(j);
  MarginalReward out;
  out.state.assign(N, Vec::Zero(S));
  out.state_action.assign(N, Mat::Zero(S, Aj));
  for (int s = 0; s < S; ++s)
    for (int jt = 0; jt < J; ++jt) {
      const double w_others = policy.others_probability(game, s, jt, j);
      const int aj = game.agent_action(jt, j);
      const double w_full = w_others * policy.agent(j)(s, aj);
      for (int i = 0; i < N; ++i) {
        const double r = game.reward(i)(s, jt);
        out.state_action[i](s, aj) += w_others * r;
        out.state[i][s] += w_full * r;
      }
    }
  return out;
}

/// Marginalized transition P-bar^{pi_{-j}}(s'|s, a_j), shape (S*A_j) x S.
inline Mat marginal_transition(const MarkovGame& game, const JointPolicy& policy, int j) {
  require_valid_pair(game, policy);
  if (j < 0 || j >= game.num_agents()) throw Error("marginal_transition: agent index out of range");
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  const int Aj = game.action_count(j);
  Mat P = Mat::Zero(S * Aj, S);
  for (int s = 0; s < S; ++s)
    for (int jt = 0; jt < J; ++jt) {
      const double w = policy.others_probability(game, s, jt, j);
      if (w == 0.0) continue;
      P.row(s * Aj + game.agent_action(jt, j)) += w * game.transition_row(s, jt);
    }
  return P;
}

}  // namespace ampg
