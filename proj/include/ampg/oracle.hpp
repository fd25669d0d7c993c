#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ampg/errors.hpp"
#include "ampg/game.hpp"

namespace ampg {

/// Unique stationary distribution of a stochastic matrix, by a dense solve
/// of the (S+1)-row augmented system [P^T - I; 1^T] nu = [0; 1].
///
/// Throws ErgodicityError if the system is rank-deficient (more than the one
/// expected null direction) or any entry is at numerical zero.
inline Vec stationary_distribution(const Mat& chain) {
  const int S = static_cast<int>(chain.rows());
  if (S == 1) return Vec::Ones(1);
  Mat A(S + 1, S);
  A.topRows(S) = chain.transpose() - Mat::Identity(S, S);
  A.bottomRows(1).setOnes();
  Vec b = Vec::Zero(S + 1);
  b[S] = 1.0;
  Eigen::ColPivHouseholderQR<Mat> qr(A);
  if (qr.rank() < S)
    throw ErgodicityError("stationary_distribution: chain has multiple closed classes");
  Vec nu = qr.solve(b);
  const double sum = nu.sum();
  if (!(sum > 0.0)) throw ErgodicityError("stationary_distribution: degenerate solve");
  nu /= sum;
  if (nu.minCoeff() <= 1e-14)
    throw ErgodicityError("stationary_distribution: a state has stationary probability <= 1e-14");
  if ((chain.transpose() * nu - nu).cwiseAbs().maxCoeff() > 1e-10)
    throw ErgodicityError("stationary_distribution: residual too large, chain not ergodic");
  return nu;
}

/// Differential value pair for one agent: V_i (zero-mean under nu) and the
/// joint-action Q_i, S x J.
struct DifferentialValues {
  Vec v;
  Mat q;
};

/// Everything the theory defines for one (game, policy) pair. All members
/// are exact up to dense-solver residuals.
struct OracleReport {
  Mat chain;                 // P_pi
  Vec nu;                    // stationary distribution
  std::vector<double> rho;   // per-agent average reward
  std::vector<Vec> value;    // per-agent V_i, <nu, V_i> = 0
  std::vector<Mat> q;        // per-agent Q_i, S x J
};

namespace detail {

/// Solves V = (I - P + P_inf)^{-1} (I - P_inf) r for a state-reward vector,
/// then pins <nu, V> = 0.
inline Vec solve_bias(const Mat& chain, const Vec& nu, const Vec& state_reward) {
  const int S = static_cast<int>(chain.rows());
  const Mat p_inf = infinite_step_matrix(nu);
  Eigen::FullPivLU<Mat> lu(Mat::Identity(S, S) - chain + p_inf);
  if (!lu.isInvertible())
    throw SingularSystemError("differential_values: fundamental matrix is singular");
  Vec v = lu.solve(state_reward - p_inf * state_reward);
  v.array() -= nu.dot(v);  // exact zero-mean normalization
  return v;
}

inline Mat q_from_bias(const MarkovGame& game, const Vec& v, const Mat& reward, double rho) {
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  Mat q(S, J);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) q(s, j) = reward(s, j) - rho + game.transition_row(s, j).dot(v);
  return q;
}

}  // namespace detail

inline OracleReport compute_report(const MarkovGame& game, const JointPolicy& policy) {
  OracleReport rep;
  rep.chain = induced_state_chain(game, policy).state;
  rep.nu = stationary_distribution(rep.chain);
  const int N = game.num_agents();
  // r_i^pi for all agents in one sweep over joint actions
  const MarginalReward mr = marginal_reward(game, policy, 0);
  rep.rho.resize(N);
  rep.value.resize(N);
  rep.q.resize(N);
  for (int i = 0; i < N; ++i) {
    rep.rho[i] = rep.nu.dot(mr.state[i]);
    rep.value[i] = detail::solve_bias(rep.chain, rep.nu, mr.state[i]);
    rep.q[i] = detail::q_from_bias(game, rep.value[i], game.reward(i), rep.rho[i]);
  }
  return rep;
}

/// rho_i^pi = <nu^pi, r_i^pi>.
inline double average_reward(const MarkovGame& game, const JointPolicy& policy, int agent) {
  require_valid_pair(game, policy);
  if (agent < 0 || agent >= game.num_agents()) throw Error("average_reward: agent out of range");
  const Mat chain = induced_state_chain(game, policy).state;
  const Vec nu = stationary_distribution(chain);
  return nu.dot(marginal_reward(game, policy, 0).state[agent]);
}

inline DifferentialValues differential_values(const MarkovGame& game, const JointPolicy& policy,
                                              int agent) {
  require_valid_pair(game, policy);
  if (agent < 0 || agent >= game.num_agents())
    throw Error("differential_values: agent out of range");
  const Mat chain = induced_state_chain(game, policy).state;
  const Vec nu = stationary_distribution(chain);
  const Vec r_state = marginal_reward(game, policy, 0).state[agent];
  const double rho = nu.dot(r_state);
  Vec v = detail::solve_bias(chain, nu, r_state);
  return DifferentialValues{v, detail::q_from_bias(game, v, game.reward(agent), rho)};
}

/// Marginalized Q and advantage for acting agent j against reward agent i.
struct MarginalQ {
  Mat qbar;  // S x A_j
  Mat abar;  // qbar - V_i(s)
};

inline MarginalQ marginal_q_from_report(const MarkovGame& game, const JointPolicy& policy,
                                        const OracleReport& rep, int j, int i) {
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  const int Aj = game.action_count(j);
  Mat qbar = Mat::Zero(S, Aj);
  for (int s = 0; s < S; ++s)
    for (int jt = 0; jt < J; ++jt) {
      const double w = policy.others_probability(game, s, jt, j);
      if (w != 0.0) qbar(s, game.agent_action(jt, j)) += w * rep.q[i](s, jt);
    }
  Mat abar = qbar.colwise() - rep.value[i];
  return MarginalQ{std::move(qbar), std::move(abar)};
}

inline MarginalQ marginal_q(const MarkovGame& game, const JointPolicy& policy, int j, int i) {
  require_valid_pair(game, policy);
  if (j < 0 || j >= game.num_agents() || i < 0 || i >= game.num_agents())
    throw Error("marginal_q: agent index out of range");
  return marginal_q_from_report(game, policy, compute_report(game, policy), j, i);
}

/// d rho_i / d pi_j(a_j|s) = Qbar_{j;i}(s, a_j) nu(s).
inline Mat policy_gradient_from_report(const MarkovGame& game, const JointPolicy& policy,
                                       const OracleReport& rep, int j, int i) {
  const Mat qbar = marginal_q_from_report(game, policy, rep, j, i).qbar;
  return rep.nu.asDiagonal() * qbar;
}

inline Mat policy_gradient(const MarkovGame& game, const JointPolicy& policy, int j, int i) {
  require_valid_pair(game, policy);
  return policy_gradient_from_report(game, policy, compute_report(game, policy), j, i);
}

/// Deterministic best response of one agent against the others, by relative
/// value iteration on the marginalized single-agent MDP.
struct BestResponse {
  Mat policy;       // S x A_i, deterministic rows
  double rho;       // exact gain of the returned policy against pi_{-i}
  long iterations;  // RVI sweeps used
};

inline BestResponse best_response(const MarkovGame& game, const JointPolicy& policy, int agent,
                                  double span_threshold = 1e-10, long max_iters = 1000000) {
  require_valid_pair(game, policy);
  if (agent < 0 || agent >= game.num_agents()) throw Error("best_response: agent out of range");
  const int S = game.num_states();
  const int A = game.action_count(agent);
  const Mat pbar = marginal_transition(game, policy, agent);          // (S*A) x S
  const Mat rbar = marginal_reward(game, policy, agent).state_action[agent];  // S x A

  Vec w = Vec::Zero(S);
  Vec tw(S);
  long iter = 0;
  for (;; ++iter) {
    if (iter >= max_iters)
      throw NoConvergenceError("best_response: relative value iteration hit its cap");
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a)
        best = std::max(best, rbar(s, a) + pbar.row(s * A + a).dot(w));
      tw[s] = best;
    }
    const Vec delta = tw - w;
    if (delta.maxCoeff() - delta.minCoeff() <= span_threshold) {
      w = tw;
      break;
    }
    w = tw.array() - tw[0];  // keep iterates bounded
  }

  // Greedy policy from the converged bias; ties go to the lowest action.
  Mat br = Mat::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    int best_a = 0;
    double best = rbar(s, 0) + pbar.row(s * A).dot(w);
    for (int a = 1; a < A; ++a) {
      const double val = rbar(s, a) + pbar.row(s * A + a).dot(w);
      if (val > best) {
        best = val;
        best_a = a;
      }
    }
    br(s, best_a) = 1.0;
  }

  // Exact gain of the greedy policy against the frozen opponents.
  JointPolicy dev(policy.agents());
  dev.agent(agent) = br;
  const double rho = average_reward(game, dev, agent);
  return BestResponse{std::move(br), rho, iter + 1};
}

/// Nash gap: max_i (rho_i^* - rho_i^pi), plus per-agent gaps for diagnostics.
struct NashGap {
  double gap;
  std::vector<double> per_agent;
};

inline NashGap nash_gap(const MarkovGame& game, const JointPolicy& policy,
                        double span_threshold = 1e-10, long max_iters = 1000000) {
  const OracleReport rep = compute_report(game, policy);
  NashGap out;
  out.per_agent.resize(game.num_agents());
  out.gap = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.num_agents(); ++i) {
    const BestResponse br = best_response(game, policy, i, span_threshold, max_iters);
    out.per_agent[i] = br.rho - rep.rho[i];
    out.gap = std::max(out.gap, out.per_agent[i]);
  }
  return out;
}

/// Potential value of a certified game. Cooperative games use the common
/// average reward; games with a stored static potential use <nu, phibar>.
inline double potential_value_from_report(const MarkovGame& game, const JointPolicy& policy,
                                          const OracleReport& rep) {
  if (game.structure().cooperative) return rep.rho[0];
  if (game.potential() &&
      (game.structure().action_independent || game.structure().state_potential)) {
    const Mat& phi = *game.potential();
    double total = 0.0;
    for (int s = 0; s < game.num_states(); ++s) {
      double row = 0.0;
      for (int j = 0; j < game.num_joint_actions(); ++j)
        row += policy.joint_probability(game, s, j) * phi(s, j);
      total += rep.nu[s] * row;
    }
    return total;
  }
  throw UnsupportedStructureError("potential_value: game has no certified potential");
}

inline double potential_value(const MarkovGame& game, const JointPolicy& policy) {
  require_valid_pair(game, policy);
  return potential_value_from_report(game, policy, compute_report(game, policy));
}

/// Exploration factor c: the least probability mass any agent puts on its
/// greedy actions, ties resolved with absolute tolerance 1e-10.
inline double exploration_factor_from_report(const MarkovGame& game, const JointPolicy& policy,
                                             const OracleReport& rep,
                                             double tie_tolerance = 1e-10) {
  double c = 1.0;
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat qbar = marginal_q_from_report(game, policy, rep, i, i).qbar;
    for (int s = 0; s < game.num_states(); ++s) {
      const double top = qbar.row(s).maxCoeff();
      double mass = 0.0;
      for (int a = 0; a < game.action_count(i); ++a)
        if (qbar(s, a) >= top - tie_tolerance) mass += policy.agent(i)(s, a);
      c = std::min(c, mass);
    }
  }
  return c;
}

inline double exploration_factor(const MarkovGame& game, const JointPolicy& policy) {
  require_valid_pair(game, policy);
  return exploration_factor_from_report(game, policy, compute_report(game, policy));
}

}  // namespace ampg
