#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "ampg/algorithms.hpp"
#include "ampg/game.hpp"
#include "ampg/log.hpp"
#include "ampg/rng.hpp"
#include "ampg/simplex.hpp"

namespace ampg {

/// A simulated (state, joint action, per-agent reward) sequence together
/// with its generating seed and per-agent policy hashes.
struct Trajectory {
  std::vector<std::int32_t> states;
  std::vector<std::int32_t> actions;  // length * N, agent-major per step
  std::vector<double> rewards;        // length * N
  int num_agents = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<std::uint64_t> agent_policy_hashes;

  long length() const { return static_cast<long>(states.size()); }
  int action(long t, int agent) const { return actions[t * num_agents + agent]; }
  double reward(long t, int agent) const { return rewards[t * num_agents + agent]; }
};

inline std::uint64_t hash_matrix(const Mat& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(m.rows()));
  mix(static_cast<std::uint64_t>(m.cols()));
  for (long s = 0; s < m.rows(); ++s)
    for (long a = 0; a < m.cols(); ++a) {
      double x = m(s, a);
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      mix(bits);
    }
  return h;
}

/// Simulates `length` synchronous steps. Agents draw actions from their own
/// Philox lanes (lane 1+i), the world (initial state and transitions) from
/// lane 0, so the same (seed, stream) always reproduces the same trajectory.
///
/// The initial state is drawn from `initial` when given, else uniformly.
inline Trajectory simulate(const MarkovGame& game, const JointPolicy& policy, long length,
                           std::uint64_t seed, std::uint64_t stream = 0,
                           const Vec* initial = nullptr) {
  require_valid_pair(game, policy);
  if (length < 1) throw Error("simulate: length must be at least 1");
  const int N = game.num_agents();
  Trajectory traj;
  traj.num_agents = N;
  traj.seed = seed;
  traj.stream = stream;
  traj.states.resize(length);
  traj.actions.resize(length * N);
  traj.rewards.resize(length * N);
  for (int i = 0; i < N; ++i) traj.agent_policy_hashes.push_back(hash_matrix(policy.agent(i)));

  Philox world(seed, stream, 0);
  std::vector<Philox> agent_rng;
  agent_rng.reserve(N);
  for (int i = 0; i < N; ++i) agent_rng.emplace_back(seed, stream, 1 + i);

  int s = initial ? world.sample(*initial) : world.sample_uniform(game.num_states());
  std::vector<int> acts(N);
  for (long t = 0; t < length; ++t) {
    traj.states[t] = s;
    for (int i = 0; i < N; ++i) {
      acts[i] = agent_rng[i].sample(policy.agent(i).row(s).transpose());
      traj.actions[t * N + i] = acts[i];
    }
    const int joint = game.joint_index(acts);
    for (int i = 0; i < N; ++i) traj.rewards[t * N + i] = game.reward(i)(s, joint);
    s = world.sample(game.transition_row(s, joint).transpose());
  }
  return traj;
}

/// Average-reward estimate: mean reward over steps N1/2 .. N1-1.
inline double estimate_rho(const Trajectory& traj, long n1, int agent) {
  if (n1 < 2 || n1 % 2 != 0) throw LengthError("estimate_rho: N1 must be even and at least 2");
  if (traj.length() < n1) throw LengthError("estimate_rho: trajectory shorter than N1");
  double sum = 0.0;
  for (long t = n1 / 2; t < n1; ++t) sum += traj.reward(t, agent);
  return sum * 2.0 / n1;
}

struct GradientEstimatorParams {
  long K = 0;
  long N1 = 0;
  long N2 = 0;
};

namespace detail {

inline void warn_on_policy_mismatch(const Trajectory& traj, const Mat& policy_row, int agent,
                                    const char* where) {
  if (agent < static_cast<int>(traj.agent_policy_hashes.size()) &&
      traj.agent_policy_hashes[agent] != hash_matrix(policy_row)) {
    std::ostringstream os;
    os << where << ": policy for agent " << agent
       << " does not hash to the trajectory's generating policy; the estimate targets the "
          "generating policy";
    log::warn(os.str());
  }
}

}  // namespace detail

/// Single-trajectory score-function gradient estimate for one agent:
/// ghat = (1/K) sum_k R(k) / pi_i(a^{t_k}|s^{t_k}) e(s^{t_k}, a^{t_k}),
/// R(k) the rho-centered reward sum of episode k, episodes starting at
/// t_k = N1 + k N2.
///
/// `rho_override` replaces the trajectory estimate of rho with a known value
/// (test hook; the default is the exact scan above).
inline Mat estimate_gradient(const Trajectory& traj, const Mat& policy_i, int agent,
                             const GradientEstimatorParams& p,
                             std::optional<double> rho_override = {}) {
  if (p.K < 1 || p.N2 < 1) throw LengthError("estimate_gradient: K and N2 must be positive");
  if (traj.length() < p.N1 + p.K * p.N2)
    throw LengthError("estimate_gradient: trajectory shorter than N1 + K*N2");
  detail::warn_on_policy_mismatch(traj, policy_i, agent, "estimate_gradient");
  const double rho_hat = rho_override ? *rho_override : estimate_rho(traj, p.N1, agent);
  Mat g = Mat::Zero(policy_i.rows(), policy_i.cols());
  for (long k = 0; k < p.K; ++k) {
    const long tk = p.N1 + k * p.N2;
    double r = 0.0;
    for (long tau = tk; tau < tk + p.N2; ++tau) r += traj.reward(tau, agent) - rho_hat;
    const int s = traj.states[tk];
    const int a = traj.action(tk, agent);
    const double prob = policy_i(s, a);
    if (prob == 0.0)
      throw ZeroSupportError("estimate_gradient: visited action has zero policy mass");
    g(s, a) += r / prob;
  }
  return g / static_cast<double>(p.K);
}

/// Q-scan estimate for one target state: on visiting s at time tau <= B-N1,
/// record the next N1 rewards importance-weighted into the taken action's
/// slot, then jump 2*N1 steps; the mean estimates Qbar_i(s, .) + N1 rho_i.
/// Returns the zero vector when s is never visited in range.
struct QEstimate {
  Vec q;
  std::vector<long> visit_times;
};

inline QEstimate estimate_q(const Trajectory& traj, int target_state, const Mat& policy_i,
                            int agent, long b, long n1) {
  if (n1 < 1 || b < n1) throw LengthError("estimate_q: need B >= N1 >= 1");
  if (traj.length() < b) throw LengthError("estimate_q: trajectory shorter than B");
  detail::warn_on_policy_mismatch(traj, policy_i, agent, "estimate_q");
  QEstimate out;
  out.q = Vec::Zero(policy_i.cols());
  long tau = 0;
  while (tau <= b - n1) {
    if (traj.states[tau] == target_state) {
      out.visit_times.push_back(tau);
      double r = 0.0;
      for (long t = tau; t < tau + n1; ++t) r += traj.reward(t, agent);
      const int a = traj.action(tau, agent);
      const double prob = policy_i(target_state, a);
      if (prob == 0.0) throw ZeroSupportError("estimate_q: visited action has zero policy mass");
      out.q[a] += r / prob;
      tau += 2 * n1;
    } else {
      ++tau;
    }
  }
  if (!out.visit_times.empty()) out.q /= static_cast<double>(out.visit_times.size());
  return out;
}

/// Sample-based independent projected policy gradient: one fresh trajectory
/// per outer iteration, every agent estimates its own gradient from the
/// shared world trajectory and projects onto the alpha-truncated class.
/// The oracle is used for the recorded metrics only, never in the update.
struct SampledPgConfig {
  long T = 100;
  StepSchedule schedule = StepSchedule::constant(0.01);
  long K = 1000;
  long N1 = 1000;
  long N2 = 50;
  double alpha = 0.01;
  long eval_every = 10;
  std::uint64_t seed = 0;
  const JointPolicy* reference = nullptr;
  const Vec* initial = nullptr;
  TraceSink sink = {};
};

namespace detail {

inline void record_sampled(const MarkovGame& game, const JointPolicy& policy, RunTrace& trace,
                           long t, double beta, const JointPolicy* reference,
                           const TraceSink& sink) {
  trace.points.push_back(evaluate_iterate(game, policy, t, beta));
  if (reference != nullptr) {
    double dist = 0.0;
    for (int i = 0; i < game.num_agents(); ++i)
      dist += (policy.agent(i) - reference->agent(i)).cwiseAbs().sum();
    trace.l1_to_reference.push_back(dist / game.num_agents());
  }
  if (sink) sink(trace);
}

}  // namespace detail

inline RunTrace run_sampled_pg(const MarkovGame& game, const SampledPgConfig& cfg) {
  if (cfg.alpha <= 0.0 || cfg.alpha > 1.0) throw Error("run_sampled_pg: alpha must be in (0, 1]");
  RunTrace trace;
  trace.algorithm = AlgorithmId::sampled_pg;
  trace.seed = cfg.seed;
  trace.estimator = EstimatorInfo{cfg.K, cfg.N1, cfg.N2, 0, cfg.alpha};
  JointPolicy policy = JointPolicy::uniform(game);
  const GradientEstimatorParams params{cfg.K, cfg.N1, cfg.N2};
  for (long t = 0; t < cfg.T; ++t) {
    const double beta = cfg.schedule.at(t);
    if (t % cfg.eval_every == 0)
      detail::record_sampled(game, policy, trace, t, beta, cfg.reference, cfg.sink);
    const Trajectory traj =
        simulate(game, policy, cfg.N1 + cfg.K * cfg.N2, cfg.seed, static_cast<std::uint64_t>(t),
                 cfg.initial);
    std::vector<Mat> next;
    next.reserve(game.num_agents());
    for (int i = 0; i < game.num_agents(); ++i) {
      const Mat g = estimate_gradient(traj, policy.agent(i), i, params);
      Mat pi = policy.agent(i);
      const double floor = cfg.alpha / game.action_count(i);
      for (int s = 0; s < game.num_states(); ++s)
        pi.row(s) = project_simplex(pi.row(s).transpose() + beta * g.row(s).transpose(), floor);
      next.push_back(std::move(pi));
    }
    policy = JointPolicy(std::move(next));
  }
  detail::record_sampled(game, policy, trace, cfg.T, cfg.schedule.at(cfg.T), cfg.reference,
                         cfg.sink);
  return trace;
}

/// Sample-based proximal-Q: per outer iteration one B-length trajectory,
/// q-scan estimates for every state, then the proximal update with qhat in
/// place of Qbar. The N1*rho summand inside qhat is a uniform per-row shift,
/// which the projection removes.
struct SampledProxQConfig {
  long T = 100;
  StepSchedule schedule = StepSchedule::constant(0.01);
  long B = 50000;
  long N1 = 50;
  double alpha = 0.01;
  long eval_every = 10;
  std::uint64_t seed = 0;
  const JointPolicy* reference = nullptr;
  const Vec* initial = nullptr;
  TraceSink sink = {};
};

inline RunTrace run_sampled_proxq(const MarkovGame& game, const SampledProxQConfig& cfg) {
  if (cfg.alpha <= 0.0 || cfg.alpha > 1.0)
    throw Error("run_sampled_proxq: alpha must be in (0, 1]");
  RunTrace trace;
  trace.algorithm = AlgorithmId::sampled_proxq;
  trace.seed = cfg.seed;
  trace.estimator = EstimatorInfo{0, cfg.N1, 0, cfg.B, cfg.alpha};
  JointPolicy policy = JointPolicy::uniform(game);
  for (long t = 0; t < cfg.T; ++t) {
    const double beta = cfg.schedule.at(t);
    if (t % cfg.eval_every == 0)
      detail::record_sampled(game, policy, trace, t, beta, cfg.reference, cfg.sink);
    const Trajectory traj =
        simulate(game, policy, cfg.B, cfg.seed, static_cast<std::uint64_t>(t), cfg.initial);
    std::vector<Mat> next;
    next.reserve(game.num_agents());
    for (int i = 0; i < game.num_agents(); ++i) {
      Mat pi = policy.agent(i);
      const double floor = cfg.alpha / game.action_count(i);
      for (int s = 0; s < game.num_states(); ++s) {
        const QEstimate qhat = estimate_q(traj, s, policy.agent(i), i, cfg.B, cfg.N1);
        pi.row(s) = project_simplex(pi.row(s).transpose() + beta * qhat.q, floor);
      }
      next.push_back(std::move(pi));
    }
    policy = JointPolicy(std::move(next));
  }
  detail::record_sampled(game, policy, trace, cfg.T, cfg.schedule.at(cfg.T), cfg.reference,
                         cfg.sink);
  return trace;
}

}  // namespace ampg
