#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ampg/constants.hpp"
#include "ampg/game.hpp"
#include "ampg/oracle.hpp"
#include "ampg/simplex.hpp"

namespace ampg {

enum class AlgorithmId { pg, proxq, npg, sampled_pg, sampled_proxq };

inline const char* algorithm_name(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::pg: return "pg";
    case AlgorithmId::proxq: return "proxq";
    case AlgorithmId::npg: return "npg";
    case AlgorithmId::sampled_pg: return "sampled_pg";
    case AlgorithmId::sampled_proxq: return "sampled_proxq";
  }
  return "?";
}

/// Learning-rate rules. Each non-manual rule evaluates the closed-form rate
/// its convergence guarantee prescribes, from the game's constants.
struct LearningRateRule {
  enum class Kind { pg, proxq, npg, manual } kind = Kind::manual;
  double beta = 0.0;
};

/// pg: 1/L_Phi.
/// proxq: max{ (1-G) / ((N-1)(kappa_Q + S kappa^2) A_max), (1-G) / (2 L_Phi) }.
/// npg: min{ max{ (1-G) / ((N-1)(kappa_Q + S kappa^2)), (1-G) / L_Phi }, 1/(2 kappa) }.
/// For a single agent the (N-1) terms vanish from the constraint; the rate
/// falls back to the remaining finite piece.
inline LearningRateRule make_rate_rule(LearningRateRule::Kind kind, const GameConstants& c,
                                       const MarkovGame& game, double manual_beta = 0.0) {
  const int N = game.num_agents();
  const double S = game.num_states();
  const double a_max = game.max_action_count();
  const double one_minus_gamma = 1.0 - c.gamma.value;
  const double cross = (N - 1) * (c.kappa_q.value + S * c.kappa.value * c.kappa.value);
  double beta = manual_beta;
  switch (kind) {
    case LearningRateRule::Kind::pg:
      beta = 1.0 / c.smooth_potential.value;
      break;
    case LearningRateRule::Kind::proxq: {
      const double lhs = cross > 0.0 ? one_minus_gamma / (cross * a_max)
                                     : -std::numeric_limits<double>::infinity();
      beta = std::max(lhs, one_minus_gamma / (2.0 * c.smooth_potential.value));
      break;
    }
    case LearningRateRule::Kind::npg: {
      const double lhs = cross > 0.0 ? one_minus_gamma / cross
                                     : -std::numeric_limits<double>::infinity();
      const double grow = std::max(lhs, one_minus_gamma / c.smooth_potential.value);
      beta = std::min(grow, 1.0 / (2.0 * c.kappa.value));
      break;
    }
    case LearningRateRule::Kind::manual:
      break;
  }
  return LearningRateRule{kind, beta};
}

/// One synchronous projected policy-gradient ascent step: every agent moves
/// along its own gradient from the same pre-step oracle, each row projected
/// back onto the simplex.
inline JointPolicy pg_step(const MarkovGame& game, const JointPolicy& policy, double beta,
                           const OracleReport* precomputed = nullptr) {
  require_valid_pair(game, policy);
  OracleReport local;
  const OracleReport& rep = precomputed ? *precomputed : (local = compute_report(game, policy));
  std::vector<Mat> rows;
  rows.reserve(game.num_agents());
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat grad = policy_gradient_from_report(game, policy, rep, i, i);
    Mat pi = policy.agent(i);
    for (int s = 0; s < game.num_states(); ++s)
      pi.row(s) = project_simplex(pi.row(s).transpose() + beta * grad.row(s).transpose());
    rows.push_back(std::move(pi));
  }
  return JointPolicy(std::move(rows));
}

/// One proximal step: per state, the maximizer of beta<Qbar, p> - ||p - pi||^2/2
/// over the simplex, which is the Euclidean projection of pi + beta Qbar.
inline JointPolicy proxq_step(const MarkovGame& game, const JointPolicy& policy, double beta,
                              const OracleReport* precomputed = nullptr) {
  require_valid_pair(game, policy);
  OracleReport local;
  const OracleReport& rep = precomputed ? *precomputed : (local = compute_report(game, policy));
  std::vector<Mat> rows;
  rows.reserve(game.num_agents());
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat qbar = marginal_q_from_report(game, policy, rep, i, i).qbar;
    Mat pi = policy.agent(i);
    for (int s = 0; s < game.num_states(); ++s)
      pi.row(s) = project_simplex(pi.row(s).transpose() + beta * qbar.row(s).transpose());
    rows.push_back(std::move(pi));
  }
  return JointPolicy(std::move(rows));
}

/// Multiplicative-weights step pi+ ~ pi * exp(beta Abar), with the per-(agent,
/// state) normalizers Z returned for improvement checks. Exponentials use
/// per-row max subtraction; the normalized policy is unchanged by it, while Z
/// itself is reconstructed exactly afterwards.
struct NpgStep {
  JointPolicy policy;
  std::vector<Mat> log_z;  // per agent: S x 1 of log Z_i^s
};

inline NpgStep npg_step(const MarkovGame& game, const JointPolicy& policy, double beta,
                        const OracleReport* precomputed = nullptr) {
  require_valid_pair(game, policy);
  OracleReport local;
  const OracleReport& rep = precomputed ? *precomputed : (local = compute_report(game, policy));
  NpgStep out;
  std::vector<Mat> rows;
  rows.reserve(game.num_agents());
  out.log_z.reserve(game.num_agents());
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat abar = marginal_q_from_report(game, policy, rep, i, i).abar;
    Mat pi = policy.agent(i);
    Mat logz(game.num_states(), 1);
    for (int s = 0; s < game.num_states(); ++s) {
      for (int a = 0; a < game.action_count(i); ++a)
        if (pi(s, a) == 0.0)
          throw ZeroSupportError("npg_step: policy must be interior");
      const double shift = (beta * abar.row(s)).maxCoeff();
      Vec w(game.action_count(i));
      for (int a = 0; a < game.action_count(i); ++a)
        w[a] = pi(s, a) * std::exp(beta * abar(s, a) - shift);
      const double z_shifted = w.sum();
      pi.row(s) = w.transpose() / z_shifted;
      logz(s, 0) = std::log(z_shifted) + shift;
    }
    rows.push_back(std::move(pi));
    out.log_z.push_back(std::move(logz));
  }
  out.policy = JointPolicy(std::move(rows));
  return out;
}

/// One evaluated iterate of a run.
struct TracePoint {
  long t = 0;
  double phi = std::numeric_limits<double>::quiet_NaN();
  double nash_gap = 0.0;
  double c_t = 0.0;
  double beta = 0.0;
};

/// Estimator parameters a sample-based run used; carried in the trace so the
/// CSV schema can include them.
struct EstimatorInfo {
  long K = 0, N1 = 0, N2 = 0, B = 0;
  double alpha = 0.0;
};

/// Metrics of one training run. Regret aggregates are computed over the
/// evaluated iterates; with eval_every == 1 they are the exact running
/// averages of the gap and of its square.
struct RunTrace {
  AlgorithmId algorithm = AlgorithmId::pg;
  std::uint64_t seed = 0;
  std::vector<TracePoint> points;
  std::vector<double> l1_to_reference;  // parallel to points when tracked
  std::string rate_provenance;          // which constants backed the rate rule
  std::optional<EstimatorInfo> estimator;

  double nash_regret() const {
    if (points.empty()) return 0.0;
    double sum = 0.0;
    for (const TracePoint& p : points) sum += p.nash_gap;
    return sum / points.size();
  }
  double nash_regret_sq() const {
    if (points.empty()) return 0.0;
    double sum = 0.0;
    for (const TracePoint& p : points) sum += p.nash_gap * p.nash_gap;
    return sum / points.size();
  }
  double min_gap() const {
    double m = std::numeric_limits<double>::infinity();
    for (const TracePoint& p : points) m = std::min(m, p.nash_gap);
    return m;
  }
};

/// Piecewise-constant step-size schedule: beta(t) is the value of the last
/// entry whose start does not exceed t.
struct StepSchedule {
  std::vector<std::pair<long, double>> entries;  // (start iteration, beta), sorted

  static StepSchedule constant(double beta) { return StepSchedule{{{0, beta}}}; }

  /// Geometric decay from `first` to `last` in blocks of `block` iterations
  /// over a horizon of T iterations.
  static StepSchedule geometric(double first, double last, long block, long horizon) {
    StepSchedule s;
    const long blocks = std::max<long>(1, (horizon + block - 1) / block);
    const double factor = blocks > 1 ? std::pow(last / first, 1.0 / (blocks - 1)) : 1.0;
    double beta = first;
    for (long b = 0; b < blocks; ++b) {
      s.entries.emplace_back(b * block, beta);
      beta *= factor;
    }
    return s;
  }

  double at(long t) const {
    double beta = entries.empty() ? 0.0 : entries.front().second;
    for (const auto& [start, value] : entries) {
      if (start > t) break;
      beta = value;
    }
    return beta;
  }
};

namespace detail {

inline TracePoint evaluate_iterate(const MarkovGame& game, const JointPolicy& policy, long t,
                                   double beta) {
  const OracleReport rep = compute_report(game, policy);
  TracePoint p;
  p.t = t;
  p.beta = beta;
  p.nash_gap = nash_gap(game, policy).gap;
  p.c_t = exploration_factor_from_report(game, policy, rep);
  try {
    p.phi = potential_value_from_report(game, policy, rep);
  } catch (const UnsupportedStructureError&) {
    // general game: no certified potential to report
  }
  return p;
}

}  // namespace detail

/// Called after each evaluated iterate is appended; lets a harness stream
/// rows to disk so partial traces survive a failed run.
using TraceSink = std::function<void(const RunTrace&)>;

/// Runs an oracle-driven loop (pg / proxq / npg) from the uniform joint
/// policy for T steps, evaluating metrics every `eval_every` iterations and
/// at both endpoints. Deterministic given (game, algorithm, rates, T).
inline RunTrace run_oracle_algorithm(const MarkovGame& game, AlgorithmId algorithm, long T,
                                     const StepSchedule& schedule, long eval_every = 10,
                                     const JointPolicy* reference = nullptr,
                                     const TraceSink& sink = {}) {
  if (T < 0) throw Error("run_oracle_algorithm: T must be nonnegative");
  if (eval_every < 1) throw Error("run_oracle_algorithm: eval period must be positive");
  RunTrace trace;
  trace.algorithm = algorithm;
  JointPolicy policy = JointPolicy::uniform(game);
  auto record = [&](long t, double beta) {
    trace.points.push_back(detail::evaluate_iterate(game, policy, t, beta));
    if (reference != nullptr) {
      double dist = 0.0;
      for (int i = 0; i < game.num_agents(); ++i)
        dist += (policy.agent(i) - reference->agent(i)).cwiseAbs().sum();
      trace.l1_to_reference.push_back(dist / game.num_agents());
    }
    if (sink) sink(trace);
  };
  for (long t = 0; t < T; ++t) {
    const double beta = schedule.at(t);
    if (t % eval_every == 0) record(t, beta);
    const OracleReport rep = compute_report(game, policy);
    switch (algorithm) {
      case AlgorithmId::pg: policy = pg_step(game, policy, beta, &rep); break;
      case AlgorithmId::proxq: policy = proxq_step(game, policy, beta, &rep); break;
      case AlgorithmId::npg: policy = npg_step(game, policy, beta, &rep).policy; break;
      default: throw Error("run_oracle_algorithm: not an oracle algorithm");
    }
  }
  record(T, schedule.at(T));
  return trace;
}

}  // namespace ampg
