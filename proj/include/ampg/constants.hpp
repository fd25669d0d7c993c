#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ampg/game.hpp"
#include "ampg/oracle.hpp"
#include "ampg/rng.hpp"

namespace ampg {

/// How a reported constant was obtained. Searches over the policy polytope
/// are exact only when the deterministic vertices were fully enumerated and
/// the chain does not depend on actions (so the searched functionals attain
/// their extrema at vertices).
enum class Provenance { exact, sampled_lower_bound, analytic_upper_bound };

struct Constant {
  double value = 0.0;
  Provenance provenance = Provenance::sampled_lower_bound;
};

/// The structural constants of a game used by learning-rate rules and
/// inequality checks.
struct GameConstants {
  Constant gamma;             // 1 - min stationary probability
  Constant kappa0;            // max 1 / (1 - |lambda_2|)
  Constant c_p;               // min{ sqrt(S/(1-Gamma)), 1/(1-Gamma) }
  Constant varrho;            // 1 - 1/kappa0
  Constant kappa;             // max over policies of the Qbar half-span
  Constant kappa1;            // max inf-norm of the fundamental-matrix inverse
  Constant kappa_q;           // kappa + 2 kappa1 + S kappa1 (kappa + kappa1) + S kappa kappa1^2
  Constant mismatch;          // max ratio of stationary distributions (D)
  Constant smooth_rho;        // L
  Constant smooth_potential;  // L_Phi
  Constant potential_span;    // C_Phi
};

inline Provenance weakest(Provenance a, Provenance b) {
  if (a == Provenance::exact) return b;
  if (b == Provenance::exact) return a;
  return a == b ? a : Provenance::sampled_lower_bound;
}

struct ConstantsOptions {
  int sample_budget = 64;        // stochastic probes when enumeration is too big
  int enumeration_budget = 4096; // max deterministic joint policies to enumerate
  bool skip_kappa_search = false;  // use the C_p * kappa0 upper bound instead
  std::uint64_t seed = 2024;
};

/// All deterministic joint policies, lexicographic in per-(agent, state)
/// action choices. Caller is responsible for the count being sane.
inline std::vector<JointPolicy> enumerate_deterministic_policies(const MarkovGame& game) {
  const int S = game.num_states();
  const int N = game.num_agents();
  std::vector<int> choice(static_cast<size_t>(S) * N, 0);
  std::vector<JointPolicy> out;
  for (;;) {
    std::vector<Mat> rows;
    rows.reserve(N);
    for (int i = 0; i < N; ++i) {
      Mat pi = Mat::Zero(S, game.action_count(i));
      for (int s = 0; s < S; ++s) pi(s, choice[static_cast<size_t>(i) * S + s]) = 1.0;
      rows.push_back(std::move(pi));
    }
    out.emplace_back(std::move(rows));
    int pos = static_cast<int>(choice.size()) - 1;
    while (pos >= 0) {
      const int agent = pos / S;
      if (++choice[pos] < game.action_count(agent)) break;
      choice[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

/// Dirichlet(1,...,1) rows for interior probe policies.
inline JointPolicy random_policy(const MarkovGame& game, Philox& rng) {
  std::vector<Mat> rows;
  rows.reserve(game.num_agents());
  for (int i = 0; i < game.num_agents(); ++i) {
    Mat pi(game.num_states(), game.action_count(i));
    for (int s = 0; s < game.num_states(); ++s) {
      double sum = 0.0;
      for (int a = 0; a < game.action_count(i); ++a) {
        const double e = -std::log1p(-rng.next_double());
        pi(s, a) = e;
        sum += e;
      }
      if (sum <= 0.0)
        pi.row(s).setConstant(1.0 / game.action_count(i));
      else
        pi.row(s) /= sum;
    }
    rows.push_back(std::move(pi));
  }
  return JointPolicy(std::move(rows));
}

namespace detail {

inline double second_eigenvalue_modulus(const Mat& chain) {
  const int S = static_cast<int>(chain.rows());
  if (S == 1) return 0.0;
  Eigen::EigenSolver<Mat> es(chain, /*computeEigenvectors=*/false);
  std::vector<double> mods(S);
  for (int k = 0; k < S; ++k) mods[k] = std::abs(es.eigenvalues()[k]);
  std::sort(mods.begin(), mods.end(), std::greater<double>());
  return mods[1];
}

/// Half-span of the marginalized differential Q, maximized in closed form
/// over every reward function in [0,1]^{S x A}. The map r -> Qbar_{i,r} is
/// linear for a fixed policy; for each ordered row pair the maximizing
/// reward is the indicator of the positive part of the weight difference.
inline double kappa_candidate(const MarkovGame& game, const JointPolicy& policy, const Mat& chain,
                              const Vec& nu) {
  const int S = game.num_states();
  const int J = game.num_joint_actions();
  const int SJ = S * J;
  const Mat p_inf = infinite_step_matrix(nu);
  Eigen::FullPivLU<Mat> lu(Mat::Identity(S, S) - chain + p_inf);
  if (!lu.isInvertible())
    throw SingularSystemError("kappa_candidate: fundamental matrix is singular");

  // r^pi = W r with r flattened (s, a) row-major.
  Mat W = Mat::Zero(S, SJ);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) W(s, s * J + j) = policy.joint_probability(game, s, j);
  const Eigen::RowVectorXd rho_row = nu.transpose() * W;
  const Mat v_map = lu.solve(W - p_inf * W);  // S x SJ
  Mat pv_map(S * J, SJ);                      // row (s,j): P(.|s,j) * v_map
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) pv_map.row(s * J + j) = game.transition_row(s, j) * v_map;

  double best = 0.0;
  for (int i = 0; i < game.num_agents(); ++i) {
    const int Ai = game.action_count(i);
    Mat M = Mat::Zero(S * Ai, SJ);
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < J; ++j) {
        const double w = policy.others_probability(game, s, j, i);
        if (w == 0.0) continue;
        auto row = M.row(s * Ai + game.agent_action(j, i));
        row += w * (pv_map.row(s * J + j) - rho_row);
        row[s * J + j] += w;
      }
    for (int e = 0; e < M.rows(); ++e)
      for (int f = 0; f < M.rows(); ++f) {
        if (e == f) continue;
        const double span = (M.row(e) - M.row(f)).cwiseMax(0.0).sum();
        best = std::max(best, 0.5 * span);
      }
  }
  return best;
}

}  // namespace detail

inline GameConstants estimate_constants(const MarkovGame& game, const ConstantsOptions& opts = {},
                                        const std::vector<JointPolicy>* extra_probes = nullptr) {
  const int S = game.num_states();
  const int N = game.num_agents();
  const double a_max = game.max_action_count();

  double det_count = 1.0;
  for (int i = 0; i < N; ++i) det_count *= std::pow(game.action_count(i), S);
  const bool enumerated = det_count <= opts.enumeration_budget;

  std::vector<JointPolicy> probes;
  if (enumerated) {
    probes = enumerate_deterministic_policies(game);
  } else {
    Philox rng(opts.seed, /*stream=*/0x636f6e73u);
    probes.push_back(JointPolicy::uniform(game));
    for (int k = 0; k < opts.sample_budget; ++k) probes.push_back(random_policy(game, rng));
  }
  if (extra_probes != nullptr)
    probes.insert(probes.end(), extra_probes->begin(), extra_probes->end());

  const bool exact_search = enumerated && game.structure().action_independent;
  const Provenance search_prov =
      exact_search ? Provenance::exact : Provenance::sampled_lower_bound;

  double min_nu = 1.0;
  double max_lambda2 = 0.0;
  double max_kappa1 = 0.0;
  double max_kappa = 0.0;
  Vec nu_max = Vec::Constant(S, 0.0);
  Vec nu_min = Vec::Constant(S, 1.0);
  double rho_min = 1.0, rho_max = 0.0;
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = -std::numeric_limits<double>::infinity();
  const bool track_phi =
      game.potential() && (game.structure().action_independent || game.structure().state_potential);

  for (const JointPolicy& pol : probes) {
    const Mat chain = induced_state_chain(game, pol).state;
    const Vec nu = stationary_distribution(chain);
    min_nu = std::min(min_nu, nu.minCoeff());
    nu_max = nu_max.cwiseMax(nu);
    nu_min = nu_min.cwiseMin(nu);
    max_lambda2 = std::max(max_lambda2, detail::second_eigenvalue_modulus(chain));
    const Mat p_inf = infinite_step_matrix(nu);
    Eigen::FullPivLU<Mat> lu(Mat::Identity(S, S) - chain + p_inf);
    if (!lu.isInvertible())
      throw SingularSystemError("estimate_constants: fundamental matrix is singular");
    max_kappa1 = std::max(max_kappa1, lu.inverse().cwiseAbs().rowwise().sum().maxCoeff());
    if (!opts.skip_kappa_search)
      max_kappa = std::max(max_kappa, detail::kappa_candidate(game, pol, chain, nu));
    if (game.structure().cooperative || track_phi) {
      const double rho = nu.dot(marginal_reward(game, pol, 0).state[0]);
      rho_min = std::min(rho_min, rho);
      rho_max = std::max(rho_max, rho);
      if (track_phi) {
        OracleReport rep;  // potential needs only nu here
        rep.nu = nu;
        const double phi = potential_value_from_report(game, pol, rep);
        phi_min = std::min(phi_min, phi);
        phi_max = std::max(phi_max, phi);
      }
    }
  }

  GameConstants c;
  c.gamma = {1.0 - min_nu, search_prov};
  c.kappa0 = {max_lambda2 >= 1.0 ? std::numeric_limits<double>::infinity()
                                 : 1.0 / (1.0 - max_lambda2),
              search_prov};
  c.kappa1 = {max_kappa1, search_prov};
  const double one_minus_gamma = 1.0 - c.gamma.value;
  c.c_p = {std::min(std::sqrt(S / one_minus_gamma), 1.0 / one_minus_gamma), c.gamma.provenance};
  c.varrho = {1.0 - 1.0 / c.kappa0.value, c.kappa0.provenance};
  if (opts.skip_kappa_search)
    c.kappa = {c.c_p.value * c.kappa0.value, Provenance::analytic_upper_bound};
  else
    c.kappa = {max_kappa, search_prov};
  c.kappa_q = {c.kappa.value + 2.0 * c.kappa1.value +
                   S * c.kappa1.value * (c.kappa.value + c.kappa1.value) +
                   S * c.kappa.value * c.kappa1.value * c.kappa1.value,
               weakest(c.kappa.provenance, c.kappa1.provenance)};

  double d = 1.0;
  for (int s = 0; s < S; ++s) d = std::max(d, nu_max[s] / nu_min[s]);
  c.mismatch = {d, search_prov};

  const double k0 = c.kappa0.value;
  c.smooth_rho = {k0 * k0 * std::pow(S, 1.5) * a_max + k0 * std::sqrt(double(S)) * a_max,
                  c.kappa0.provenance};
  c.smooth_potential = {N * (k0 * k0 * std::pow(S, 1.5) * a_max + k0 * (S * a_max + 2.0 * a_max) +
                             a_max),
                        c.kappa0.provenance};

  if (game.structure().cooperative) {
    const double span = rho_max - rho_min;
    c.potential_span =
        span >= 1.0 ? Constant{1.0, Provenance::analytic_upper_bound}
                    : Constant{span, Provenance::sampled_lower_bound};
  } else if (track_phi) {
    const double span = phi_max - phi_min;
    c.potential_span = span >= double(N) ? Constant{double(N), Provenance::analytic_upper_bound}
                                         : Constant{span, Provenance::sampled_lower_bound};
  } else {
    c.potential_span = {double(N), Provenance::analytic_upper_bound};
  }
  return c;
}

}  // namespace ampg
