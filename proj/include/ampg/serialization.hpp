#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampg/constants.hpp"
#include "ampg/game.hpp"
#include "ampg/oracle.hpp"

namespace ampg {

using Json = nlohmann::json;

/// Doubles travel as decimal strings with 17 significant digits, which
/// round-trips every finite double bit-exactly and keeps files
/// language-neutral and diff-able.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return std::strtod(j.get<std::string>().c_str(), nullptr);
  throw Error("expected a number or a decimal string");
}

inline Json matrix_to_json(const Mat& m) {
  Json out = Json::array();
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) out.push_back(format_double(m(r, c)));
  return out;
}

inline Mat matrix_from_json(const Json& j, long rows, long cols) {
  if (static_cast<long>(j.size()) != rows * cols) throw Error("matrix payload has wrong size");
  Mat m(rows, cols);
  long k = 0;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = parse_double(j[k++]);
  return m;
}

inline Json vector_to_json(const Vec& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(format_double(v[i]));
  return out;
}

inline Json structure_to_json(const StructureTag& tag) {
  Json out = Json::array();
  if (tag.cooperative) out.push_back("cooperative");
  if (tag.action_independent) out.push_back("action_independent_transitions");
  if (tag.state_potential) out.push_back("state_potential");
  if (out.empty()) out.push_back("general");
  return out;
}

inline StructureTag structure_from_json(const Json& j) {
  StructureTag tag;
  auto apply = [&tag](const std::string& s) {
    if (s == "cooperative") tag.cooperative = true;
    else if (s == "action_independent_transitions") tag.action_independent = true;
    else if (s == "state_potential") tag.state_potential = true;
    else if (s != "general") throw Error("unknown structure tag: " + s);
  };
  if (j.is_string()) apply(j.get<std::string>());
  else
    for (const auto& item : j) apply(item.get<std::string>());
  return tag;
}

/// Game file: transition flattened row-major in index order
/// (state, a_1, ..., a_N, next-state); rewards one flat (state, joint-action)
/// block per agent; optional stored potential in the reward layout.
inline Json game_to_json(const MarkovGame& game) {
  Json out;
  out["num_states"] = game.num_states();
  out["action_counts"] = game.action_counts();
  out["transition"] = matrix_to_json(game.transition());
  Json rewards = Json::array();
  for (int i = 0; i < game.num_agents(); ++i) rewards.push_back(matrix_to_json(game.reward(i)));
  out["rewards"] = rewards;
  out["structure_tag"] = structure_to_json(game.structure());
  if (game.potential()) out["potential"] = matrix_to_json(*game.potential());
  return out;
}

inline MarkovGame game_from_json(const Json& j) {
  const int S = j.at("num_states").get<int>();
  const std::vector<int> counts = j.at("action_counts").get<std::vector<int>>();
  long joint = 1;
  for (int a : counts) joint *= a;
  Mat transition = matrix_from_json(j.at("transition"), static_cast<long>(S) * joint, S);
  std::vector<Mat> rewards;
  for (const auto& r : j.at("rewards")) rewards.push_back(matrix_from_json(r, S, joint));
  StructureTag tag;
  if (j.contains("structure_tag")) tag = structure_from_json(j.at("structure_tag"));
  std::optional<Mat> potential;
  if (j.contains("potential")) potential = matrix_from_json(j.at("potential"), S, joint);
  return MarkovGame(S, counts, std::move(transition), std::move(rewards), tag,
                    std::move(potential));
}

/// Policies serialize as a list of row-major S x A_i matrices.
inline Json policy_to_json(const JointPolicy& policy) {
  Json out = Json::array();
  for (int i = 0; i < policy.num_agents(); ++i) out.push_back(matrix_to_json(policy.agent(i)));
  return out;
}

inline JointPolicy policy_from_json(const Json& j, const MarkovGame& game) {
  if (static_cast<int>(j.size()) != game.num_agents())
    throw Error("policy file agent count does not match game");
  std::vector<Mat> rows;
  for (int i = 0; i < game.num_agents(); ++i)
    rows.push_back(matrix_from_json(j[i], game.num_states(), game.action_count(i)));
  return JointPolicy(std::move(rows));
}

/// Full oracle dump for a (game, policy) pair: stationary distribution,
/// gains, differential values, joint and marginalized Q, advantages, and
/// per-agent gradients.
inline Json oracle_report_to_json(const MarkovGame& game, const JointPolicy& policy) {
  const OracleReport rep = compute_report(game, policy);
  Json out;
  out["nu"] = vector_to_json(rep.nu);
  Json rho = Json::array();
  for (double r : rep.rho) rho.push_back(format_double(r));
  out["rho"] = rho;
  Json value = Json::array(), q = Json::array(), qbar = Json::array(), abar = Json::array(),
       grad = Json::array();
  for (int i = 0; i < game.num_agents(); ++i) {
    value.push_back(vector_to_json(rep.value[i]));
    q.push_back(matrix_to_json(rep.q[i]));
    Json per_actor = Json::array();
    for (int jagent = 0; jagent < game.num_agents(); ++jagent)
      per_actor.push_back(matrix_to_json(marginal_q_from_report(game, policy, rep, jagent, i).qbar));
    qbar.push_back(per_actor);
    abar.push_back(matrix_to_json(marginal_q_from_report(game, policy, rep, i, i).abar));
    grad.push_back(matrix_to_json(policy_gradient_from_report(game, policy, rep, i, i)));
  }
  out["value"] = value;
  out["q"] = q;
  out["qbar"] = qbar;  // qbar[i][j] = Qbar_{j;i}, acting agent j, reward agent i
  out["abar"] = abar;
  out["gradient"] = grad;
  return out;
}

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::sampled_lower_bound: return "sampled_lower_bound";
    case Provenance::analytic_upper_bound: return "analytic_upper_bound";
  }
  return "?";
}

inline Json constant_to_json(const Constant& c) {
  return Json{{"value", format_double(c.value)}, {"provenance", provenance_name(c.provenance)}};
}

inline Json constants_to_json(const GameConstants& c) {
  Json out;
  out["gamma"] = constant_to_json(c.gamma);
  out["kappa0"] = constant_to_json(c.kappa0);
  out["c_p"] = constant_to_json(c.c_p);
  out["varrho"] = constant_to_json(c.varrho);
  out["kappa"] = constant_to_json(c.kappa);
  out["kappa1"] = constant_to_json(c.kappa1);
  out["kappa_q"] = constant_to_json(c.kappa_q);
  out["mismatch"] = constant_to_json(c.mismatch);
  out["smooth_rho"] = constant_to_json(c.smooth_rho);
  out["smooth_potential"] = constant_to_json(c.smooth_potential);
  out["potential_span"] = constant_to_json(c.potential_span);
  return out;
}

}  // namespace ampg
