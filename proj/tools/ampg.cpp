// Command-line harness: game generation, experiment runs, the property
// suite, one-shot gap evaluation, and constants estimation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ampg/constants.hpp"
#include "ampg/generators.hpp"
#include "ampg/harness.hpp"
#include "ampg/oracle.hpp"
#include "ampg/serialization.hpp"
#include "ampg/verification.hpp"

namespace {

ampg::Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ampg::Error("cannot open " + path);
  ampg::Json j;
  in >> j;
  return j;
}

void write_json(const std::string& path, const ampg::Json& j) {
  std::ofstream out(path);
  if (!out) throw ampg::Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

ampg::MarkovGame load_game_file(const std::string& path) {
  if (path == "manual") return ampg::manual_fixture();
  return ampg::game_from_json(read_json(path));
}

const char* verdict_name(ampg::PropertyResult::Verdict v) {
  using V = ampg::PropertyResult::Verdict;
  return v == V::pass ? "pass" : v == V::fail ? "FAIL" : "info";
}

int cmd_verify(const std::string& game_path, const std::string& suite, const std::string& out) {
  const ampg::MarkovGame game = load_game_file(game_path);
  const ampg::GameConstants constants = ampg::estimate_constants(game);
  const auto results =
      ampg::run_verification_suite(game, constants, suite == "fast", /*seed=*/7, game_path);
  std::printf("%-26s %8s %14s %12s  %s\n", "property", "probes", "max violation", "tolerance",
              "verdict");
  ampg::Json report = ampg::Json::array();
  for (const auto& r : results) {
    std::printf("%-26s %8d %14.3e %12.1e  %s%s%s\n", r.property.c_str(), r.probes,
                r.max_violation, r.tolerance, verdict_name(r.verdict),
                r.note.empty() ? "" : "  # ", r.note.c_str());
    ampg::Json item;
    item["property"] = r.property;
    item["game"] = r.game_id;
    item["probes"] = r.probes;
    item["max_violation"] = ampg::format_double(r.max_violation);
    item["tolerance"] = ampg::format_double(r.tolerance);
    item["verdict"] = verdict_name(r.verdict);
    if (!r.note.empty()) item["note"] = r.note;
    report.push_back(item);
  }
  if (!out.empty()) write_json(out, report);
  return ampg::suite_passes(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"average-reward Markov potential game toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "generate a game from a spec file");
  std::string gen_spec, gen_out;
  gen->add_option("--spec", gen_spec, "generator spec JSON")->required();
  gen->add_option("--out", gen_out, "output game file")->required();

  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string run_config, run_out, run_seeds;
  int run_threads = 0;
  long run_eval = 0;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "override output directory");
  run->add_option("--seeds", run_seeds, "override seed list, comma separated");
  run->add_option("--threads", run_threads, "override worker count");
  run->add_option("--eval-every", run_eval, "override evaluation period");

  auto* verify = app.add_subcommand("verify", "run the property suite on a game");
  std::string verify_game, verify_suite = "full", verify_out;
  verify->add_option("--game", verify_game, "game file (or 'manual')")->required();
  verify->add_option("--suite", verify_suite, "full|fast")
      ->check(CLI::IsMember({"full", "fast"}));
  verify->add_option("--out", verify_out, "JSON report path");

  auto* gap = app.add_subcommand("gap", "Nash gap of a (game, policy) pair");
  std::string gap_game, gap_policy;
  gap->add_option("--game", gap_game, "game file (or 'manual')")->required();
  gap->add_option("--policy", gap_policy, "policy file; omit for the uniform policy");

  auto* consts = app.add_subcommand("constants", "estimate the game constants");
  std::string consts_game, consts_out;
  int consts_budget = 64;
  consts->add_option("--game", consts_game, "game file (or 'manual')")->required();
  consts->add_option("--budget", consts_budget, "stochastic probe budget");
  consts->add_option("--out", consts_out, "JSON output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const ampg::GeneratorSpec spec = ampg::generator_spec_from_json(read_json(gen_spec));
      const ampg::MarkovGame game = ampg::generate(spec);
      write_json(gen_out, ampg::game_to_json(game));
      std::printf("wrote %s (S=%d, N=%d)\n", gen_out.c_str(), game.num_states(),
                  game.num_agents());
      return 0;
    }
    if (run->parsed()) {
      ampg::ExperimentConfig cfg = ampg::config_from_json(read_json(run_config));
      if (!run_out.empty()) cfg.outdir = run_out;
      if (run_threads > 0) cfg.threads = run_threads;
      if (run_eval > 0) cfg.eval_every = run_eval;
      if (!run_seeds.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(run_seeds);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
      }
      const ampg::ExperimentResult result = ampg::run_experiment(cfg);
      std::printf("wrote %zu trace(s) and %s\n", result.trace_files.size(),
                  result.summary_file.string().c_str());
      return 0;
    }
    if (verify->parsed()) return cmd_verify(verify_game, verify_suite, verify_out);
    if (gap->parsed()) {
      const ampg::MarkovGame game = load_game_file(gap_game);
      const ampg::JointPolicy policy =
          gap_policy.empty() ? ampg::JointPolicy::uniform(game)
                             : ampg::policy_from_json(read_json(gap_policy), game);
      const ampg::NashGap result = ampg::nash_gap(game, policy);
      std::printf("nash_gap %s\n", ampg::format_double(result.gap).c_str());
      for (size_t i = 0; i < result.per_agent.size(); ++i)
        std::printf("agent %zu gap %s\n", i, ampg::format_double(result.per_agent[i]).c_str());
      return 0;
    }
    if (consts->parsed()) {
      const ampg::MarkovGame game = load_game_file(consts_game);
      ampg::ConstantsOptions opts;
      opts.sample_budget = consts_budget;
      const ampg::Json j = ampg::constants_to_json(ampg::estimate_constants(game, opts));
      if (consts_out.empty())
        std::cout << j.dump(2) << "\n";
      else
        write_json(consts_out, j);
      return 0;
    }
  } catch (const std::exception& e) {
    ampg::Json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
