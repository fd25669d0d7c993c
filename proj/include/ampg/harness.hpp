#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ampg/algorithms.hpp"
#include "ampg/generators.hpp"
#include "ampg/log.hpp"
#include "ampg/sampling.hpp"
#include "ampg/serialization.hpp"

namespace ampg {

/// One experiment: a game source, an algorithm, a rate, a horizon, and a
/// list of seeds fanned out to a worker pool. Every run streams its own CSV;
/// aggregation happens once all seeds finish.
struct ExperimentConfig {
  std::string name = "experiment";
  // exactly one game source
  std::string game_file;
  std::string fixture;  // "manual"
  std::optional<GeneratorSpec> generator;

  AlgorithmId algorithm = AlgorithmId::pg;
  LearningRateRule::Kind rate_kind = LearningRateRule::Kind::manual;
  std::optional<double> manual_beta;
  std::optional<StepSchedule> schedule;

  long T = 100;
  long eval_every = 10;
  EstimatorInfo estimator{1000, 1000, 50, 50000, 0.01};
  std::vector<std::uint64_t> seeds = {0};
  std::string outdir = "out";
  int threads = 1;
  bool track_l1 = true;  // sampled_pg: record the l1 distance to a reference policy
};

inline AlgorithmId algorithm_from_name(const std::string& s) {
  if (s == "pg") return AlgorithmId::pg;
  if (s == "proxq") return AlgorithmId::proxq;
  if (s == "npg") return AlgorithmId::npg;
  if (s == "sampled_pg") return AlgorithmId::sampled_pg;
  if (s == "sampled_proxq") return AlgorithmId::sampled_proxq;
  throw Error("unknown algorithm id: " + s);
}

inline GeneratorSpec generator_spec_from_json(const Json& g) {
  GeneratorSpec spec;
  spec.num_states = g.at("num_states").get<int>();
  spec.action_counts = g.at("action_counts").get<std::vector<int>>();
  if (g.contains("lvr")) {
    const std::string m = g.at("lvr").get<std::string>();
    spec.lvr = m == "small" ? LvrMode::small : m == "medium" ? LvrMode::medium : LvrMode::large;
  }
  if (g.contains("reward_gap")) {
    const std::string m = g.at("reward_gap").get<std::string>();
    spec.reward_gap = m == "small_near_tie" ? RewardGapMode::small_near_tie
                      : m == "large"        ? RewardGapMode::large
                                            : RewardGapMode::small_uniform;
  }
  if (g.contains("rare_fraction")) spec.rare_fraction = parse_double(g.at("rare_fraction"));
  if (g.contains("structure")) {
    const std::string m = g.at("structure").get<std::string>();
    spec.structure = m == "action_independent" ? StructureKind::action_independent
                     : m == "state_potential"  ? StructureKind::state_potential
                                               : StructureKind::cooperative;
  }
  if (g.contains("seed")) spec.seed = g.at("seed").get<std::uint64_t>();
  return spec;
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  if (j.contains("name")) cfg.name = j.at("name").get<std::string>();
  const Json& game = j.at("game");
  if (game.contains("file")) cfg.game_file = game.at("file").get<std::string>();
  else if (game.contains("fixture")) cfg.fixture = game.at("fixture").get<std::string>();
  else if (game.contains("generator")) cfg.generator = generator_spec_from_json(game.at("generator"));
  else throw Error("config: game must name a file, a fixture, or a generator");

  cfg.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
  if (j.contains("rate")) {
    const Json& r = j.at("rate");
    if (r.contains("rule")) {
      const std::string k = r.at("rule").get<std::string>();
      cfg.rate_kind = k == "pg"      ? LearningRateRule::Kind::pg
                      : k == "proxq" ? LearningRateRule::Kind::proxq
                      : k == "npg"   ? LearningRateRule::Kind::npg
                                     : LearningRateRule::Kind::manual;
    }
    if (r.contains("beta")) {
      cfg.rate_kind = LearningRateRule::Kind::manual;
      cfg.manual_beta = parse_double(r.at("beta"));
    }
    if (r.contains("schedule")) {
      const Json& s = r.at("schedule");
      StepSchedule sched;
      if (s.is_array()) {
        for (const auto& e : s) sched.entries.emplace_back(e[0].get<long>(), parse_double(e[1]));
      } else {
        sched = StepSchedule::geometric(parse_double(s.at("first")), parse_double(s.at("last")),
                                        s.at("block").get<long>(),
                                        s.contains("horizon") ? s.at("horizon").get<long>()
                                                              : j.at("T").get<long>());
      }
      cfg.schedule = sched;
      cfg.rate_kind = LearningRateRule::Kind::manual;
    }
  }
  if (j.contains("T")) cfg.T = j.at("T").get<long>();
  if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every").get<long>();
  if (j.contains("estimator")) {
    const Json& e = j.at("estimator");
    if (e.contains("K")) cfg.estimator.K = e.at("K").get<long>();
    if (e.contains("N1")) cfg.estimator.N1 = e.at("N1").get<long>();
    if (e.contains("N2")) cfg.estimator.N2 = e.at("N2").get<long>();
    if (e.contains("B")) cfg.estimator.B = e.at("B").get<long>();
    if (e.contains("alpha")) cfg.estimator.alpha = parse_double(e.at("alpha"));
  }
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("outdir")) cfg.outdir = j.at("outdir").get<std::string>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("track_l1")) cfg.track_l1 = j.at("track_l1").get<bool>();
  if (cfg.seeds.empty()) throw Error("config: seed list must be non-empty");
  return cfg;
}

inline MarkovGame load_game(const ExperimentConfig& cfg) {
  if (!cfg.game_file.empty()) {
    std::ifstream in(cfg.game_file);
    if (!in) throw Error("config: game file does not exist: " + cfg.game_file);
    Json j;
    in >> j;
    return game_from_json(j);
  }
  if (!cfg.fixture.empty()) {
    if (cfg.fixture == "manual") return manual_fixture();
    throw Error("config: unknown fixture: " + cfg.fixture);
  }
  if (cfg.generator) return generate(*cfg.generator);
  throw Error("config: no game source");
}

/// Reference equilibrium: multiplicative-weights ascent at its prescribed
/// rate until the Nash gap falls below `target_gap` (checked every
/// `check_every` iterations), starting from `warm_start` when given.
struct ReferencePolicy {
  JointPolicy policy;
  double gap = 0.0;
  long iterations = 0;
};

inline ReferencePolicy reference_policy(const MarkovGame& game, double target_gap = 1e-10,
                                        long max_iters = 1000000,
                                        const JointPolicy* warm_start = nullptr,
                                        long check_every = 50) {
  const GameConstants constants = estimate_constants(game);
  const double beta = make_rate_rule(LearningRateRule::Kind::npg, constants, game).beta;
  JointPolicy policy = warm_start ? *warm_start : JointPolicy::uniform(game);
  double gap = nash_gap(game, policy).gap;
  if (gap <= target_gap) return ReferencePolicy{policy, gap, 0};
  for (long t = 1; t <= max_iters; ++t) {
    policy = npg_step(game, policy, beta).policy;
    if (t % check_every == 0 || t == max_iters) {
      gap = nash_gap(game, policy).gap;
      if (gap <= target_gap) return ReferencePolicy{policy, gap, t};
    }
  }
  throw NoConvergenceError("reference_policy: gap target not reached within the iteration cap");
}

namespace detail {

/// Streams a trace as CSV: the fixed schema plus the estimator columns for
/// sample-based runs.
class CsvTraceWriter {
 public:
  CsvTraceWriter(const std::filesystem::path& path, AlgorithmId algorithm, std::uint64_t seed,
                 const std::optional<EstimatorInfo>& estimator)
      : out_(path), algorithm_(algorithm), seed_(seed), estimator_(estimator) {
    if (!out_) throw Error("cannot open trace file " + path.string());
    out_ << "t,phi,nash_gap,c_t,beta,algorithm,seed";
    if (estimator_) out_ << ",K,N1,N2,B,alpha";
    out_ << "\n";
  }

  void append(const RunTrace& trace) {
    for (size_t k = written_; k < trace.points.size(); ++k) {
      const TracePoint& p = trace.points[k];
      out_ << p.t << ',' << format_double(p.phi) << ',' << format_double(p.nash_gap) << ','
           << format_double(p.c_t) << ',' << format_double(p.beta) << ','
           << algorithm_name(algorithm_) << ',' << seed_;
      if (estimator_)
        out_ << ',' << estimator_->K << ',' << estimator_->N1 << ',' << estimator_->N2 << ','
             << estimator_->B << ',' << format_double(estimator_->alpha);
      out_ << "\n";
    }
    written_ = trace.points.size();
    out_.flush();
  }

 private:
  std::ofstream out_;
  AlgorithmId algorithm_;
  std::uint64_t seed_;
  std::optional<EstimatorInfo> estimator_;
  size_t written_ = 0;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

inline double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

}  // namespace detail

struct ExperimentResult {
  std::vector<std::filesystem::path> trace_files;
  std::filesystem::path summary_file;
  std::vector<RunTrace> traces;
};

/// Runs all seeds (bounded worker pool), one streamed CSV per seed, then a
/// single-threaded reduce into summary.json with per-iteration mean and
/// standard deviation of the gap, the potential, and (when tracked) the l1
/// distance to the reference policy.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const MarkovGame game = load_game(cfg);

  StepSchedule schedule = StepSchedule::constant(cfg.manual_beta.value_or(0.0));
  std::string rate_provenance = "manual";
  if (cfg.schedule) {
    schedule = *cfg.schedule;
    rate_provenance = "schedule";
  } else if (cfg.rate_kind != LearningRateRule::Kind::manual) {
    const GameConstants constants = estimate_constants(game);
    const LearningRateRule rule = make_rate_rule(cfg.rate_kind, constants, game);
    schedule = StepSchedule::constant(rule.beta);
    rate_provenance = provenance_name(constants.kappa.provenance);
  }

  std::optional<JointPolicy> reference;
  const bool sampled = cfg.algorithm == AlgorithmId::sampled_pg ||
                       cfg.algorithm == AlgorithmId::sampled_proxq;
  if (sampled && cfg.track_l1) {
    try {
      reference = reference_policy(game).policy;
    } catch (const Error& e) {
      log::warn(std::string("run_experiment: no reference policy, l1 column skipped: ") +
                e.what());
    }
  }

  const fs::path dir = fs::path(cfg.outdir) / cfg.name;
  fs::create_directories(dir);

  std::vector<RunTrace> traces(cfg.seeds.size());
  std::vector<std::string> errors(cfg.seeds.size());
  std::vector<fs::path> files(cfg.seeds.size());
  std::atomic<size_t> next{0};

  auto run_one = [&](size_t idx) {
    const std::uint64_t seed = cfg.seeds[idx];
    files[idx] = dir / ("seed-" + std::to_string(seed) + ".csv");
    std::optional<EstimatorInfo> est;
    if (sampled) {
      est = cfg.estimator;
      if (cfg.algorithm == AlgorithmId::sampled_pg) est->B = 0;
      else est->K = est->N2 = 0;
    }
    detail::CsvTraceWriter writer(files[idx], cfg.algorithm, seed, est);
    const TraceSink sink = [&writer](const RunTrace& t) { writer.append(t); };
    RunTrace trace;
    switch (cfg.algorithm) {
      case AlgorithmId::pg:
      case AlgorithmId::proxq:
      case AlgorithmId::npg:
        trace = run_oracle_algorithm(game, cfg.algorithm, cfg.T, schedule, cfg.eval_every,
                                     reference ? &*reference : nullptr, sink);
        break;
      case AlgorithmId::sampled_pg: {
        SampledPgConfig c;
        c.T = cfg.T;
        c.schedule = schedule;
        c.K = cfg.estimator.K;
        c.N1 = cfg.estimator.N1;
        c.N2 = cfg.estimator.N2;
        c.alpha = cfg.estimator.alpha;
        c.eval_every = cfg.eval_every;
        c.seed = seed;
        c.reference = reference ? &*reference : nullptr;
        c.sink = sink;
        trace = run_sampled_pg(game, c);
        break;
      }
      case AlgorithmId::sampled_proxq: {
        SampledProxQConfig c;
        c.T = cfg.T;
        c.schedule = schedule;
        c.B = cfg.estimator.B;
        c.N1 = cfg.estimator.N1;
        c.alpha = cfg.estimator.alpha;
        c.eval_every = cfg.eval_every;
        c.seed = seed;
        c.reference = reference ? &*reference : nullptr;
        c.sink = sink;
        trace = run_sampled_proxq(game, c);
        break;
      }
    }
    trace.seed = seed;
    trace.rate_provenance = rate_provenance;
    traces[idx] = std::move(trace);
  };

  const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(cfg.seeds.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const size_t idx = next.fetch_add(1);
        if (idx >= cfg.seeds.size()) return;
        try {
          run_one(idx);
        } catch (const std::exception& e) {
          errors[idx] = e.what();
        }
      }
    });
  for (std::thread& t : pool) t.join();

  for (size_t k = 0; k < errors.size(); ++k)
    if (!errors[k].empty())
      throw Error("seed " + std::to_string(cfg.seeds[k]) + " failed: " + errors[k]);

  // single-threaded reduce
  Json summary;
  summary["experiment"] = cfg.name;
  summary["algorithm"] = algorithm_name(cfg.algorithm);
  summary["rate_provenance"] = rate_provenance;
  summary["seeds"] = cfg.seeds;
  Json points = Json::array();
  const size_t n_points = traces.front().points.size();
  for (size_t k = 0; k < n_points; ++k) {
    std::vector<double> gaps, phis, l1s;
    for (const RunTrace& t : traces) {
      gaps.push_back(t.points[k].nash_gap);
      phis.push_back(t.points[k].phi);
      if (k < t.l1_to_reference.size()) l1s.push_back(t.l1_to_reference[k]);
    }
    Json p;
    p["t"] = traces.front().points[k].t;
    p["nash_gap_mean"] = format_double(detail::mean_of(gaps));
    p["nash_gap_std"] = format_double(detail::std_of(gaps));
    p["phi_mean"] = format_double(detail::mean_of(phis));
    p["phi_std"] = format_double(detail::std_of(phis));
    if (!l1s.empty()) {
      p["l1_mean"] = format_double(detail::mean_of(l1s));
      p["l1_std"] = format_double(detail::std_of(l1s));
    }
    points.push_back(p);
  }
  summary["points"] = points;
  Json per_seed = Json::array();
  for (const RunTrace& t : traces) {
    Json s;
    s["seed"] = t.seed;
    s["nash_regret"] = format_double(t.nash_regret());
    s["nash_regret_sq"] = format_double(t.nash_regret_sq());
    s["min_gap"] = format_double(t.min_gap());
    per_seed.push_back(s);
  }
  summary["per_seed"] = per_seed;

  ExperimentResult result;
  result.trace_files = files;
  result.traces = std::move(traces);
  result.summary_file = dir / "summary.json";
  std::ofstream out(result.summary_file);
  out << summary.dump(2) << "\n";
  return result;
}

}  // namespace ampg
