#pragma once

// The operator commands behind the `iscr` executable. Each takes a resolved
// RunConfig and returns a process exit status; errors propagate as exceptions
// and are mapped to exit codes by exit_code_for().

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "iscr/cotrain.hpp"
#include "iscr/http_service.hpp"

namespace iscr {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const NotFoundError*>(&e))
    return kExitData;
  return kExitRuntime;
}

/// Empty data paths default to <output_dir>/data/{corpus,queries,topics}.jsonl.
inline RunConfig resolve_paths(RunConfig c) {
  const fs::path data = fs::path(c.output_dir) / "data";
  if (c.data.corpus.empty()) c.data.corpus = (data / "corpus.jsonl").string();
  if (c.data.queries.empty()) c.data.queries = (data / "queries.jsonl").string();
  if (c.data.topics.empty()) c.data.topics = (data / "topics.jsonl").string();
  return c;
}

inline fs::path trial_dir(const RunConfig& c, int trial) {
  return fs::path(c.output_dir) / ("trial_" + std::to_string(trial));
}

inline Dataset load_run_data(const RunConfig& c) { return load_dataset(c.data, load_options(c)); }

inline Split run_split(const RunConfig& c, const Dataset& data, int trial) {
  return split_for_trial(make_folds(data.queries.size(), c.training.folds, c.training.seed),
                         static_cast<std::size_t>(trial));
}

inline QLearner load_manager(const RunConfig& c, const fs::path& dir) {
  QLearner m(manager_input_width(c.episode.features), kSystemActionCount, c.manager.dqn, 0);
  m.load((dir / "manager.ckpt").string());
  return m;
}

inline DecisionMakerBank load_bank(const RunConfig& c, const fs::path& dir) {
  DecisionMakerBank b(c.episode.simulator_k, c.simulator.dqn, 0);
  b.load(dir);
  return b;
}

/// Logged traces of the configured trials; missing files are skipped.
inline std::vector<EpisodeTrace> logged_traces(const RunConfig& c) {
  std::vector<EpisodeTrace> out;
  for (int t : c.training.trials) {
    const fs::path p = trial_dir(c, t) / "traces.jsonl";
    if (!fs::exists(p)) continue;
    auto part = read_trace_file(p.string());
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------

inline int cmd_init_config(const std::string& preset_name, std::ostream& out) {
  out << to_json(preset(preset_name)).dump(2) << "\n";
  return kExitOk;
}

inline int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  const RunConfig c = resolve_paths(cfg);
  const Dataset ds = make_synthetic_dataset(c.synthetic);
  for (const auto& p : {c.data.corpus, c.data.queries, c.data.topics})
    if (fs::path(p).has_parent_path()) fs::create_directories(fs::path(p).parent_path());
  write_corpus_file(ds.corpus, c.data.corpus);
  write_query_file(ds.queries, c.data.queries);
  write_topic_file(ds.corpus, c.data.topics);
  out << "wrote " << ds.corpus.size() << " documents, " << ds.queries.size() << " queries, "
      << ds.corpus.topics().size() << " topics to " << fs::path(c.data.corpus).parent_path().string() << "\n";
  return kExitOk;
}

/// Trains every configured trial. Per trial: learning_curve.tsv, traces.jsonl,
/// manager.ckpt and (DQN simulator) simulator_*.ckpt.
inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& log = std::cerr) {
  const RunConfig c = resolve_paths(cfg);
  const Dataset data = load_run_data(c);
  fs::create_directories(c.output_dir);
  write_config(c, (fs::path(c.output_dir) / "config.json").string());
  for (int trial : c.training.trials) {
    const fs::path dir = trial_dir(c, trial);
    fs::create_directories(dir);
    JointTrainer trainer(data, c, run_split(c, data, trial));
    TraceLog traces((dir / "traces.jsonl").string());
    trainer.set_trace_sink([&](const EpisodeTrace& t, int epoch) { traces.write(t, epoch); });
    std::vector<EpochLog> curve;
    for (int epoch = 1; epoch <= c.training.epochs; ++epoch) {
      auto part = trainer.train_epoch(epoch);
      log << "trial " << trial << " " << format_epoch_row(part) << "\n";
      curve.push_back(part);
    }
    write_learning_curve(curve, (dir / "learning_curve.tsv").string());
    trainer.save_best(dir);
    out << "trial " << trial << ": best epoch " << trainer.best_epoch() << ", outputs in " << dir.string() << "\n";
  }
  return kExitOk;
}

struct EvalRow {
  int trial = 0;
  std::size_t queries = 0;
  double map = 0.0;
  double ret = 0.0;
  double success_rate = 0.0;
};

inline std::string format_eval_report(const RunConfig& c, const std::vector<EvalRow>& rows) {
  std::string s = "simulator\tmanager\tfeatures\tfold\tMAP\tReturn\n";
  char buf[256];
  double map = 0.0, ret = 0.0;
  const auto sim = to_string(c.simulator_kind), man = to_string(c.manager.dqn.variant),
             feat = to_string(c.episode.features.mode);
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%s\t%d\t%.4f\t%.4f\n", sim.c_str(), man.c_str(), feat.c_str(), r.trial,
                  r.map, r.ret);
    s += buf;
    map += r.map;
    ret += r.ret;
  }
  const double n = static_cast<double>(rows.size());
  std::snprintf(buf, sizeof buf, "%s\t%s\t%s\tmean\t%.4f\t%.4f\n", sim.c_str(), man.c_str(), feat.c_str(), map / n,
                ret / n);
  return s + buf;
}

/// Greedy rollouts of each trial's saved manager on that trial's test fold.
inline int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const RunConfig c = resolve_paths(cfg);
  const Dataset data = load_run_data(c);
  std::vector<EvalRow> rows;
  nlohmann::json report{{"simulator", to_string(c.simulator_kind)},
                        {"manager", to_string(c.manager.dqn.variant)},
                        {"features", to_string(c.episode.features.mode)},
                        {"folds", nlohmann::json::array()}};
  TraceLog traces((fs::path(c.output_dir) / "eval_traces.jsonl").string());
  for (int trial : c.training.trials) {
    const fs::path dir = trial_dir(c, trial);
    const QLearner manager = load_manager(c, dir);
    std::optional<DecisionMakerBank> bank;
    std::unique_ptr<UserSimulator> sim;
    if (c.simulator_kind == SimulatorKind::Dqn) {
      bank.emplace(load_bank(c, dir));
      sim = std::make_unique<DqnSimulator>(*bank);
    } else {
      sim = std::make_unique<RuleBasedSimulator>();
    }
    const Split split = run_split(c, data, trial);
    const Evaluation ev = evaluate(data, split.test, manager, *sim, c.episode,
                                   derive_seed(c.training.seed, 0x7E57 + static_cast<std::uint64_t>(trial)));
    for (auto t : ev.traces) {
      t.phase = "test";
      traces.write(t, 0);
    }
    rows.push_back({trial, split.test.size(), ev.mean_map, ev.mean_return, ev.success_rate});
    report["folds"].push_back({{"trial", trial},
                               {"queries", split.test.size()},
                               {"map", ev.mean_map},
                               {"return", ev.mean_return},
                               {"success_rate", ev.success_rate}});
  }
  double map = 0.0, ret = 0.0;
  for (const auto& r : rows) map += r.map, ret += r.ret;
  report["mean"] = {{"map", map / static_cast<double>(rows.size())}, {"return", ret / static_cast<double>(rows.size())}};
  std::ofstream(fs::path(c.output_dir) / "eval_report.json") << report.dump(2) << "\n";
  const std::string table = format_eval_report(c, rows);
  std::ofstream(fs::path(c.output_dir) / "eval_report.tsv") << table;
  out << table;
  return kExitOk;
}

inline std::vector<Scenario> run_scenarios(const RunConfig& c) {
  auto scenarios = extract_scenarios(logged_traces(c), c.compare.min_relevant_in_top, c.compare.max_scenarios);
  if (scenarios.empty())
    throw ValidationError("no logged document turn has " + std::to_string(c.compare.min_relevant_in_top) +
                          " relevant documents in view; run train first");
  return scenarios;
}

inline std::vector<std::string> human_choice_paths(const RunConfig& c) {
  if (!c.compare.human_choice_files.empty()) return c.compare.human_choice_files;
  const fs::path served = fs::path(c.output_dir) / "human_choices.jsonl";
  if (fs::exists(served)) return {served.string()};
  return {};
}

/// Rule-based user, the trained decision maker (DQN runs only) and pooled
/// human choices on the same scenarios; pairwise KL and per-responder entropy.
inline int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  const RunConfig c = resolve_paths(cfg);
  const Dataset data = load_run_data(c);
  const auto scenarios = run_scenarios(c);
  BehaviorReport report;
  report.smoothing = c.compare.kl_smoothing;
  report.scenarios = scenarios.size();
  Rng rng(derive_seed(c.training.seed, 0xC0DE));
  const RuleBasedSimulator rule;
  report.rule = action_distribution(simulator_responder(rule, data, 0.0), scenarios, c.compare.samples_per_scenario, rng);
  if (c.simulator_kind == SimulatorKind::Dqn) {
    const DecisionMakerBank bank = load_bank(c, trial_dir(c, c.training.trials.front()));
    const DqnSimulator ours(bank);
    report.ours = action_distribution(simulator_responder(ours, data, c.compare.simulator_epsilon), scenarios,
                                      c.compare.samples_per_scenario, rng);
  }
  std::vector<HumanChoice> human;
  for (const auto& p : human_choice_paths(c)) {
    auto part = read_human_choices(p);
    human.insert(human.end(), part.begin(), part.end());
  }
  if (!human.empty()) report.human = pooled_distribution(human);
  std::ofstream(fs::path(c.output_dir) / "compare_report.json") << to_json(report).dump(2) << "\n";
  out << format_behavior_report(report);
  return kExitOk;
}

inline nlohmann::json model_info(const RunConfig& c, int trial) {
  return {{"trial", trial},
          {"manager",
           {{"variant", to_string(c.manager.dqn.variant)},
            {"hidden", c.manager.dqn.hidden},
            {"inputs", manager_input_width(c.episode.features)},
            {"checkpoint", (trial_dir(c, trial) / "manager.ckpt").string()}}},
          {"simulator_kind", to_string(c.simulator_kind)},
          {"features", to_string(c.episode.features.mode)},
          {"max_turns", c.episode.termination.max_turns},
          {"map_threshold", c.episode.termination.map_threshold},
          {"utterances",
           {{"return_documents", kDocumentsUtterance},
            {"return_key_term", key_term_utterance("<term>")},
            {"return_request", kRequestUtterance},
            {"return_topic", kTopicUtterance}}}};
}

/// Serves the first configured trial's manager until the process is stopped.
inline int cmd_serve(const RunConfig& cfg, std::ostream& out) {
  const RunConfig c = resolve_paths(cfg);
  const Dataset data = load_run_data(c);
  const int trial = c.training.trials.front();
  const QLearner manager = load_manager(c, trial_dir(c, trial));
  const auto traces = logged_traces(c);
  const auto scenarios = extract_scenarios(traces, kChoiceCount, c.compare.max_scenarios);
  HumanEval humaneval(data, scenarios, c.serve.humaneval_tasks,
                      (fs::path(c.output_dir) / "human_choices.jsonl").string());
  SessionManager sessions(data, manager, c.episode,
                          {c.serve.idle_minutes, (fs::path(c.output_dir) / "sessions.jsonl").string(), c.training.seed});
  HttpService service(data, sessions, humaneval, model_info(c, trial), c.serve.static_dir);
  out << "serving " << data.queries.size() << " queries and " << humaneval.task_count()
      << " evaluation tasks on http://" << c.serve.host << ":" << c.serve.port << "/api/v1\n"
      << std::flush;
  service.listen(c.serve.host, c.serve.port);
  return kExitOk;
}

}  // namespace iscr
