#pragma once

// Run configuration: one JSON document holding every tunable of a run.
// Unknown keys are rejected so that typos fail loudly instead of silently
// falling back to a default.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "iscr/episode.hpp"
#include "iscr/synthetic.hpp"
#include "json.hpp"

namespace iscr {

struct AgentConfig {
  QLearnerConfig dqn;
};

struct TrainingConfig {
  std::size_t updates_per_phase = 500;  // C
  int epochs = 20;
  std::size_t episodes_per_update = 1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.2;  // share of the run over which epsilon decays linearly
  std::uint64_t seed = 1;
  std::size_t folds = 10;
  std::vector<int> trials{0};  // which cross-validation trials cmd_train runs
  std::size_t max_episodes_factor = 1000;  // phase aborts after factor * C episodes without enough updates
};

struct CompareConfig {
  double kl_smoothing = 1e-6;
  std::size_t samples_per_scenario = 1;
  std::size_t max_scenarios = 1000;
  std::size_t min_relevant_in_top = 4;
  double simulator_epsilon = 0.0;  // exploration of the trained decision maker while sampling
  std::vector<std::string> human_choice_files;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  double idle_minutes = 30.0;
  std::size_t humaneval_tasks = 20;
  std::string static_dir;  // optional web client assets
};

struct RunConfig {
  DataPaths data;
  std::size_t key_term_count = 50;
  SyntheticSpec synthetic;  // used by cmd_gen
  EpisodeSettings episode;
  AgentConfig manager;
  AgentConfig simulator;
  SimulatorKind simulator_kind = SimulatorKind::Dqn;
  TrainingConfig training;
  CompareConfig compare;
  ServeConfig serve;
  std::string output_dir = "runs/default";
};

/// Small nets and short phases; the default for tests and laptops.
inline RunConfig desk_preset() {
  RunConfig c;
  for (auto* a : {&c.manager, &c.simulator}) {
    a->dqn.hidden = {64, 64};
    a->dqn.batch_size = 32;
    a->dqn.replay_capacity = 10000;
    a->dqn.sync_period = 50;
  }
  c.training.updates_per_phase = 50;
  c.training.epochs = 20;
  return c;
}

/// Full-size networks and C = 500.
inline RunConfig full_preset() {
  RunConfig c;
  for (auto* a : {&c.manager, &c.simulator}) {
    a->dqn.hidden = {1024, 1024};
    a->dqn.batch_size = 256;
    a->dqn.replay_capacity = 10000;
    a->dqn.sync_period = 100;
  }
  c.training.updates_per_phase = 500;
  return c;
}

inline RunConfig preset(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "full") return full_preset();
  throw ConfigError("unknown preset '" + name + "' (expected desk | full)");
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

/// Reads fields of one JSON object and complains about anything left over.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + where(key) + "' has the wrong type");
    }
  }

  template <typename F>
  void section(const char* key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    StrictObject sub(j_.at(key), where(key));
    f(sub);
    sub.finish();
  }

  template <typename Parse, typename T>
  void parsed(const char* key, T& out, Parse&& parse) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = parse(s);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + where(it.key()) + "'");
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline nlohmann::json dqn_to_json(const QLearnerConfig& c) {
  return {{"variant", to_string(c.variant)}, {"hidden", c.hidden},          {"gamma", c.gamma},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"replay_capacity", c.replay_capacity},
          {"sync_period", c.sync_period}};
}

inline void dqn_from_json(StrictObject& o, QLearnerConfig& c) {
  o.parsed("variant", c.variant, dqn_variant_from_string);
  o.get("hidden", c.hidden);
  o.get("gamma", c.gamma);
  o.get("learning_rate", c.learning_rate);
  o.get("batch_size", c.batch_size);
  o.get("replay_capacity", c.replay_capacity);
  o.get("sync_period", c.sync_period);
}

inline std::string transcript_mode_name(TranscriptMode m) {
  switch (m) {
    case TranscriptMode::Clean: return "clean";
    case TranscriptMode::OneBest: return "onebest";
    case TranscriptMode::Lattice: return "lattice";
  }
  return "?";
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& e = c.episode;
  return json{
      {"data",
       {{"corpus", c.data.corpus},
        {"queries", c.data.queries},
        {"topics", c.data.topics},
        {"key_terms", c.data.key_terms},
        {"key_term_count", c.key_term_count}}},
      {"synthetic",
       {{"seed", c.synthetic.seed},
        {"documents", c.synthetic.n_docs},
        {"queries", c.synthetic.n_queries},
        {"topics", c.synthetic.n_topics},
        {"transcript", detail::transcript_mode_name(c.synthetic.mode)},
        {"recognition_error", c.synthetic.recognition_error},
        {"background_terms", c.synthetic.background_terms},
        {"topic_terms", c.synthetic.topic_terms},
        {"facet_terms", c.synthetic.facet_terms},
        {"facet_subset", c.synthetic.facet_subset},
        {"facet_share", c.synthetic.facet_share},
        {"topical_fraction", c.synthetic.topical_fraction},
        {"query_facet_prob", c.synthetic.query_facet_prob},
        {"generic_share", c.synthetic.generic_share},
        {"generic_terms", c.synthetic.generic_terms},
        {"facet_leak", c.synthetic.facet_leak},
        {"facet_error", c.synthetic.facet_error}}},
      {"retrieval", {{"smoothing", e.retrieval.smoothing}, {"depth", e.retrieval.depth}}},
      {"feedback",
       {{"mixture_noise", e.feedback.mixture_noise},
        {"feedback_alpha", e.feedback.feedback_alpha},
        {"term_boost", e.feedback.term_boost},
        {"topic_alpha", e.feedback.topic_alpha},
        {"em_max_iterations", e.feedback.em_max_iterations},
        {"em_tolerance", e.feedback.em_tolerance}}},
      {"features",
       {{"mode", to_string(e.features.mode)},
        {"raw_width", e.features.raw_width},
        {"predictor_depth", e.features.predictor_depth}}},
      {"dialogue",
       {{"lambda", e.lambda},
        {"costs", e.costs.cost},
        {"document_page", e.document_page},
        {"map_threshold", e.termination.map_threshold},
        {"max_turns", e.termination.max_turns},
        {"success_reward", e.termination.success_reward},
        {"failure_reward", e.termination.failure_reward}}},
      {"manager", detail::dqn_to_json(c.manager.dqn)},
      {"simulator",
       {{"kind", to_string(c.simulator_kind)}, {"k", e.simulator_k}, {"dqn", detail::dqn_to_json(c.simulator.dqn)}}},
      {"training",
       {{"updates_per_phase", c.training.updates_per_phase},
        {"epochs", c.training.epochs},
        {"episodes_per_update", c.training.episodes_per_update},
        {"epsilon_start", c.training.epsilon_start},
        {"epsilon_end", c.training.epsilon_end},
        {"epsilon_decay_fraction", c.training.epsilon_decay_fraction},
        {"seed", c.training.seed},
        {"folds", c.training.folds},
        {"trials", c.training.trials},
        {"max_episodes_factor", c.training.max_episodes_factor}}},
      {"compare",
       {{"kl_smoothing", c.compare.kl_smoothing},
        {"samples_per_scenario", c.compare.samples_per_scenario},
        {"max_scenarios", c.compare.max_scenarios},
        {"min_relevant_in_top", c.compare.min_relevant_in_top},
        {"simulator_epsilon", c.compare.simulator_epsilon},
        {"human_choice_files", c.compare.human_choice_files}}},
      {"serve",
       {{"host", c.serve.host},
        {"port", c.serve.port},
        {"idle_minutes", c.serve.idle_minutes},
        {"humaneval_tasks", c.serve.humaneval_tasks},
        {"static_dir", c.serve.static_dir}}},
      {"output_dir", c.output_dir}};
}

inline void validate(const RunConfig& c);

/// Overlays `j` on `base`. A top-level "preset" key selects the base instead.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = desk_preset()) {
  RunConfig c = std::move(base);
  if (j.is_object() && j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
    c = preset(j["preset"].get<std::string>());
  }
  auto& e = c.episode;
  detail::StrictObject root(j, "");
  std::string preset_name;
  root.get("preset", preset_name);
  root.section("data", [&](auto& o) {
    o.get("corpus", c.data.corpus);
    o.get("queries", c.data.queries);
    o.get("topics", c.data.topics);
    o.get("key_terms", c.data.key_terms);
    o.get("key_term_count", c.key_term_count);
  });
  root.section("synthetic", [&](auto& o) {
    o.get("seed", c.synthetic.seed);
    o.get("documents", c.synthetic.n_docs);
    o.get("queries", c.synthetic.n_queries);
    o.get("topics", c.synthetic.n_topics);
    o.parsed("transcript", c.synthetic.mode, transcript_mode_from_string);
    o.get("recognition_error", c.synthetic.recognition_error);
    o.get("background_terms", c.synthetic.background_terms);
    o.get("topic_terms", c.synthetic.topic_terms);
    o.get("facet_terms", c.synthetic.facet_terms);
    o.get("facet_subset", c.synthetic.facet_subset);
    o.get("facet_share", c.synthetic.facet_share);
    o.get("topical_fraction", c.synthetic.topical_fraction);
    o.get("query_facet_prob", c.synthetic.query_facet_prob);
    o.get("generic_share", c.synthetic.generic_share);
    o.get("generic_terms", c.synthetic.generic_terms);
    o.get("facet_leak", c.synthetic.facet_leak);
    o.get("facet_error", c.synthetic.facet_error);
  });
  root.section("retrieval", [&](auto& o) {
    o.get("smoothing", e.retrieval.smoothing);
    o.get("depth", e.retrieval.depth);
  });
  root.section("feedback", [&](auto& o) {
    o.get("mixture_noise", e.feedback.mixture_noise);
    o.get("feedback_alpha", e.feedback.feedback_alpha);
    o.get("term_boost", e.feedback.term_boost);
    o.get("topic_alpha", e.feedback.topic_alpha);
    o.get("em_max_iterations", e.feedback.em_max_iterations);
    o.get("em_tolerance", e.feedback.em_tolerance);
  });
  root.section("features", [&](auto& o) {
    o.parsed("mode", e.features.mode, feature_mode_from_string);
    o.get("raw_width", e.features.raw_width);
    o.get("predictor_depth", e.features.predictor_depth);
  });
  root.section("dialogue", [&](auto& o) {
    o.get("lambda", e.lambda);
    o.get("costs", e.costs.cost);
    o.get("document_page", e.document_page);
    o.get("map_threshold", e.termination.map_threshold);
    o.get("max_turns", e.termination.max_turns);
    o.get("success_reward", e.termination.success_reward);
    o.get("failure_reward", e.termination.failure_reward);
  });
  root.section("manager", [&](auto& o) { detail::dqn_from_json(o, c.manager.dqn); });
  root.section("simulator", [&](auto& o) {
    o.parsed("kind", c.simulator_kind, simulator_kind_from_string);
    o.get("k", e.simulator_k);
    o.section("dqn", [&](auto& d) { detail::dqn_from_json(d, c.simulator.dqn); });
  });
  root.section("training", [&](auto& o) {
    o.get("updates_per_phase", c.training.updates_per_phase);
    o.get("epochs", c.training.epochs);
    o.get("episodes_per_update", c.training.episodes_per_update);
    o.get("epsilon_start", c.training.epsilon_start);
    o.get("epsilon_end", c.training.epsilon_end);
    o.get("epsilon_decay_fraction", c.training.epsilon_decay_fraction);
    o.get("seed", c.training.seed);
    o.get("folds", c.training.folds);
    o.get("trials", c.training.trials);
    o.get("max_episodes_factor", c.training.max_episodes_factor);
  });
  root.section("compare", [&](auto& o) {
    o.get("kl_smoothing", c.compare.kl_smoothing);
    o.get("samples_per_scenario", c.compare.samples_per_scenario);
    o.get("max_scenarios", c.compare.max_scenarios);
    o.get("min_relevant_in_top", c.compare.min_relevant_in_top);
    o.get("simulator_epsilon", c.compare.simulator_epsilon);
    o.get("human_choice_files", c.compare.human_choice_files);
  });
  root.section("serve", [&](auto& o) {
    o.get("host", c.serve.host);
    o.get("port", c.serve.port);
    o.get("idle_minutes", c.serve.idle_minutes);
    o.get("humaneval_tasks", c.serve.humaneval_tasks);
    o.get("static_dir", c.serve.static_dir);
  });
  root.get("output_dir", c.output_dir);
  root.finish();
  validate(c);
  return c;
}

/// Range checks that do not depend on data.
inline void validate(const RunConfig& c) {
  const auto& e = c.episode;
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(e.retrieval.smoothing > 0.0 && e.retrieval.smoothing < 1.0, "retrieval.smoothing must lie in (0,1)");
  need(e.retrieval.depth >= 1, "retrieval.depth must be >= 1");
  const auto& s = c.synthetic;
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  need(unit(s.recognition_error) && s.facet_error <= 1.0, "synthetic recognition errors must lie in [0,1]");
  need(unit(s.topical_fraction) && unit(s.query_facet_prob), "synthetic probabilities must lie in [0,1]");
  need(s.facet_share >= 0.0 && s.generic_share >= 0.0 && s.facet_leak >= 0.0, "synthetic shares must be >= 0");
  need(s.facet_share + s.generic_share < 0.73, "synthetic facet_share + generic_share must stay below 0.73");
  need(s.generic_share + s.facet_leak < 0.55, "synthetic generic_share + facet_leak must stay below 0.55");
  need(s.background_terms >= 1 && s.topic_terms >= 1 && s.facet_terms >= 1 && s.generic_terms >= 1,
       "synthetic vocabulary sizes must be >= 1");
  need(s.facet_subset >= 1 && s.facet_subset <= s.facet_terms, "synthetic facet_subset must lie in [1, facet_terms]");
  need(e.feedback.mixture_noise >= 0.0 && e.feedback.mixture_noise < 1.0, "feedback.mixture_noise must lie in [0,1)");
  need(e.feedback.feedback_alpha >= 0.0 && e.feedback.feedback_alpha <= 1.0, "feedback.feedback_alpha must lie in [0,1]");
  need(e.feedback.topic_alpha >= 0.0 && e.feedback.topic_alpha <= 1.0, "feedback.topic_alpha must lie in [0,1]");
  need(e.feedback.term_boost >= 0.0, "feedback.term_boost must be >= 0");
  need(e.features.raw_width >= 1, "features.raw_width must be >= 1");
  need(e.termination.max_turns >= 1, "dialogue.max_turns must be >= 1");
  need(e.simulator_k >= 1, "simulator.k must be >= 1");
  need(e.document_page >= 1, "dialogue.document_page must be >= 1");
  for (const auto* a : {&c.manager.dqn, &c.simulator.dqn}) {
    need(!a->hidden.empty(), "dqn.hidden needs at least one layer");
    for (auto h : a->hidden) need(h >= 1, "dqn.hidden widths must be >= 1");
    need(a->gamma >= 0.0 && a->gamma <= 1.0, "dqn.gamma must lie in [0,1]");
    need(a->learning_rate > 0.0, "dqn.learning_rate must be > 0");
    need(a->batch_size >= 1, "dqn.batch_size must be >= 1");
    need(a->replay_capacity >= a->batch_size, "dqn.replay_capacity must be >= batch_size");
    need(a->sync_period >= 1, "dqn.sync_period must be >= 1");
  }
  const auto& t = c.training;
  need(t.updates_per_phase >= 1, "training.updates_per_phase (C) must be >= 1");
  need(t.epochs >= 1, "training.epochs must be >= 1");
  need(t.episodes_per_update >= 1, "training.episodes_per_update must be >= 1");
  need(t.epsilon_start >= 0.0 && t.epsilon_start <= 1.0, "training.epsilon_start must lie in [0,1]");
  need(t.epsilon_end >= 0.0 && t.epsilon_end <= 1.0, "training.epsilon_end must lie in [0,1]");
  need(t.epsilon_decay_fraction > 0.0 && t.epsilon_decay_fraction <= 1.0,
       "training.epsilon_decay_fraction must lie in (0,1]");
  need(t.folds >= 3, "training.folds must be >= 3");
  need(!t.trials.empty(), "training.trials must list at least one trial");
  for (int tr : t.trials) need(tr >= 0 && static_cast<std::size_t>(tr) < t.folds, "training.trials out of range");
  need(t.max_episodes_factor >= 1, "training.max_episodes_factor must be >= 1");
  need(c.compare.kl_smoothing >= 0.0, "compare.kl_smoothing must be >= 0");
  need(c.compare.samples_per_scenario >= 1, "compare.samples_per_scenario must be >= 1");
  need(c.compare.min_relevant_in_top >= 1 && c.compare.min_relevant_in_top <= kChoiceCount,
       "compare.min_relevant_in_top must lie in [1,4]");
  need(c.compare.simulator_epsilon >= 0.0 && c.compare.simulator_epsilon <= 1.0,
       "compare.simulator_epsilon must lie in [0,1]");
  need(c.serve.idle_minutes > 0.0, "serve.idle_minutes must be > 0");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return config_from_json(j);
}

/// Applies "a.b.c=value" overrides. Values parse as JSON when possible and as
/// plain strings otherwise.
inline RunConfig apply_overrides(const RunConfig& c, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return c;
  nlohmann::json j = to_json(c);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like key.path=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + o + "' has an empty key component");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part) || !(*node)[part].is_object())
        throw ConfigError("unknown config key '" + key.substr(0, dot) + "' in override '" + o + "'");
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return config_from_json(j);
}

inline void write_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(c).dump(2) << "\n";
}

inline LoadOptions load_options(const RunConfig& c) {
  LoadOptions o;
  o.key_term_count = c.key_term_count;
  return o;
}

}  // namespace iscr
