#pragma once

// One retrieval dialogue as a state machine. The same machine drives
// simulated training episodes and live sessions with a human user.

#include <optional>
#include <string>
#include <vector>

#include "iscr/metrics.hpp"
#include "iscr/simulator.hpp"
#include "json.hpp"

namespace iscr {

struct EpisodeSettings {
  RetrievalParams retrieval;
  FeedbackParams feedback;
  FeatureParams features;
  TerminationPolicy termination;
  ActionCosts costs;
  double lambda = 100.0;
  std::size_t simulator_k = 49;
  std::size_t document_page = 10;
};

struct TurnRecord {
  int turn = 0;  // 1-based
  std::vector<double> manager_state;
  SystemAction chosen_action = SystemAction::ReturnRequest;
  SystemPrompt prompt;
  std::vector<double> simulator_state;  // empty when relevance is unknown
  int simulator_choice = -1;            // -1 when the reply came from a human
  UserResponse response;
  std::vector<std::string> ranked_before;  // top-K document ids seen when answering
  std::optional<double> map_before;
  std::optional<double> map_after;
  double cost = 0.0;
  double manager_reward = 0.0;
  double simulator_reward = 0.0;
};

struct EpisodeTrace {
  std::string query_id;
  std::map<std::string, double> query_terms;
  std::optional<double> map_initial;
  std::vector<TurnRecord> turns;
  Outcome outcome = Outcome::Continue;
  double manager_return = 0.0;
  double simulator_return = 0.0;
  std::string phase;  // free-form tag: "train", "eval", "session", ...
};

inline std::vector<std::string> top_ids(const RankedList& list, const Corpus& corpus, std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, list.size()); ++i) out.push_back(corpus.document(list.entries[i].doc).id);
  return out;
}

class Episode {
 public:
  /// `judgments` may be null (free-text query without relevance information).
  Episode(const Corpus& corpus, const QueryRecord* judgments, QueryModel initial, std::vector<std::string> topic_ranking,
          const EpisodeSettings& settings, std::string query_id, std::map<std::string, double> query_terms)
      : corpus_(&corpus),
        judgments_(judgments),
        settings_(settings),
        topic_ranking_(std::move(topic_ranking)),
        query_(std::move(initial)) {
    trace_.query_id = std::move(query_id);
    trace_.query_terms = std::move(query_terms);
    ranked_ = retrieve(query_, corpus, settings_.retrieval);
    if (judgments_) {
      map_ = average_precision(ranked_, *judgments_);
      trace_.map_initial = map_;
      term_ranking_ = rank_terms(*judgments_, corpus);
    }
  }

  static Episode for_query(const Corpus& corpus, const QueryRecord& q, const EpisodeSettings& settings) {
    return Episode(corpus, &q, QueryModel::from_query(q), q.topic_ranking, settings, q.id, q.terms);
  }

  bool finished() const { return trace_.outcome != Outcome::Continue; }
  Outcome outcome() const { return trace_.outcome; }
  int completed_turns() const { return static_cast<int>(trace_.turns.size()); }
  int next_turn() const { return completed_turns() + 1; }
  const RankedList& ranked() const { return ranked_; }
  const QueryModel& query() const { return query_; }
  std::optional<double> current_map() const { return map_; }
  const std::optional<SystemPrompt>& pending() const { return pending_; }
  const EpisodeTrace& trace() const { return trace_; }
  EpisodeTrace take_trace() { return std::move(trace_); }
  bool judged() const { return judgments_ != nullptr; }
  const EpisodeSettings& settings() const { return settings_; }

  std::vector<double> manager_state() const {
    return iscr::manager_state(query_, ranked_, *corpus_, settings_.features, settings_.retrieval.smoothing,
                               completed_turns())
        .vector(settings_.termination.max_turns);
  }

  SimulatorState simulator_state() const {
    ISCR_EXPECT(judgments_, "simulator state needs relevance judgments");
    return iscr::simulator_state(ranked_, *judgments_, settings_.simulator_k);
  }

  SimulatorView simulator_view() const {
    ISCR_EXPECT(judgments_, "simulator view needs relevance judgments");
    return {*corpus_, *judgments_, ranked_, term_ranking_, given_terms_};
  }

  /// Realizes the manager's chosen action as the pending prompt.
  const SystemPrompt& propose(SystemAction chosen, std::vector<double> state) {
    if (finished()) throw ConflictError("episode already finished");
    if (pending_) throw ConflictError("a prompt is already pending");
    DialogueContext ctx{*corpus_, query_, ranked_, asked_key_terms_, topic_ranking_, settings_.document_page};
    pending_ = realize_action(chosen, ctx);
    chosen_ = chosen;
    pending_state_ = std::move(state);
    if (pending_->action == SystemAction::ReturnKeyTerm) asked_key_terms_.push_back(pending_->key_term);
    return *pending_;
  }

  /// Checks that `r` answers the pending prompt and names known ids.
  void validate(const UserResponse& r) const {
    if (finished()) throw ConflictError("episode already finished");
    if (!pending_) throw ConflictError("no prompt is pending");
    if (std::holds_alternative<Terminate>(r)) return;
    const auto expected = expected_response_type(pending_->action);
    // Simulated users fall back to a term when they cannot answer otherwise.
    const bool fallback = std::holds_alternative<ProvideTerm>(r) && simulated_;
    if (response_type(r) != expected && !fallback)
      throw ValidationError("response type '" + response_type(r) + "' does not answer " + to_string(pending_->action) +
                            "; expected '" + expected + "'");
    if (auto* p = std::get_if<PickDocument>(&r); p && !corpus_->find_document(p->doc_id))
      throw ValidationError("unknown document '" + p->doc_id + "'");
    if (auto* p = std::get_if<PickTopic>(&r); p && !corpus_->find_topic(p->topic_id))
      throw ValidationError("unknown topic '" + p->topic_id + "'");
  }

  void set_simulated(bool v) { simulated_ = v; }

  /// Applies the reply, re-ranks, scores the turn and checks termination.
  const TurnRecord& respond(const UserResponse& r, std::vector<double> simulator_state = {}, int simulator_choice = -1) {
    validate(r);
    TurnRecord rec;
    rec.turn = next_turn();
    rec.manager_state = std::move(pending_state_);
    rec.chosen_action = chosen_;
    rec.prompt = *pending_;
    rec.simulator_state = std::move(simulator_state);
    rec.simulator_choice = simulator_choice;
    rec.response = r;
    rec.ranked_before = top_ids(ranked_, *corpus_, settings_.simulator_k);
    rec.map_before = map_;
    rec.cost = settings_.costs[chosen_];

    Outcome outcome = Outcome::Continue;
    if (auto* t = std::get_if<Terminate>(&r)) {
      outcome = t->success ? Outcome::Success : Outcome::Failure;
    } else {
      if (auto* p = std::get_if<ProvideTerm>(&r)) given_terms_.push_back(p->term);
      query_ = apply_feedback(query_, *to_evidence(r, *pending_), *corpus_, settings_.feedback);
      ranked_ = retrieve(query_, *corpus_, settings_.retrieval);
      if (judgments_) map_ = average_precision(ranked_, *judgments_);
      if (map_) {
        outcome = check_termination(*map_, rec.turn + 1, settings_.termination);
      } else if (rec.turn + 1 > settings_.termination.max_turns) {
        outcome = Outcome::Failure;
      }
    }
    rec.map_after = map_;
    rec.manager_reward = map_ ? turn_reward(chosen_, *rec.map_before, *map_, settings_.costs, settings_.lambda) : rec.cost;
    rec.simulator_reward = simulator_reward(outcome, settings_.termination);

    cost_sum_ += rec.cost;
    trace_.manager_return = trace_.map_initial && map_
                                ? cost_sum_ + settings_.lambda * (*map_ - *trace_.map_initial)
                                : cost_sum_;
    trace_.simulator_return += rec.simulator_reward;
    trace_.outcome = outcome;
    trace_.turns.push_back(std::move(rec));
    pending_.reset();
    return trace_.turns.back();
  }

 private:
  const Corpus* corpus_;
  const QueryRecord* judgments_;
  EpisodeSettings settings_;
  std::vector<std::string> topic_ranking_;
  QueryModel query_;
  RankedList ranked_;
  std::optional<double> map_;
  std::vector<ScoredTerm> term_ranking_;
  std::vector<std::string> asked_key_terms_;
  std::vector<std::string> given_terms_;
  std::optional<SystemPrompt> pending_;
  SystemAction chosen_ = SystemAction::ReturnRequest;
  std::vector<double> pending_state_;
  double cost_sum_ = 0.0;
  bool simulated_ = false;
  EpisodeTrace trace_;
};

/// Plays one full simulated dialogue.
inline EpisodeTrace run_episode(const QueryRecord& query, const QLearner& manager, const UserSimulator& simulator,
                                const Corpus& corpus, const EpisodeSettings& settings, double manager_epsilon,
                                double simulator_epsilon, Rng& rng) {
  Episode ep = Episode::for_query(corpus, query, settings);
  ep.set_simulated(true);
  while (!ep.finished()) {
    auto state = ep.manager_state();
    const SystemAction a = select_action(state, manager, manager_epsilon, rng);
    const SystemPrompt& prompt = ep.propose(a, std::move(state));
    const SimulatorState sim_state = ep.simulator_state();
    const SimulatorDecision d = simulator.respond(prompt, sim_state, ep.simulator_view(), simulator_epsilon, rng);
    ep.respond(d.response, sim_state.relevance_bits, d.choice);
  }
  return ep.take_trace();
}

/// Re-applies the logged replies through feedback and retrieval; returns the
/// MAP sequence (initial, then after each turn).
inline std::vector<double> replay_map_sequence(const EpisodeTrace& trace, const Dataset& data,
                                               const EpisodeSettings& settings) {
  const QueryRecord* q = data.find_query(trace.query_id);
  if (!q) throw NotFoundError("trace references unknown query '" + trace.query_id + "'");
  QueryModel model = QueryModel::from_query(*q);
  std::vector<double> maps{average_precision(retrieve(model, data.corpus, settings.retrieval), *q)};
  for (const auto& t : trace.turns) {
    if (auto ev = to_evidence(t.response, t.prompt)) model = apply_feedback(model, *ev, data.corpus, settings.feedback);
    maps.push_back(average_precision(retrieve(model, data.corpus, settings.retrieval), *q));
  }
  return maps;
}

/// Manager transitions (s, a, r, s', done) of a finished trace.
inline std::vector<Experience> manager_experiences(const EpisodeTrace& trace) {
  std::vector<Experience> out;
  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    const auto& t = trace.turns[i];
    const bool last = i + 1 == trace.turns.size();
    out.push_back({t.manager_state, action_index(t.chosen_action), t.manager_reward,
                   last ? std::vector<double>(t.manager_state.size(), 0.0) : trace.turns[i + 1].manager_state,
                   last && trace.outcome != Outcome::Continue});
  }
  return out;
}

/// Simulator transitions, tagged with the system action whose decision maker produced them.
inline std::vector<std::pair<SystemAction, Experience>> simulator_experiences(const EpisodeTrace& trace) {
  std::vector<std::pair<SystemAction, Experience>> out;
  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    const auto& t = trace.turns[i];
    if (t.simulator_choice < 0 || t.simulator_state.empty()) continue;
    const bool last = i + 1 == trace.turns.size();
    out.push_back({t.prompt.action,
                   {t.simulator_state, t.simulator_choice, t.simulator_reward,
                    last ? std::vector<double>(t.simulator_state.size(), 0.0) : trace.turns[i + 1].simulator_state,
                    last && trace.outcome != Outcome::Continue}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace records (one JSON object per episode)

inline nlohmann::json to_json(const EpisodeTrace& t) {
  using nlohmann::json;
  json turns = json::array();
  for (const auto& r : t.turns) {
    json j{{"turn", r.turn},
           {"manager_state", r.manager_state},
           {"chosen_action", to_string(r.chosen_action)},
           {"prompt", to_json(r.prompt)},
           {"simulator_state", r.simulator_state},
           {"simulator_choice", r.simulator_choice},
           {"response", to_json(r.response)},
           {"ranked_before", r.ranked_before},
           {"cost", r.cost},
           {"manager_reward", r.manager_reward},
           {"simulator_reward", r.simulator_reward}};
    j["map_before"] = r.map_before ? json(*r.map_before) : json(nullptr);
    j["map_after"] = r.map_after ? json(*r.map_after) : json(nullptr);
    turns.push_back(std::move(j));
  }
  json out{{"query_id", t.query_id},
           {"query_terms", t.query_terms},
           {"turns", std::move(turns)},
           {"outcome", to_string(t.outcome)},
           {"manager_return", t.manager_return},
           {"simulator_return", t.simulator_return},
           {"phase", t.phase}};
  out["map_initial"] = t.map_initial ? json(*t.map_initial) : json(nullptr);
  return out;
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "success") return Outcome::Success;
  if (s == "failure") return Outcome::Failure;
  if (s == "continue") return Outcome::Continue;
  throw ValidationError("unknown outcome '" + s + "'");
}

inline EpisodeTrace trace_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  EpisodeTrace t;
  t.query_id = j.at("query_id").get<std::string>();
  t.query_terms = j.value("query_terms", std::map<std::string, double>{});
  t.map_initial = opt(j.at("map_initial"));
  t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  t.manager_return = j.at("manager_return").get<double>();
  t.simulator_return = j.at("simulator_return").get<double>();
  t.phase = j.value("phase", std::string{});
  for (const auto& r : j.at("turns")) {
    TurnRecord rec;
    rec.turn = r.at("turn").get<int>();
    rec.manager_state = r.at("manager_state").get<std::vector<double>>();
    rec.chosen_action = system_action_from_string(r.at("chosen_action").get<std::string>());
    rec.prompt = prompt_from_json(r.at("prompt"));
    rec.simulator_state = r.at("simulator_state").get<std::vector<double>>();
    rec.simulator_choice = r.at("simulator_choice").get<int>();
    rec.response = response_from_json(r.at("response"));
    rec.ranked_before = r.at("ranked_before").get<std::vector<std::string>>();
    rec.map_before = opt(r.at("map_before"));
    rec.map_after = opt(r.at("map_after"));
    rec.cost = r.at("cost").get<double>();
    rec.manager_reward = r.at("manager_reward").get<double>();
    rec.simulator_reward = r.at("simulator_reward").get<double>();
    t.turns.push_back(std::move(rec));
  }
  return t;
}

inline std::vector<EpisodeTrace> read_trace_file(const std::string& path) {
  std::vector<EpisodeTrace> out;
  detail::for_each_record(path, [&](const nlohmann::json& rec, std::size_t) { out.push_back(trace_from_json(rec)); });
  return out;
}

}  // namespace iscr
