#pragma once

// Live dialogues with a human in the user role, and collection of
// human-evaluation choices. Transport-independent; see http_service.hpp.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "iscr/compare.hpp"
#include "json.hpp"

namespace iscr {

using Clock = std::function<std::chrono::steady_clock::time_point()>;

inline Clock steady_clock_source() {
  return [] { return std::chrono::steady_clock::now(); };
}

/// Serialized appends to a JSONL file; a no-op when the path is empty.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    out_.open(path_, std::ios::app);
    if (!out_) throw Error("cannot append to '" + path_ + "'");
  }
  void append(const nlohmann::json& j) {
    if (path_.empty()) return;
    std::lock_guard lock(mu_);
    out_ << j.dump() << "\n";
    out_.flush();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Most frequent manually transcribed words, as a stand-in for a title.
inline std::string document_summary(const Corpus& corpus, DocIndex d, std::size_t words = 8) {
  std::vector<TermWeight> counts = corpus.document(d).manual_counts;
  std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
  std::string out;
  for (std::size_t i = 0; i < std::min(words, counts.size()); ++i) {
    if (!out.empty()) out += ' ';
    out += corpus.term(counts[i].term);
  }
  return out;
}

inline nlohmann::json document_card(const Corpus& corpus, const std::string& id) {
  auto d = corpus.find_document(id);
  if (!d) return {{"id", id}, {"summary", ""}};
  return {{"id", id}, {"summary", document_summary(corpus, *d)}};
}

enum class SessionStatus { Active, Success, Failure, Abandoned };

inline std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Success: return "success";
    case SessionStatus::Failure: return "failure";
    case SessionStatus::Abandoned: return "abandoned";
  }
  return "?";
}

struct SessionOptions {
  double idle_minutes = 30.0;
  std::string log_path;  // append-only session log; empty disables it
  std::uint64_t seed = 1;
};

class SessionManager {
 public:
  /// `manager` is copied: sessions act greedily on a private, read-only snapshot.
  SessionManager(const Dataset& data, const QLearner& manager, EpisodeSettings settings, SessionOptions opts = {},
                 Clock clock = steady_clock_source())
      : data_(&data),
        manager_(manager),
        settings_(std::move(settings)),
        opts_(std::move(opts)),
        clock_(std::move(clock)),
        log_(opts_.log_path) {
    if (manager_.input_width() != manager_input_width(settings_.features))
      throw ValidationError("manager checkpoint expects " + std::to_string(manager_.input_width()) +
                            " state features but the configuration produces " +
                            std::to_string(manager_input_width(settings_.features)));
  }

  /// Body: {"query_id": "..."} or {"query": "free text"}.
  nlohmann::json create(const nlohmann::json& body) {
    if (!body.is_object()) throw ValidationError("session request must be a JSON object");
    auto s = std::make_shared<Session>();
    if (body.contains("query_id")) {
      if (!body["query_id"].is_string()) throw ValidationError("'query_id' must be a string");
      const auto id = body["query_id"].get<std::string>();
      const QueryRecord* q = data_->find_query(id);
      if (!q) throw NotFoundError("unknown query '" + id + "'");
      s->episode.emplace(Episode::for_query(data_->corpus, *q, settings_));
    } else if (body.contains("query")) {
      if (!body["query"].is_string()) throw ValidationError("'query' must be a string");
      auto [terms, weights] = parse_free_text(body["query"].get<std::string>());
      s->episode.emplace(data_->corpus, nullptr, QueryModel::from_weights(std::move(weights)),
                         std::vector<std::string>{}, settings_, std::string{}, std::move(terms));
    } else {
      throw ValidationError("session request needs 'query_id' or 'query'");
    }
    s->id = new_id();
    s->rng = Rng(derive_seed(opts_.seed, std::hash<std::string>{}(s->id)));
    s->last_active = clock_();
    std::lock_guard slock(s->mu);
    propose_next(*s);
    {
      std::lock_guard lock(table_mu_);
      sessions_[s->id] = s;
    }
    log_event(*s, "create");
    return view(*s);
  }

  nlohmann::json respond(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    expire_if_idle(*s);
    if (s->status != SessionStatus::Active)
      throw ConflictError("session '" + id + "' is " + to_string(s->status));
    const UserResponse r = response_from_json(body);
    s->episode->respond(r);
    s->last_active = clock_();
    if (s->episode->finished())
      s->status = s->episode->outcome() == Outcome::Success ? SessionStatus::Success : SessionStatus::Failure;
    else
      propose_next(*s);
    log_event(*s, "respond");
    return view(*s);
  }

  nlohmann::json get(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    expire_if_idle(*s);
    return view(*s);
  }

  /// Marks every idle session abandoned; returns how many changed.
  std::size_t sweep() {
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(table_mu_);
      for (auto& [k, v] : sessions_) all.push_back(v);
    }
    std::size_t n = 0;
    for (auto& s : all) {
      std::lock_guard lock(s->mu);
      if (expire_if_idle(*s)) ++n;
    }
    return n;
  }

  std::size_t size() const {
    std::lock_guard lock(table_mu_);
    return sessions_.size();
  }

  /// The trace so far (for replay checks).
  EpisodeTrace trace(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return s->episode->trace();
  }

  const EpisodeSettings& settings() const { return settings_; }
  const QLearner& manager() const { return manager_; }

 private:
  struct Session {
    std::string id;
    std::mutex mu;
    std::optional<Episode> episode;
    SessionStatus status = SessionStatus::Active;
    std::chrono::steady_clock::time_point last_active;
    Rng rng{0};
  };

  std::pair<std::map<std::string, double>, SparseVector> parse_free_text(const std::string& text) const {
    std::istringstream in(text);
    std::map<std::string, double> terms;
    std::string tok;
    while (in >> tok) terms[tok] += 1.0;
    if (terms.empty()) throw ValidationError("query text is empty");
    SparseVector weights;
    for (const auto& [t, c] : terms)
      if (auto id = data_->corpus.find_term(t)) weights.push_back({*id, c});
    if (weights.empty()) throw ValidationError("no query word is in the collection vocabulary");
    return {std::move(terms), std::move(weights)};
  }

  std::string new_id() {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%016llx%08llx", static_cast<unsigned long long>(gen()),
                  static_cast<unsigned long long>(++counter_));
    return buf;
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(table_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  bool expire_if_idle(Session& s) {
    if (s.status != SessionStatus::Active) return false;
    const auto idle = std::chrono::duration<double, std::ratio<60>>(clock_() - s.last_active).count();
    if (idle <= opts_.idle_minutes) return false;
    s.status = SessionStatus::Abandoned;
    log_event(s, "abandon");
    return true;
  }

  void propose_next(Session& s) {
    auto state = s.episode->manager_state();
    const SystemAction a = select_action(state, manager_, 0.0, s.rng);
    s.episode->propose(a, std::move(state));
  }

  void log_event(const Session& s, const char* event) {
    auto trace = to_json(s.episode->trace());
    trace["phase"] = "session";
    log_.append({{"event", event}, {"session_id", s.id}, {"status", to_string(s.status)}, {"trace", std::move(trace)}});
  }

  nlohmann::json view(const Session& s) const {
    using nlohmann::json;
    const Episode& ep = *s.episode;
    const auto& corpus = data_->corpus;
    const auto& tr = ep.trace();
    json j;
    j["session_id"] = s.id;
    j["status"] = to_string(s.status);
    j["turn"] = ep.completed_turns();
    j["max_turns"] = settings_.termination.max_turns;
    j["judged"] = ep.judged();
    j["query"] = {{"id", tr.query_id.empty() ? json(nullptr) : json(tr.query_id)}, {"terms", tr.query_terms}};

    json prompt = nullptr;
    if (s.status == SessionStatus::Active && ep.pending()) {
      const auto& p = *ep.pending();
      prompt = to_json(p);
      prompt["expects"] = expected_response_type(p.action);
      if (p.action == SystemAction::ReturnDocuments) {
        json docs = json::array();
        for (const auto& id : p.documents) docs.push_back(document_card(corpus, id));
        prompt["documents"] = std::move(docs);
      }
      if (p.action == SystemAction::ReturnTopic) {
        json topics = json::array();
        for (const auto& id : p.topics) {
          const Topic* t = corpus.find_topic(id);
          topics.push_back({{"id", id}, {"label", t ? t->label : std::string{}}});
        }
        prompt["topics"] = std::move(topics);
      }
    }
    j["prompt"] = std::move(prompt);

    json ranking = json::array();
    for (std::size_t i = 0; i < std::min(settings_.document_page, ep.ranked().size()); ++i) {
      const auto& e = ep.ranked().entries[i];
      json card = document_card(corpus, corpus.document(e.doc).id);
      card["rank"] = i + 1;
      card["score"] = e.score;
      ranking.push_back(std::move(card));
    }
    j["ranking"] = std::move(ranking);

    json trajectory = json::array();
    if (tr.map_initial) {
      trajectory.push_back(*tr.map_initial);
      for (const auto& t : tr.turns)
        if (t.map_after) trajectory.push_back(*t.map_after);
    }
    j["map"] = ep.current_map() ? json(*ep.current_map()) : json(nullptr);
    j["map_trajectory"] = trajectory;

    json transcript = json::array();
    for (const auto& t : tr.turns)
      transcript.push_back({{"turn", t.turn}, {"prompt", to_json(t.prompt)}, {"response", to_json(t.response)}});
    j["transcript"] = std::move(transcript);

    if (s.status == SessionStatus::Active) {
      j["summary"] = nullptr;
    } else {
      j["summary"] = {{"outcome", to_string(s.status)},
                      {"turns", ep.completed_turns()},
                      {"map_trajectory", trajectory},
                      {"return", tr.manager_return}};
    }
    return j;
  }

  const Dataset* data_;
  const QLearner manager_;
  EpisodeSettings settings_;
  SessionOptions opts_;
  Clock clock_;
  JsonlAppender log_;
  mutable std::mutex table_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<unsigned long long> counter_{0};
};

// ---------------------------------------------------------------------------
// Human evaluation

class HumanEval {
 public:
  /// Only scenarios with exactly four candidates become tasks. Choices already
  /// in `choices_path` are loaded, and new ones are appended to it.
  HumanEval(const Dataset& data, const std::vector<Scenario>& scenarios, std::size_t max_tasks,
            const std::string& choices_path = {})
      : data_(&data) {
    for (const auto& s : scenarios) {
      if (tasks_.size() >= max_tasks) break;
      if (s.candidates.size() == kChoiceCount) tasks_.push_back(s);
    }
    if (!choices_path.empty() && std::filesystem::exists(choices_path))
      for (auto& c : read_human_choices(choices_path)) {
        if (!find_task(c.task_id)) throw ValidationError("'" + choices_path + "' names unknown task '" + c.task_id + "'");
        answers_[c.subject][c.task_id] = c;
      }
    log_ = std::make_unique<JsonlAppender>(choices_path);
  }

  std::size_t task_count() const { return tasks_.size(); }
  const std::vector<Scenario>& tasks() const { return tasks_; }

  /// First unanswered task for `subject`, with progress; "done" once all are answered.
  nlohmann::json next_task(const std::string& subject) const {
    require_subject(subject);
    std::lock_guard lock(mu_);
    const auto it = answers_.find(subject);
    const std::size_t answered = it == answers_.end() ? 0 : it->second.size();
    nlohmann::json j{{"subject", subject}, {"progress", {{"answered", answered}, {"total", tasks_.size()}}}};
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (it != answers_.end() && it->second.count(tasks_[i].id)) continue;
      j["done"] = false;
      j["task"] = task_json(tasks_[i], i);
      return j;
    }
    j["done"] = true;
    j["task"] = nullptr;
    return j;
  }

  /// Body: {"subject", "task_id", "choice", "token"}. Resubmitting with the
  /// same token is acknowledged without recording twice.
  nlohmann::json submit(const nlohmann::json& body) {
    if (!body.is_object()) throw ValidationError("choice must be a JSON object");
    auto str = [&](const char* k, bool required) {
      if (!body.contains(k)) {
        if (required) throw ValidationError(std::string("choice needs string field '") + k + "'");
        return std::string{};
      }
      if (!body[k].is_string()) throw ValidationError(std::string("'") + k + "' must be a string");
      return body[k].get<std::string>();
    };
    HumanChoice c;
    c.subject = str("subject", true);
    c.task_id = str("task_id", true);
    c.token = str("token", false);
    if (!body.contains("choice") || !body["choice"].is_number_integer())
      throw ValidationError("choice needs integer field 'choice'");
    const auto choice = body["choice"].get<long long>();
    require_subject(c.subject);
    if (!find_task(c.task_id)) throw NotFoundError("unknown task '" + c.task_id + "'");
    if (choice < 0 || choice >= static_cast<long long>(kChoiceCount))
      throw ValidationError("choice " + std::to_string(choice) + " is outside 0..3");
    c.choice = static_cast<int>(choice);

    std::lock_guard lock(mu_);
    auto& mine = answers_[c.subject];
    if (auto it = mine.find(c.task_id); it != mine.end()) {
      if (!c.token.empty() && it->second.token == c.token)
        return {{"recorded", false}, {"duplicate", true}, {"choice", it->second.choice}};
      throw ConflictError("subject '" + c.subject + "' already answered task '" + c.task_id + "'");
    }
    mine[c.task_id] = c;
    log_->append(to_json(c));
    return {{"recorded", true}, {"duplicate", false}, {"choice", c.choice}};
  }

  std::vector<HumanChoice> choices() const {
    std::lock_guard lock(mu_);
    std::vector<HumanChoice> out;
    for (const auto& [subject, m] : answers_)
      for (const auto& [task, c] : m) out.push_back(c);
    return out;
  }

  nlohmann::json distribution_json() const {
    const auto all = choices();
    std::set<std::string> subjects;
    for (const auto& c : all) subjects.insert(c.subject);
    nlohmann::json j{{"submissions", all.size()}, {"subjects", subjects.size()}};
    j["distribution"] = all.empty() ? nlohmann::json(nullptr) : to_json(pooled_distribution(all));
    return j;
  }

 private:
  static void require_subject(const std::string& subject) {
    if (subject.empty()) throw ValidationError("subject id is empty");
  }

  const Scenario* find_task(const std::string& id) const {
    for (const auto& t : tasks_)
      if (t.id == id) return &t;
    return nullptr;
  }

  nlohmann::json task_json(const Scenario& s, std::size_t index) const {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& id : s.candidates) cands.push_back(document_card(data_->corpus, id));
    const QueryRecord* q = data_->find_query(s.query_id);
    return {{"task_id", s.id},
            {"index", index},
            {"query", {{"id", s.query_id}, {"terms", q ? nlohmann::json(q->terms) : nlohmann::json::object()}}},
            {"utterance", kDocumentsUtterance},
            {"candidates", std::move(cands)}};
  }

  const Dataset* data_;
  std::vector<Scenario> tasks_;
  mutable std::mutex mu_;
  std::map<std::string, std::map<std::string, HumanChoice>> answers_;
  std::unique_ptr<JsonlAppender> log_;
};

}  // namespace iscr
