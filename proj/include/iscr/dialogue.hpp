#pragma once

// The retrieval system's side of the dialogue: the four feedback actions, how
// each one is presented to the user, the typed replies, and per-turn reward.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "iscr/dqn.hpp"
#include "iscr/features.hpp"
#include "json.hpp"

namespace iscr {

enum class SystemAction : int { ReturnDocuments = 0, ReturnKeyTerm = 1, ReturnRequest = 2, ReturnTopic = 3 };

inline constexpr std::size_t kSystemActionCount = 4;
inline constexpr std::array<SystemAction, 4> kSystemActions{SystemAction::ReturnDocuments, SystemAction::ReturnKeyTerm,
                                                            SystemAction::ReturnRequest, SystemAction::ReturnTopic};

inline int action_index(SystemAction a) { return static_cast<int>(a); }

inline SystemAction action_from_index(int i) {
  ISCR_EXPECT(i >= 0 && i < 4, "system action index out of range: " + std::to_string(i));
  return static_cast<SystemAction>(i);
}

inline std::string to_string(SystemAction a) {
  switch (a) {
    case SystemAction::ReturnDocuments: return "return_documents";
    case SystemAction::ReturnKeyTerm: return "return_key_term";
    case SystemAction::ReturnRequest: return "return_request";
    case SystemAction::ReturnTopic: return "return_topic";
  }
  return "?";
}

inline SystemAction system_action_from_string(const std::string& s) {
  for (auto a : kSystemActions)
    if (to_string(a) == s) return a;
  throw ValidationError("unknown system action '" + s + "'");
}

/// Negative per-action cost, indexed by action.
struct ActionCosts {
  std::array<double, 4> cost{-1.0, -1.0, -1.0, -1.0};
  double operator[](SystemAction a) const { return cost[static_cast<std::size_t>(action_index(a))]; }
};

inline constexpr const char* kDocumentsUtterance = "Please view the list and select one item relevant to your need.";
inline constexpr const char* kRequestUtterance = "Please provide more information.";
inline constexpr const char* kTopicUtterance = "Which topic is related?";

inline std::string key_term_utterance(const std::string& term) { return "Is it related to " + term + "?"; }

struct SystemPrompt {
  SystemAction action = SystemAction::ReturnRequest;
  std::string key_term;                // ReturnKeyTerm
  std::vector<std::string> topics;     // ReturnTopic
  std::vector<std::string> documents;  // ReturnDocuments: current head of the ranked list
  std::string utterance;

  bool operator==(const SystemPrompt&) const = default;
};

// ---------------------------------------------------------------------------
// User replies

struct PickDocument {
  std::string doc_id;
  bool operator==(const PickDocument&) const = default;
};
struct YesNo {
  bool yes = false;
  bool operator==(const YesNo&) const = default;
};
struct ProvideTerm {
  std::string term;
  bool operator==(const ProvideTerm&) const = default;
};
struct PickTopic {
  std::string topic_id;
  bool operator==(const PickTopic&) const = default;
};
struct Terminate {
  bool success = false;
  bool operator==(const Terminate&) const = default;
};

using UserResponse = std::variant<PickDocument, YesNo, ProvideTerm, PickTopic, Terminate>;

inline std::string response_type(const UserResponse& r) {
  static const char* names[] = {"pick_document", "yes_no", "provide_term", "pick_topic", "terminate"};
  return names[r.index()];
}

/// The reply variant a prompt expects.
inline std::string expected_response_type(SystemAction a) {
  switch (a) {
    case SystemAction::ReturnDocuments: return "pick_document";
    case SystemAction::ReturnKeyTerm: return "yes_no";
    case SystemAction::ReturnRequest: return "provide_term";
    case SystemAction::ReturnTopic: return "pick_topic";
  }
  return "?";
}

/// Feedback evidence carried by a reply; nullopt for Terminate.
inline std::optional<FeedbackEvidence> to_evidence(const UserResponse& r, const SystemPrompt& prompt) {
  if (auto* p = std::get_if<PickDocument>(&r)) return RelevantDoc{p->doc_id};
  if (auto* p = std::get_if<YesNo>(&r)) return KeyTermAnswer{prompt.key_term, p->yes};
  if (auto* p = std::get_if<ProvideTerm>(&r)) return RequestTerm{p->term};
  if (auto* p = std::get_if<PickTopic>(&r)) return TopicChoice{p->topic_id};
  return std::nullopt;
}

inline nlohmann::json to_json(const UserResponse& r) {
  nlohmann::json j{{"type", response_type(r)}};
  if (auto* p = std::get_if<PickDocument>(&r)) j["doc_id"] = p->doc_id;
  if (auto* p = std::get_if<YesNo>(&r)) j["yes"] = p->yes;
  if (auto* p = std::get_if<ProvideTerm>(&r)) j["term"] = p->term;
  if (auto* p = std::get_if<PickTopic>(&r)) j["topic_id"] = p->topic_id;
  if (auto* p = std::get_if<Terminate>(&r)) j["success"] = p->success;
  return j;
}

inline UserResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ValidationError("response needs a string 'type'");
  const auto type = j["type"].get<std::string>();
  auto str = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_string()) throw ValidationError(type + " response needs string field '" + k + "'");
    return j[k].get<std::string>();
  };
  auto boolean = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_boolean())
      throw ValidationError(type + " response needs boolean field '" + k + "'");
    return j[k].get<bool>();
  };
  if (type == "pick_document") return PickDocument{str("doc_id")};
  if (type == "yes_no") return YesNo{boolean("yes")};
  if (type == "provide_term") return ProvideTerm{str("term")};
  if (type == "pick_topic") return PickTopic{str("topic_id")};
  if (type == "terminate") return Terminate{boolean("success")};
  throw ValidationError("unknown response type '" + type + "'");
}

inline nlohmann::json to_json(const SystemPrompt& p) {
  nlohmann::json j{{"action", to_string(p.action)}, {"utterance", p.utterance}};
  if (p.action == SystemAction::ReturnKeyTerm) j["key_term"] = p.key_term;
  if (p.action == SystemAction::ReturnTopic) j["topics"] = p.topics;
  if (p.action == SystemAction::ReturnDocuments) j["documents"] = p.documents;
  return j;
}

inline SystemPrompt prompt_from_json(const nlohmann::json& j) {
  SystemPrompt p;
  p.action = system_action_from_string(j.at("action").get<std::string>());
  p.utterance = j.value("utterance", std::string{});
  p.key_term = j.value("key_term", std::string{});
  p.topics = j.value("topics", std::vector<std::string>{});
  p.documents = j.value("documents", std::vector<std::string>{});
  return p;
}

// ---------------------------------------------------------------------------
// Dialogue manager

/// Everything realize_action needs to know about the current episode.
struct DialogueContext {
  const Corpus& corpus;
  const QueryModel& query;
  const RankedList& ranked;
  const std::vector<std::string>& asked_key_terms;
  const std::vector<std::string>& topic_ranking;  // empty for unjudged free-text queries
  std::size_t document_page = 10;
  std::size_t key_term_pool = 10;
};

inline SystemAction select_action(const std::vector<double>& state, const QLearner& learner, double epsilon,
                                  Rng& rng) {
  ISCR_EXPECT(learner.action_count() == kSystemActionCount, "dialogue manager needs a 4-way head");
  return action_from_index(learner.act(state, epsilon, rng));
}

/// Highest tf-idf key term (tf over the head of the current ranking) not yet asked.
inline std::optional<std::string> pick_key_term(const DialogueContext& ctx) {
  const auto& keys = ctx.corpus.key_terms();
  if (keys.empty()) return std::nullopt;
  std::vector<double> tf(keys.size(), 0.0);
  for (std::size_t i = 0; i < std::min(ctx.key_term_pool, ctx.ranked.size()); ++i) {
    const auto& d = ctx.corpus.document(ctx.ranked.entries[i].doc);
    for (std::size_t k = 0; k < keys.size(); ++k) tf[k] += sparse_get(d.retrieval_counts, keys[k]);
  }
  // Terms the query model already weights are only asked once nothing else is left.
  std::optional<std::size_t> best;
  bool best_known = true;
  double best_score = 0.0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const std::string& term = ctx.corpus.term(keys[k]);
    if (std::find(ctx.asked_key_terms.begin(), ctx.asked_key_terms.end(), term) != ctx.asked_key_terms.end())
      continue;
    const bool known = ctx.query.weight(keys[k]) > 0.0;
    const double score = tf[k] * ctx.corpus.idf(keys[k]);
    if (!best || (best_known && !known) || (known == best_known && score > best_score)) {
      best = k;
      best_known = known;
      best_score = score;
    }
  }
  if (!best) return std::nullopt;
  return ctx.corpus.term(keys[*best]);
}

/// Four topics to offer: the annotated ranking head when available, otherwise
/// catalog topics ordered by overlap with the current query model.
inline std::vector<std::string> topic_shortlist(const DialogueContext& ctx) {
  if (!ctx.topic_ranking.empty()) {
    const std::size_t n = std::min<std::size_t>(4, ctx.topic_ranking.size());
    return {ctx.topic_ranking.begin(), ctx.topic_ranking.begin() + static_cast<std::ptrdiff_t>(n)};
  }
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& t : ctx.corpus.topics()) {
    double overlap = 0.0;
    for (const auto& e : t.distribution) overlap += e.value * ctx.query.weight(e.term);
    scored.push_back({overlap, t.id});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

inline SystemPrompt realize_action(SystemAction action, const DialogueContext& ctx) {
  SystemPrompt p;
  p.action = action;
  switch (action) {
    case SystemAction::ReturnDocuments:
      for (std::size_t i = 0; i < std::min(ctx.document_page, ctx.ranked.size()); ++i)
        p.documents.push_back(ctx.corpus.document(ctx.ranked.entries[i].doc).id);
      p.utterance = kDocumentsUtterance;
      break;
    case SystemAction::ReturnKeyTerm:
      if (auto t = pick_key_term(ctx)) {
        p.key_term = *t;
        p.utterance = key_term_utterance(*t);
      } else {
        p.action = SystemAction::ReturnRequest;  // key terms exhausted
        p.utterance = kRequestUtterance;
      }
      break;
    case SystemAction::ReturnRequest:
      p.utterance = kRequestUtterance;
      break;
    case SystemAction::ReturnTopic:
      p.topics = topic_shortlist(ctx);
      p.utterance = kTopicUtterance;
      break;
  }
  return p;
}

/// c_a + lambda * (MAP after - MAP before).
inline double turn_reward(SystemAction action, double map_before, double map_after, const ActionCosts& costs,
                          double lambda) {
  return costs[action] + lambda * (map_after - map_before);
}

}  // namespace iscr
