#pragma once

// The simulated user: four decision makers (one per system action) that map
// the binary top-K relevance state to a ranked choice, the deterministic
// rule-based baseline, and termination / terminal reward.

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "iscr/dialogue.hpp"

namespace iscr {

struct TerminationPolicy {
  double map_threshold = 0.6;
  int max_turns = 4;
  double success_reward = 30.0;
  double failure_reward = -30.0;
};

enum class Outcome { Continue, Success, Failure };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Continue: return "continue";
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
  }
  return "?";
}

/// `turn` is the ordinal of the turn about to start; success wins over failure.
inline Outcome check_termination(double current_map, int turn, const TerminationPolicy& policy) {
  ISCR_EXPECT(turn >= 0, "turn must be non-negative");
  if (current_map >= policy.map_threshold) return Outcome::Success;
  if (turn > policy.max_turns) return Outcome::Failure;
  return Outcome::Continue;
}

/// No per-action cost for the user; only the terminal outcome is rewarded.
inline double simulator_reward(Outcome outcome, const TerminationPolicy& policy) {
  switch (outcome) {
    case Outcome::Success: return policy.success_reward;
    case Outcome::Failure: return policy.failure_reward;
    case Outcome::Continue: return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Term importance S(t) = sum_{d in R} N(t,d) ln(1 + idf(t)), N from manual transcriptions.

inline double term_score(TermId t, const QueryRecord& query, const Corpus& corpus) {
  const double w = std::log(1.0 + corpus.idf(t));
  double s = 0.0;
  for (DocIndex d : query.relevant_indices) s += sparse_get(corpus.document(d).manual_counts, t) * w;
  return s;
}

struct ScoredTerm {
  TermId term;
  double score;
  bool operator==(const ScoredTerm&) const = default;
};

/// All terms with S(t) > 0, best first; ties by ascending term.
inline std::vector<ScoredTerm> rank_terms(const QueryRecord& query, const Corpus& corpus) {
  std::vector<double> s(corpus.vocabulary_size(), 0.0);
  for (DocIndex d : query.relevant_indices) {
    for (const auto& e : corpus.document(d).manual_counts)
      s[e.term] += e.value * std::log(1.0 + corpus.idf(e.term));
  }
  std::vector<ScoredTerm> out;
  for (TermId t = 0; t < s.size(); ++t)
    if (s[t] > 0.0) out.push_back({t, s[t]});
  std::stable_sort(out.begin(), out.end(), [](const ScoredTerm& a, const ScoredTerm& b) { return a.score > b.score; });
  return out;
}

/// Fraction of the relevant documents whose manual transcription contains `term`.
inline double relevant_coverage(const std::string& term, const QueryRecord& query, const Corpus& corpus) {
  auto t = corpus.find_term(term);
  if (!t) return 0.0;
  std::size_t hit = 0;
  for (DocIndex d : query.relevant_indices)
    if (sparse_get(corpus.document(d).manual_counts, *t) > 0.0) ++hit;
  return static_cast<double>(hit) / static_cast<double>(query.relevant_indices.size());
}

inline constexpr std::array<double, 4> kKeyTermReliability{1.0, 0.95, 0.90, 0.85};
inline constexpr std::size_t kChoiceCount = 4;

/// What the simulated user can see about the current episode.
struct SimulatorView {
  const Corpus& corpus;
  const QueryRecord& query;
  const RankedList& ranked;
  const std::vector<ScoredTerm>& term_ranking;  // rank_terms(query, corpus)
  const std::vector<std::string>& given_terms;  // already provided in this episode
};

namespace detail {

inline UserResponse request_reply(int choice, const SimulatorView& v) {
  std::vector<TermId> candidates;
  for (const auto& st : v.term_ranking) {
    const auto& name = v.corpus.term(st.term);
    if (std::find(v.given_terms.begin(), v.given_terms.end(), name) != v.given_terms.end()) continue;
    candidates.push_back(st.term);
    if (candidates.size() == kChoiceCount) break;
  }
  if (candidates.empty()) {
    if (!v.term_ranking.empty()) return ProvideTerm{v.corpus.term(v.term_ranking.front().term)};
    return ProvideTerm{v.corpus.term(v.query.term_weights.front().term)};
  }
  const auto idx = static_cast<std::size_t>(choice) < candidates.size() ? static_cast<std::size_t>(choice) : 0;
  return ProvideTerm{v.corpus.term(candidates[idx])};
}

}  // namespace detail

/// Maps a decision-maker output (0..3) to the concrete reply for `prompt`.
inline UserResponse response_for_choice(const SystemPrompt& prompt, int choice, const SimulatorView& v, Rng& rng) {
  ISCR_EXPECT(choice >= 0 && choice < static_cast<int>(kChoiceCount), "decision index out of range");
  switch (prompt.action) {
    case SystemAction::ReturnDocuments: {
      std::vector<DocIndex> relevant;
      for (const auto& e : v.ranked.entries) {
        if (v.query.is_relevant(e.doc)) relevant.push_back(e.doc);
        if (relevant.size() == kChoiceCount) break;
      }
      if (relevant.empty()) return detail::request_reply(choice, v);
      const auto idx = static_cast<std::size_t>(choice) < relevant.size() ? static_cast<std::size_t>(choice) : 0;
      return PickDocument{v.corpus.document(relevant[idx]).id};
    }
    case SystemAction::ReturnKeyTerm: {
      const bool truthful = relevant_coverage(prompt.key_term, v.query, v.corpus) > 0.5;
      const double p = kKeyTermReliability[static_cast<std::size_t>(choice)];
      const bool honest = p >= 1.0 || rng.uniform() < p;
      return YesNo{honest ? truthful : !truthful};
    }
    case SystemAction::ReturnRequest:
      return detail::request_reply(choice, v);
    case SystemAction::ReturnTopic: {
      if (prompt.topics.empty()) return detail::request_reply(choice, v);
      const auto idx = static_cast<std::size_t>(choice) < prompt.topics.size() ? static_cast<std::size_t>(choice) : 0;
      return PickTopic{prompt.topics[idx]};
    }
  }
  throw ContractError("unhandled system action");
}

/// Deterministic baseline: always the top-ranked option, always truthful.
inline UserResponse rule_based_respond(const SystemPrompt& prompt, const SimulatorView& v) {
  Rng unused(0);
  return response_for_choice(prompt, 0, v, unused);
}

enum class SimulatorKind { Rule, Dqn };

inline std::string to_string(SimulatorKind k) { return k == SimulatorKind::Rule ? "rule" : "dqn"; }

inline SimulatorKind simulator_kind_from_string(const std::string& s) {
  if (s == "rule") return SimulatorKind::Rule;
  if (s == "dqn") return SimulatorKind::Dqn;
  throw ConfigError("unknown simulator kind '" + s + "' (expected rule | dqn)");
}

struct SimulatorDecision {
  UserResponse response;
  int choice = 0;  // decision-maker output; 0 for the rule-based user
};

class UserSimulator {
 public:
  virtual ~UserSimulator() = default;
  virtual SimulatorKind kind() const = 0;
  virtual SimulatorDecision respond(const SystemPrompt& prompt, const SimulatorState& state, const SimulatorView& view,
                                    double epsilon, Rng& rng) const = 0;
};

class RuleBasedSimulator final : public UserSimulator {
 public:
  SimulatorKind kind() const override { return SimulatorKind::Rule; }
  SimulatorDecision respond(const SystemPrompt& prompt, const SimulatorState&, const SimulatorView& view, double,
                            Rng&) const override {
    return {rule_based_respond(prompt, view), 0};
  }
};

/// One Q-learner per system action, each with K inputs and four outputs.
class DecisionMakerBank {
 public:
  DecisionMakerBank(std::size_t k, const QLearnerConfig& cfg, std::uint64_t seed) : k_(k) {
    for (std::size_t a = 0; a < kSystemActionCount; ++a)
      learners_.push_back(std::make_unique<QLearner>(k, kChoiceCount, cfg, derive_seed(seed, 100 + a)));
  }

  DecisionMakerBank(const DecisionMakerBank& o) : k_(o.k_) {
    for (const auto& l : o.learners_) learners_.push_back(std::make_unique<QLearner>(*l));
  }
  DecisionMakerBank& operator=(const DecisionMakerBank& o) {
    if (this != &o) *this = DecisionMakerBank(o);
    return *this;
  }
  DecisionMakerBank(DecisionMakerBank&&) noexcept = default;
  DecisionMakerBank& operator=(DecisionMakerBank&&) noexcept = default;

  std::size_t state_width() const { return k_; }
  QLearner& at(SystemAction a) { return *learners_[static_cast<std::size_t>(action_index(a))]; }
  const QLearner& at(SystemAction a) const { return *learners_[static_cast<std::size_t>(action_index(a))]; }

  static std::string file_name(SystemAction a) { return "simulator_" + to_string(a) + ".ckpt"; }

  void save(const std::filesystem::path& dir) const {
    for (auto a : kSystemActions) at(a).save((dir / file_name(a)).string());
  }
  void load(const std::filesystem::path& dir) {
    for (auto a : kSystemActions) at(a).load((dir / file_name(a)).string());
  }

 private:
  std::size_t k_;
  std::vector<std::unique_ptr<QLearner>> learners_;
};

class DqnSimulator final : public UserSimulator {
 public:
  explicit DqnSimulator(const DecisionMakerBank& bank) : bank_(&bank) {}
  SimulatorKind kind() const override { return SimulatorKind::Dqn; }

  SimulatorDecision respond(const SystemPrompt& prompt, const SimulatorState& state, const SimulatorView& view,
                            double epsilon, Rng& rng) const override {
    ISCR_EXPECT(state.relevance_bits.size() == bank_->state_width(), "simulator state width mismatch");
    const int choice = bank_->at(prompt.action).act(state.relevance_bits, epsilon, rng);
    return {response_for_choice(prompt, choice, view, rng), choice};
  }

 private:
  const DecisionMakerBank* bank_;
};

}  // namespace iscr
