#pragma once

// Behavioral comparison of responders (rule-based user, trained decision
// maker, human subjects) on "pick the most relevant of the top four relevant
// documents" scenarios taken from logged dialogues.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iscr/episode.hpp"
#include "json.hpp"

namespace iscr {

struct Scenario {
  std::string id;
  std::string query_id;
  std::vector<std::string> ranked;      // top-K ids as the user saw them
  std::vector<std::string> candidates;  // relevant documents among them, in ranked order, at most four
  std::vector<double> state;            // simulator relevance bits over `ranked`

  bool operator==(const Scenario&) const = default;
};

/// ReturnDocuments turns whose top-K holds at least `min_relevant` relevant
/// documents; identical situations are kept once. Order follows the traces.
inline std::vector<Scenario> extract_scenarios(const std::vector<EpisodeTrace>& traces, std::size_t min_relevant,
                                               std::size_t limit) {
  std::vector<Scenario> out;
  std::set<std::string> seen;
  for (const auto& tr : traces) {
    for (const auto& t : tr.turns) {
      if (out.size() >= limit) return out;
      if (t.prompt.action != SystemAction::ReturnDocuments || t.simulator_state.empty()) continue;
      if (t.simulator_state.size() < t.ranked_before.size()) continue;
      Scenario s;
      s.query_id = tr.query_id;
      s.ranked = t.ranked_before;
      s.state = t.simulator_state;
      std::size_t relevant = 0;
      for (std::size_t i = 0; i < t.ranked_before.size(); ++i) {
        if (t.simulator_state[i] <= 0.5) continue;
        ++relevant;
        if (s.candidates.size() < kChoiceCount) s.candidates.push_back(t.ranked_before[i]);
      }
      if (relevant < min_relevant) continue;
      std::string key = s.query_id;
      for (const auto& d : s.ranked) key += "|" + d;
      if (!seen.insert(key).second) continue;
      char buf[32];
      std::snprintf(buf, sizeof buf, "sc%04zu", out.size() + 1);
      s.id = buf;
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline nlohmann::json to_json(const Scenario& s) {
  return {{"id", s.id}, {"query_id", s.query_id}, {"ranked", s.ranked}, {"candidates", s.candidates}, {"state", s.state}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.id = j.at("id").get<std::string>();
  s.query_id = j.at("query_id").get<std::string>();
  s.ranked = j.at("ranked").get<std::vector<std::string>>();
  s.candidates = j.at("candidates").get<std::vector<std::string>>();
  s.state = j.at("state").get<std::vector<double>>();
  return s;
}

/// Returns the chosen candidate index for a scenario.
using Responder = std::function<int(const Scenario&, Rng&)>;

/// Runs `sim` through the regular ReturnDocuments pathway and maps the picked
/// document back to its candidate position.
inline Responder simulator_responder(const UserSimulator& sim, const Dataset& data, double epsilon) {
  return [&sim, &data, epsilon](const Scenario& s, Rng& rng) {
    const QueryRecord* q = data.find_query(s.query_id);
    if (!q) throw NotFoundError("scenario '" + s.id + "' references unknown query '" + s.query_id + "'");
    RankedList ranked;
    for (const auto& id : s.ranked) {
      auto d = data.corpus.find_document(id);
      if (!d) throw NotFoundError("scenario '" + s.id + "' references unknown document '" + id + "'");
      ranked.entries.push_back({*d, 0.0});
    }
    const auto terms = rank_terms(*q, data.corpus);
    const std::vector<std::string> given;
    const SimulatorView view{data.corpus, *q, ranked, terms, given};
    SystemPrompt prompt;
    prompt.action = SystemAction::ReturnDocuments;
    prompt.documents = s.ranked;
    prompt.utterance = kDocumentsUtterance;
    const auto decision = sim.respond(prompt, SimulatorState{s.state}, view, epsilon, rng);
    const auto* pick = std::get_if<PickDocument>(&decision.response);
    if (!pick) throw ValidationError("simulator did not pick a document in scenario '" + s.id + "'");
    for (std::size_t i = 0; i < s.candidates.size(); ++i)
      if (s.candidates[i] == pick->doc_id) return static_cast<int>(i);
    throw ValidationError("simulator picked '" + pick->doc_id + "', which is not a candidate of '" + s.id + "'");
  };
}

/// Pooled empirical distribution over the four ranks.
inline ActionDistribution action_distribution(const Responder& responder, const std::vector<Scenario>& scenarios,
                                              std::size_t samples_per_scenario, Rng& rng) {
  if (scenarios.empty() || samples_per_scenario == 0)
    throw ValidationError("action distribution needs at least one scenario and one sample");
  std::vector<std::size_t> counts(kChoiceCount, 0);
  for (const auto& s : scenarios)
    for (std::size_t k = 0; k < samples_per_scenario; ++k) {
      const int c = responder(s, rng);
      ISCR_EXPECT(c >= 0 && static_cast<std::size_t>(c) < kChoiceCount, "responder returned an invalid rank");
      ++counts[static_cast<std::size_t>(c)];
    }
  return ActionDistribution::from_counts(rank_labels(kChoiceCount), counts);
}

// ---------------------------------------------------------------------------
// Human choices

struct HumanChoice {
  std::string subject;
  std::string task_id;
  int choice = 0;
  std::string token;

  bool operator==(const HumanChoice&) const = default;
};

inline nlohmann::json to_json(const HumanChoice& c) {
  return {{"subject", c.subject}, {"task_id", c.task_id}, {"choice", c.choice}, {"token", c.token}};
}

inline std::vector<HumanChoice> read_human_choices(const std::string& path) {
  std::vector<HumanChoice> out;
  detail::for_each_record(path, [&](const nlohmann::json& r, std::size_t line) {
    HumanChoice c;
    c.subject = detail::string_field(r, "subject", path, line);
    c.task_id = detail::string_field(r, "task_id", path, line);
    if (!r.contains("choice") || !r["choice"].is_number_integer())
      throw ParseError(path, line, "missing integer field 'choice'");
    c.choice = r["choice"].get<int>();
    if (c.choice < 0 || c.choice >= static_cast<int>(kChoiceCount))
      throw ParseError(path, line, "choice must lie in [0,3]");
    c.token = r.value("token", std::string{});
    out.push_back(std::move(c));
  });
  return out;
}

inline ActionDistribution pooled_distribution(const std::vector<HumanChoice>& choices) {
  if (choices.empty()) throw ValidationError("no human choices to pool");
  std::vector<std::size_t> counts(kChoiceCount, 0);
  for (const auto& c : choices) ++counts.at(static_cast<std::size_t>(c.choice));
  return ActionDistribution::from_counts(rank_labels(kChoiceCount), counts);
}

inline nlohmann::json to_json(const ActionDistribution& d) {
  return {{"labels", d.labels}, {"probabilities", d.probabilities}, {"samples", d.samples}};
}

// ---------------------------------------------------------------------------
// Report

struct BehaviorReport {
  std::optional<ActionDistribution> rule, ours, human;
  double smoothing = 1e-6;
  std::size_t scenarios = 0;
};

inline nlohmann::json to_json(const BehaviorReport& r) {
  using nlohmann::json;
  auto kl = [&](const std::optional<ActionDistribution>& p, const std::optional<ActionDistribution>& q) -> json {
    if (!p || !q) return nullptr;
    return kl_divergence(*p, *q, r.smoothing);
  };
  auto h = [](const std::optional<ActionDistribution>& p) -> json { return p ? json(entropy(*p)) : json(nullptr); };
  auto dist = [](const std::optional<ActionDistribution>& p) -> json { return p ? to_json(*p) : json(nullptr); };
  return {{"scenarios", r.scenarios},
          {"smoothing", r.smoothing},
          {"kl", {{"rule_human", kl(r.rule, r.human)}, {"ours_human", kl(r.ours, r.human)}, {"rule_ours", kl(r.rule, r.ours)}}},
          {"entropy", {{"rule", h(r.rule)}, {"ours", h(r.ours)}, {"human", h(r.human)}}},
          {"distributions", {{"rule", dist(r.rule)}, {"ours", dist(r.ours)}, {"human", dist(r.human)}}}};
}

/// Two-block text table: pairwise KL, then per-responder entropy.
inline std::string format_behavior_report(const BehaviorReport& r) {
  const auto j = to_json(r);
  auto cell = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return std::string(buf);
  };
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-14s %-12s %-12s %-12s\n%-14s %-12s %-12s %-12s\n%-14s %-12s %-12s %-12s\n%-14s %-12s %-12s %-12s\n",
                "KL-divergence", "Rule/human", "Ours/human", "Rule/ours", "", cell(j["kl"]["rule_human"]).c_str(),
                cell(j["kl"]["ours_human"]).c_str(), cell(j["kl"]["rule_ours"]).c_str(), "Entropy", "Rule", "Ours",
                "Human", "", cell(j["entropy"]["rule"]).c_str(), cell(j["entropy"]["ours"]).c_str(),
                cell(j["entropy"]["human"]).c_str());
  return buf;
}

}  // namespace iscr
