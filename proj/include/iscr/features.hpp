#pragma once

// State construction for both agents: the dialogue manager sees normalized
// retrieval scores (optionally with query-performance predictors), the user
// simulator sees which of the top-K positions hold relevant documents.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "iscr/retrieval.hpp"

namespace iscr {

enum class FeatureMode { Raw, HumanRaw };

inline std::string to_string(FeatureMode m) { return m == FeatureMode::Raw ? "raw" : "human_raw"; }

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "raw") return FeatureMode::Raw;
  if (s == "human_raw") return FeatureMode::HumanRaw;
  throw ConfigError("unknown feature mode '" + s + "' (expected raw | human_raw)");
}

struct FeatureParams {
  FeatureMode mode = FeatureMode::Raw;
  std::size_t raw_width = 49;
  std::size_t predictor_depth = 10;  // top-k used by clarity / ambiguity / WIG
};

struct ManagerState {
  std::vector<double> raw;
  std::optional<std::vector<double>> human;  // clarity, ambiguity, WIG
  int turn_index = 0;

  /// Flattened network input: raw, [human], turn_index / max_turns.
  std::vector<double> vector(int max_turns) const {
    std::vector<double> v = raw;
    if (human) v.insert(v.end(), human->begin(), human->end());
    v.push_back(static_cast<double>(turn_index) / static_cast<double>(max_turns));
    return v;
  }
};

inline std::size_t manager_input_width(const FeatureParams& p) {
  return p.raw_width + (p.mode == FeatureMode::HumanRaw ? 3 : 0) + 1;
}

struct SimulatorState {
  std::vector<double> relevance_bits;  // K entries in {0,1}

  std::size_t ones() const {
    return static_cast<std::size_t>(std::count(relevance_bits.begin(), relevance_bits.end(), 1.0));
  }
};

/// Top-n scores min-max scaled within the top-n window; the all-equal case maps to 0.
inline std::vector<double> raw_features(const RankedList& list, std::size_t n) {
  ISCR_EXPECT(n >= 1, "raw feature width must be >= 1");
  std::vector<double> out(n, 0.0);
  const std::size_t m = std::min(n, list.size());
  if (m == 0) return out;
  double lo = list.entries[0].score, hi = list.entries[0].score;
  for (std::size_t i = 0; i < m; ++i) {
    lo = std::min(lo, list.entries[i].score);
    hi = std::max(hi, list.entries[i].score);
  }
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < m; ++i) out[i] = (list.entries[i].score - lo) / (hi - lo);
  return out;
}

/// KL divergence (nats) between the smoothed pooled language model of the top-k
/// documents and the collection model.
inline double clarity_score(const RankedList& list, const Corpus& corpus, std::size_t k, double smoothing) {
  ISCR_EXPECT(!list.empty(), "clarity score needs a non-empty ranked list");
  const std::size_t m = std::min(k, list.size());
  std::vector<double> pooled(corpus.vocabulary_size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = corpus.document(list.entries[i].doc);
    for (const auto& e : d.retrieval_counts) pooled[e.term] += e.value;
    total += d.retrieval_length;
  }
  double kl = 0.0;
  for (std::size_t t = 0; t < pooled.size(); ++t) {
    const double pc = corpus.collection_probability(static_cast<TermId>(t));
    if (pc <= 0.0) continue;
    const double p = (1.0 - smoothing) * pooled[t] / total + smoothing * pc;
    kl += p * std::log(p / pc);
  }
  return std::max(0.0, kl);
}

/// Normalized entropy of the softmax over the top-k scores, in [0,1].
inline double ambiguity_score(const RankedList& list, std::size_t k) {
  ISCR_EXPECT(k >= 2, "ambiguity score needs k >= 2");
  const std::size_t m = std::min(k, list.size());
  if (m < 2) return 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) top = std::max(top, list.entries[i].score);
  std::vector<double> w(m);
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) z += (w[i] = std::exp(list.entries[i].score - top));
  double h = 0.0;
  for (double x : w) {
    const double p = x / z;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(m)), 0.0, 1.0);
}

/// Mean retrieval-score gain of the top-k documents over the collection baseline
/// sum_t q(t) ln P_C(t).
inline double wig_score(const QueryModel& q, const RankedList& list, const Corpus& corpus, std::size_t k) {
  ISCR_EXPECT(k >= 1, "WIG needs k >= 1");
  ISCR_EXPECT(!list.empty(), "WIG needs a non-empty ranked list");
  double baseline = 0.0;
  for (const auto& e : q.weights()) {
    const double pc = corpus.collection_probability(e.term);
    if (pc > 0.0) baseline += e.value * std::log(pc);
  }
  const std::size_t m = std::min(k, list.size());
  double gain = 0.0;
  for (std::size_t i = 0; i < m; ++i) gain += list.entries[i].score - baseline;
  return gain / static_cast<double>(m);
}

inline ManagerState manager_state(const QueryModel& q, const RankedList& list, const Corpus& corpus,
                                  const FeatureParams& fp, double smoothing, int turn_index) {
  ManagerState s;
  s.raw = raw_features(list, fp.raw_width);
  s.turn_index = turn_index;
  if (fp.mode == FeatureMode::HumanRaw) {
    if (list.empty()) {
      s.human = std::vector<double>{0.0, 0.0, 0.0};
    } else {
      s.human = std::vector<double>{clarity_score(list, corpus, fp.predictor_depth, smoothing),
                                    ambiguity_score(list, std::max<std::size_t>(2, fp.predictor_depth)),
                                    wig_score(q, list, corpus, fp.predictor_depth)};
    }
  }
  return s;
}

inline SimulatorState simulator_state(const RankedList& list, const QueryRecord& query, std::size_t k) {
  SimulatorState s;
  s.relevance_bits.assign(k, 0.0);
  for (std::size_t i = 0; i < std::min(k, list.size()); ++i)
    if (query.is_relevant(list.entries[i].doc)) s.relevance_bits[i] = 1.0;
  return s;
}

}  // namespace iscr
