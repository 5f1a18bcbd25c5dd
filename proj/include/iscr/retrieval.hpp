#pragma once

// Query-likelihood retrieval with Jelinek-Mercer smoothing, and the feedback
// operators that turn a user reply into an updated query model.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "iscr/corpus.hpp"

namespace iscr {

/// Normalized term distribution plus the original query it was derived from.
class QueryModel {
 public:
  QueryModel() = default;

  /// Normalizes `weights`; the result is its own origin.
  static QueryModel from_weights(SparseVector weights) {
    QueryModel q;
    q.weights_ = normalized(std::move(weights));
    q.origin_ = std::make_shared<const SparseVector>(q.weights_);
    return q;
  }

  static QueryModel from_query(const QueryRecord& rec) { return from_weights(rec.term_weights); }

  /// Same origin, new (normalized) weights.
  QueryModel with_weights(SparseVector weights) const {
    QueryModel q;
    q.weights_ = normalized(std::move(weights));
    q.origin_ = origin_;
    return q;
  }

  const SparseVector& weights() const { return weights_; }
  const SparseVector& origin() const { return *origin_; }
  double weight(TermId t) const { return sparse_get(weights_, t); }
  bool empty() const { return weights_.empty(); }

  bool operator==(const QueryModel& o) const {
    return weights_ == o.weights_ && origin() == o.origin();
  }

 private:
  static SparseVector normalized(SparseVector v) {
    std::sort(v.begin(), v.end(), [](const TermWeight& a, const TermWeight& b) { return a.term < b.term; });
    SparseVector out;
    for (const auto& e : v) {
      ISCR_EXPECT(e.value >= 0.0 && std::isfinite(e.value), "query weights must be finite and non-negative");
      if (e.value == 0.0) continue;
      if (!out.empty() && out.back().term == e.term)
        out.back().value += e.value;
      else
        out.push_back(e);
    }
    const double s = sparse_sum(out);
    ISCR_EXPECT(s > 0.0, "query model needs positive mass");
    for (auto& e : out) e.value /= s;
    return out;
  }

  SparseVector weights_;
  std::shared_ptr<const SparseVector> origin_ = std::make_shared<const SparseVector>();
};

struct RankedEntry {
  DocIndex doc;
  double score;
  bool operator==(const RankedEntry&) const = default;
};

/// Descending by score; ties by ascending document id (== ascending index).
struct RankedList {
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const RankedList&) const = default;
};

struct RetrievalParams {
  double smoothing = 0.5;  // Jelinek-Mercer weight on the collection model
  std::size_t depth = 1000;
};

struct FeedbackParams {
  double mixture_noise = 0.5;  // weight of the collection model in the feedback-document mixture
  double feedback_alpha = 0.5;
  double term_boost = 0.3;
  double topic_alpha = 0.3;
  int em_max_iterations = 30;
  double em_tolerance = 1e-6;
};

/// sum_t q(t) ln((1-s) P_ml(t|d) + s P_C(t)). Terms with zero collection
/// probability are skipped: they would contribute the same -inf to every document.
inline double score_document(const QueryModel& q, const Document& d, const Corpus& corpus, double smoothing) {
  ISCR_EXPECT(smoothing > 0.0 && smoothing < 1.0, "smoothing must lie strictly inside (0,1)");
  double score = 0.0;
  auto dit = d.retrieval_counts.begin();
  const auto dend = d.retrieval_counts.end();
  for (const auto& qe : q.weights()) {
    const double pc = corpus.collection_probability(qe.term);
    if (pc <= 0.0) continue;
    while (dit != dend && dit->term < qe.term) ++dit;
    const double count = (dit != dend && dit->term == qe.term) ? dit->value : 0.0;
    const double p = (1.0 - smoothing) * (count / d.retrieval_length) + smoothing * pc;
    score += qe.value * std::log(p);
  }
  return score;
}

inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc < b.doc;
}

inline RankedList retrieve(const QueryModel& q, const Corpus& corpus, const RetrievalParams& params) {
  ISCR_EXPECT(params.depth >= 1, "retrieval depth must be >= 1");
  RankedList list;
  list.entries.reserve(corpus.size());
  for (DocIndex d = 0; d < corpus.size(); ++d)
    list.entries.push_back({d, score_document(q, corpus.document(d), corpus, params.smoothing)});
  const std::size_t n = std::min(params.depth, list.entries.size());
  std::partial_sort(list.entries.begin(), list.entries.begin() + static_cast<std::ptrdiff_t>(n),
                    list.entries.end(), ranks_before);
  list.entries.resize(n);
  return list;
}

// ---------------------------------------------------------------------------
// Feedback

struct RelevantDoc {
  std::string doc_id;
};
struct KeyTermAnswer {
  std::string term;
  bool yes;
};
struct RequestTerm {
  std::string term;
};
struct TopicChoice {
  std::string topic_id;
};

using FeedbackEvidence = std::variant<RelevantDoc, KeyTermAnswer, RequestTerm, TopicChoice>;

struct FeedbackModel {
  SparseVector distribution;             // theta_F, sums to 1
  std::vector<double> log_likelihoods;   // one per EM iteration, after the M-step
};

/// EM estimate of the topical component of a feedback document modeled as
/// (1-mu) theta_F + mu P_C.
inline FeedbackModel estimate_feedback_model(const Document& d, const Corpus& corpus, const FeedbackParams& p) {
  const double mu = p.mixture_noise;
  ISCR_EXPECT(mu >= 0.0 && mu < 1.0, "mixture noise weight must lie in [0,1)");
  FeedbackModel fm;
  const auto& counts = d.retrieval_counts;
  std::vector<double> theta(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) theta[i] = counts[i].value / d.retrieval_length;

  auto log_likelihood = [&] {
    double ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i)
      ll += counts[i].value *
            std::log((1.0 - mu) * theta[i] + mu * corpus.collection_probability(counts[i].term));
    return ll;
  };

  double prev = log_likelihood();
  std::vector<double> expected(counts.size());
  for (int it = 0; it < p.em_max_iterations; ++it) {
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double topical = (1.0 - mu) * theta[i];
      const double denom = topical + mu * corpus.collection_probability(counts[i].term);
      expected[i] = denom > 0.0 ? counts[i].value * topical / denom : 0.0;
      total += expected[i];
    }
    if (!(total > 0.0)) break;
    for (std::size_t i = 0; i < counts.size(); ++i) theta[i] = expected[i] / total;
    const double ll = log_likelihood();
    fm.log_likelihoods.push_back(ll);
    if (std::abs(ll - prev) < p.em_tolerance) break;
    prev = ll;
  }
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (theta[i] > 0.0) fm.distribution.push_back({counts[i].term, theta[i]});
  return fm;
}

namespace detail {

inline SparseVector sparse_mix(const SparseVector& a, double wa, const SparseVector& b, double wb) {
  SparseVector out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->term < ib->term)) {
      out.push_back({ia->term, wa * ia->value});
      ++ia;
    } else if (ia == a.end() || ib->term < ia->term) {
      out.push_back({ib->term, wb * ib->value});
      ++ib;
    } else {
      out.push_back({ia->term, wa * ia->value + wb * ib->value});
      ++ia;
      ++ib;
    }
  }
  return out;
}

}  // namespace detail

/// Returns the updated query model. Evidence naming a term outside the
/// vocabulary leaves the query unchanged. Unknown document or topic ids are
/// contract violations.
inline QueryModel apply_feedback(const QueryModel& q, const FeedbackEvidence& evidence, const Corpus& corpus,
                                 const FeedbackParams& p) {
  struct Visitor {
    const QueryModel& q;
    const Corpus& corpus;
    const FeedbackParams& p;

    QueryModel boost(const std::string& term) const {
      auto t = corpus.find_term(term);
      if (!t) return q;
      SparseVector w = detail::sparse_mix(q.weights(), 1.0, SparseVector{{*t, p.term_boost}}, 1.0);
      return q.with_weights(std::move(w));
    }

    QueryModel operator()(const RelevantDoc& e) const {
      auto d = corpus.find_document(e.doc_id);
      if (!d) throw ContractError("feedback names unknown document '" + e.doc_id + "'");
      FeedbackModel fm = estimate_feedback_model(corpus.document(*d), corpus, p);
      if (fm.distribution.empty()) return q;
      return q.with_weights(
          detail::sparse_mix(q.origin(), 1.0 - p.feedback_alpha, fm.distribution, p.feedback_alpha));
    }
    QueryModel operator()(const RequestTerm& e) const { return boost(e.term); }
    QueryModel operator()(const KeyTermAnswer& e) const {
      if (e.yes) return boost(e.term);
      auto t = corpus.find_term(e.term);
      if (!t || q.weight(*t) == 0.0) return q;
      SparseVector w;
      for (const auto& x : q.weights())
        if (x.term != *t) w.push_back(x);
      if (w.empty()) return q;  // removing the only term would leave no query
      return q.with_weights(std::move(w));
    }
    QueryModel operator()(const TopicChoice& e) const {
      const Topic* topic = corpus.find_topic(e.topic_id);
      if (!topic) throw ContractError("feedback names unknown topic '" + e.topic_id + "'");
      return q.with_weights(
          detail::sparse_mix(q.weights(), 1.0 - p.topic_alpha, topic->distribution, p.topic_alpha));
    }
  };
  return std::visit(Visitor{q, corpus, p}, evidence);
}

}  // namespace iscr
