#pragma once

// Document collection, queries, relevance judgments, topics and key terms.
//
// Files are line-delimited JSON records (UTF-8). Blank lines and lines that
// start with '#' are ignored.
//
//   corpus:    {"meta":{"format":"iscr-corpus","version":1,"one_best_equals_manual":false}}   (optional, first record)
//              {"id":"d001","retrieval_counts":{"term":1.5,...},"manual_counts":{"term":2,...}}
//   queries:   {"id":"q01","terms":{"term":1.0},"relevant_docs":["d001"],"topic_ranking":["T1","T2","T3","T4"]}
//   topics:    {"id":"T1","label":"...","terms":{"term":0.25,...}}
//   key terms: {"term":"..."}

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iscr/error.hpp"
#include "json.hpp"

namespace iscr {

using TermId = std::uint32_t;
using DocIndex = std::size_t;

struct TermWeight {
  TermId term;
  double value;
  bool operator==(const TermWeight&) const = default;
};

/// Sparse term vector, sorted by ascending term id, no duplicates.
using SparseVector = std::vector<TermWeight>;

inline double sparse_sum(const SparseVector& v) {
  double s = 0.0;
  for (const auto& e : v) s += e.value;
  return s;
}

inline double sparse_get(const SparseVector& v, TermId t) {
  auto it = std::lower_bound(v.begin(), v.end(), t,
                             [](const TermWeight& e, TermId id) { return e.term < id; });
  return (it != v.end() && it->term == t) ? it->value : 0.0;
}

struct Document {
  std::string id;
  SparseVector retrieval_counts;  // expected counts; may be fractional (lattice mode)
  SparseVector manual_counts;     // integer counts from the manual transcription
  double retrieval_length = 0.0;

  bool operator==(const Document&) const = default;
};

struct Topic {
  std::string id;
  std::string label;
  SparseVector distribution;  // sums to 1

  bool operator==(const Topic&) const = default;
};

struct QueryRecord {
  std::string id;
  std::map<std::string, double> terms;       // as written in the file
  SparseVector term_weights;                 // in-vocabulary subset of `terms`
  std::vector<std::string> relevant_docs;    // sorted, unique
  std::vector<DocIndex> relevant_indices;    // sorted, parallel to relevant_docs
  std::vector<std::string> topic_ranking;    // most relevant first

  bool is_relevant(DocIndex d) const {
    return std::binary_search(relevant_indices.begin(), relevant_indices.end(), d);
  }
  bool operator==(const QueryRecord&) const = default;
};

class CorpusBuilder;

/// Immutable, fully indexed collection. Safe for concurrent reads.
class Corpus {
 public:
  Corpus() = default;

  std::size_t size() const { return docs_.size(); }
  const std::vector<Document>& documents() const { return docs_; }
  const Document& document(DocIndex d) const { return docs_.at(d); }

  std::optional<DocIndex> find_document(std::string_view id) const {
    auto it = std::lower_bound(docs_.begin(), docs_.end(), id,
                               [](const Document& d, std::string_view k) { return d.id < k; });
    if (it == docs_.end() || it->id != id) return std::nullopt;
    return static_cast<DocIndex>(it - docs_.begin());
  }

  std::size_t vocabulary_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::string& term(TermId t) const { return vocab_.at(t); }

  std::optional<TermId> find_term(std::string_view t) const {
    auto it = std::lower_bound(vocab_.begin(), vocab_.end(), t);
    if (it == vocab_.end() || *it != t) return std::nullopt;
    return static_cast<TermId>(it - vocab_.begin());
  }

  std::uint32_t df(TermId t) const { return df_.at(t); }

  /// ln(|D| / df(t)).
  double idf(TermId t) const {
    return std::log(static_cast<double>(docs_.size()) / static_cast<double>(df_.at(t)));
  }

  /// Unknown terms have idf 0.
  double idf(std::string_view t) const {
    auto id = find_term(t);
    return id ? idf(*id) : 0.0;
  }

  double collection_probability(TermId t) const { return collection_.at(t); }
  std::span<const double> collection_model() const { return collection_; }

  /// Total manual-transcription count of a term over the whole collection.
  double manual_total(TermId t) const { return manual_total_.at(t); }

  const std::vector<Topic>& topics() const { return topics_; }
  const Topic* find_topic(std::string_view id) const {
    auto it = std::lower_bound(topics_.begin(), topics_.end(), id,
                               [](const Topic& t, std::string_view k) { return t.id < k; });
    if (it == topics_.end() || it->id != id) return nullptr;
    return &*it;
  }

  const std::vector<TermId>& key_terms() const { return key_terms_; }
  bool key_terms_explicit() const { return key_terms_explicit_; }
  bool one_best_equals_manual() const { return one_best_equals_manual_; }

  bool operator==(const Corpus&) const = default;

 private:
  friend class CorpusBuilder;

  std::vector<Document> docs_;
  std::vector<std::string> vocab_;
  std::vector<std::uint32_t> df_;
  std::vector<double> collection_;
  std::vector<double> manual_total_;
  std::vector<Topic> topics_;
  std::vector<TermId> key_terms_;
  bool key_terms_explicit_ = false;
  bool one_best_equals_manual_ = false;
};

/// Collects string-keyed records and produces an indexed Corpus.
class CorpusBuilder {
 public:
  void set_one_best_equals_manual(bool v) { one_best_equals_manual_ = v; }
  void set_key_term_count(std::size_t m) { key_term_count_ = m; }
  void set_key_terms(std::vector<std::string> terms) { explicit_key_terms_ = std::move(terms); }

  void add_document(std::string id, std::map<std::string, double> retrieval_counts,
                    std::map<std::string, double> manual_counts = {}) {
    docs_.push_back({std::move(id), std::move(retrieval_counts), std::move(manual_counts)});
  }

  void add_topic(std::string id, std::string label, std::map<std::string, double> terms) {
    topics_.push_back({std::move(id), std::move(label), std::move(terms)});
  }

  Corpus build() const {
    Corpus c;
    c.one_best_equals_manual_ = one_best_equals_manual_;
    if (docs_.empty()) throw ValidationError("corpus contains no documents");

    std::vector<const RawDoc*> order;
    for (const auto& d : docs_) order.push_back(&d);
    std::sort(order.begin(), order.end(),
              [](const RawDoc* a, const RawDoc* b) { return a->id < b->id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (order[i]->id == order[i - 1]->id)
        throw ValidationError("duplicate document id '" + order[i]->id + "'");
    }

    std::vector<std::string> vocab;
    for (const RawDoc* d : order) {
      for (const auto& [t, v] : d->retrieval) vocab.push_back(t);
      for (const auto& [t, v] : d->manual) vocab.push_back(t);
    }
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    c.vocab_ = std::move(vocab);
    const std::size_t V = c.vocab_.size();

    auto to_sparse = [&](const std::map<std::string, double>& m) {
      SparseVector out;
      out.reserve(m.size());
      for (const auto& [t, v] : m) {
        if (v == 0.0) continue;
        out.push_back({*c.find_term(t), v});
      }
      return out;  // std::map order == vocabulary order
    };

    std::vector<double> total_retrieval(V, 0.0);
    double grand_total = 0.0;
    std::vector<std::uint32_t> manual_df(V, 0), retrieval_df(V, 0);
    c.manual_total_.assign(V, 0.0);
    for (const RawDoc* rd : order) {
      Document d;
      d.id = rd->id;
      for (const auto& [t, v] : rd->retrieval) {
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ValidationError("document '" + rd->id + "': retrieval count for '" + t +
                                "' must be a non-negative finite number");
      }
      d.retrieval_counts = to_sparse(rd->retrieval);
      if (d.retrieval_counts.empty())
        throw ValidationError("document '" + rd->id + "' has no positive retrieval count");
      if (rd->manual.empty()) {
        if (!one_best_equals_manual_)
          throw ValidationError("document '" + rd->id +
                                "' has no manual counts and the corpus is not one-best-equals-manual");
        for (const auto& e : d.retrieval_counts) {
          if (e.value != std::floor(e.value))
            throw ValidationError("document '" + rd->id +
                                  "': soft retrieval counts cannot mirror manual counts");
        }
        d.manual_counts = d.retrieval_counts;
      } else {
        for (const auto& [t, v] : rd->manual) {
          if (!(v >= 0.0) || v != std::floor(v))
            throw ValidationError("document '" + rd->id + "': manual count for '" + t +
                                  "' must be a non-negative integer");
        }
        d.manual_counts = to_sparse(rd->manual);
      }
      for (const auto& e : d.retrieval_counts) {
        d.retrieval_length += e.value;
        total_retrieval[e.term] += e.value;
        ++retrieval_df[e.term];
      }
      for (const auto& e : d.manual_counts) {
        ++manual_df[e.term];
        c.manual_total_[e.term] += e.value;
      }
      grand_total += d.retrieval_length;
      c.docs_.push_back(std::move(d));
    }

    c.df_.resize(V);
    c.collection_.resize(V);
    for (std::size_t t = 0; t < V; ++t) {
      // Terms seen only in recognizer output fall back to their retrieval-side df.
      c.df_[t] = manual_df[t] > 0 ? manual_df[t] : retrieval_df[t];
      c.collection_[t] = total_retrieval[t] / grand_total;
    }

    for (const auto& rt : topics_) {
      Topic topic{rt.id, rt.label, {}};
      double sum = 0.0;
      for (const auto& [t, v] : rt.terms) {
        if (!c.find_term(t))
          throw ValidationError("topic '" + rt.id + "' references unknown term '" + t + "'");
        if (!(v >= 0.0)) throw ValidationError("topic '" + rt.id + "' has a negative weight");
        sum += v;
      }
      if (!(sum > 0.0)) throw ValidationError("topic '" + rt.id + "' has an empty distribution");
      if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("topic '" + rt.id + "' distribution does not sum to 1");
      topic.distribution = to_sparse(rt.terms);
      c.topics_.push_back(std::move(topic));
    }
    std::sort(c.topics_.begin(), c.topics_.end(),
              [](const Topic& a, const Topic& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < c.topics_.size(); ++i) {
      if (c.topics_[i].id == c.topics_[i - 1].id)
        throw ValidationError("duplicate topic id '" + c.topics_[i].id + "'");
    }

    if (explicit_key_terms_) {
      c.key_terms_explicit_ = true;
      for (const auto& t : *explicit_key_terms_) {
        auto id = c.find_term(t);
        if (!id) throw ValidationError("key term '" + t + "' is not in the vocabulary");
        if (std::find(c.key_terms_.begin(), c.key_terms_.end(), *id) == c.key_terms_.end())
          c.key_terms_.push_back(*id);
      }
    } else {
      std::vector<std::pair<double, TermId>> scored;
      for (TermId t = 0; t < V; ++t) scored.push_back({c.manual_total_[t] * c.idf(t), t});
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t i = 0; i < std::min(key_term_count_, scored.size()); ++i)
        c.key_terms_.push_back(scored[i].second);
    }
    return c;
  }

 private:
  struct RawDoc {
    std::string id;
    std::map<std::string, double> retrieval;
    std::map<std::string, double> manual;
  };
  struct RawTopic {
    std::string id;
    std::string label;
    std::map<std::string, double> terms;
  };

  std::vector<RawDoc> docs_;
  std::vector<RawTopic> topics_;
  std::optional<std::vector<std::string>> explicit_key_terms_;
  std::size_t key_term_count_ = 50;
  bool one_best_equals_manual_ = false;
};

/// Resolves a query against a corpus and validates referential integrity.
inline QueryRecord make_query(const Corpus& corpus, std::string id, std::map<std::string, double> terms,
                              std::vector<std::string> relevant_docs,
                              std::vector<std::string> topic_ranking, bool require_topics = true) {
  QueryRecord q;
  q.id = std::move(id);
  q.terms = std::move(terms);
  for (const auto& [t, w] : q.terms) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("query '" + q.id + "': term weight for '" + t + "' must be positive");
    if (auto tid = corpus.find_term(t)) q.term_weights.push_back({*tid, w});
  }
  std::sort(q.term_weights.begin(), q.term_weights.end(),
            [](const TermWeight& a, const TermWeight& b) { return a.term < b.term; });
  if (q.term_weights.empty())
    throw ValidationError("query '" + q.id + "' has no term in the corpus vocabulary");

  std::sort(relevant_docs.begin(), relevant_docs.end());
  relevant_docs.erase(std::unique(relevant_docs.begin(), relevant_docs.end()), relevant_docs.end());
  if (relevant_docs.empty()) throw ValidationError("query '" + q.id + "' has no relevant documents");
  for (const auto& d : relevant_docs) {
    auto idx = corpus.find_document(d);
    if (!idx)
      throw ValidationError("query '" + q.id + "' references unknown document '" + d + "'");
    q.relevant_indices.push_back(*idx);
  }
  q.relevant_docs = std::move(relevant_docs);

  for (const auto& t : topic_ranking) {
    if (!corpus.find_topic(t))
      throw ValidationError("query '" + q.id + "' references unknown topic '" + t + "'");
  }
  if (require_topics && topic_ranking.size() < 4)
    throw ValidationError("query '" + q.id + "' needs at least 4 ranked topics");
  q.topic_ranking = std::move(topic_ranking);
  return q;
}

struct Dataset {
  Corpus corpus;
  std::vector<QueryRecord> queries;

  const QueryRecord* find_query(std::string_view id) const {
    for (const auto& q : queries)
      if (q.id == id) return &q;
    return nullptr;
  }
};

struct DataPaths {
  std::string corpus;
  std::string queries;
  std::string topics;     // optional
  std::string key_terms;  // optional; overrides the tf-idf default
};

struct LoadOptions {
  std::size_t key_term_count = 50;
  bool require_topics = true;
};

namespace detail {

using nlohmann::json;

template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(path, lineno, "record is not an object");
    try {
      fn(rec, lineno);
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, std::string("bad field: ") + e.what());
    }
  }
}

inline std::map<std::string, double> number_map(const json& rec, const char* key,
                                                const std::string& path, std::size_t line,
                                                bool required = true) {
  std::map<std::string, double> out;
  auto it = rec.find(key);
  if (it == rec.end()) {
    if (required) throw ParseError(path, line, std::string("missing field '") + key + "'");
    return out;
  }
  if (!it->is_object()) throw ParseError(path, line, std::string("'") + key + "' must be an object");
  for (auto e = it->begin(); e != it->end(); ++e) {
    if (!e.value().is_number())
      throw ParseError(path, line, std::string("'") + key + "." + e.key() + "' must be a number");
    out[e.key()] = e.value().get<double>();
  }
  return out;
}

inline std::string string_field(const json& rec, const char* key, const std::string& path,
                                std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string())
    throw ParseError(path, line, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

inline std::vector<std::string> string_list(const json& rec, const char* key, const std::string& path,
                                            std::size_t line) {
  std::vector<std::string> out;
  auto it = rec.find(key);
  if (it == rec.end()) return out;
  if (!it->is_array()) throw ParseError(path, line, std::string("'") + key + "' must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(path, line, std::string("'") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline json sparse_to_json(const Corpus& c, const SparseVector& v, bool integral) {
  json o = json::object();
  for (const auto& e : v) {
    if (integral)
      o[c.term(e.term)] = static_cast<std::int64_t>(e.value);
    else
      o[c.term(e.term)] = e.value;
  }
  return o;
}

}  // namespace detail

/// Reads the corpus, topic and key-term files into a builder-ready corpus.
inline Corpus load_corpus_file(const std::string& corpus_path, const std::string& topic_path = {},
                               const std::string& key_term_path = {}, const LoadOptions& opts = {}) {
  CorpusBuilder b;
  b.set_key_term_count(opts.key_term_count);
  bool seen_doc = false;
  detail::for_each_record(corpus_path, [&](const detail::json& rec, std::size_t line) {
    if (rec.contains("meta")) {
      if (seen_doc) throw ParseError(corpus_path, line, "meta record must come first");
      const auto& m = rec["meta"];
      b.set_one_best_equals_manual(m.value("one_best_equals_manual", false));
      return;
    }
    seen_doc = true;
    b.add_document(detail::string_field(rec, "id", corpus_path, line),
                   detail::number_map(rec, "retrieval_counts", corpus_path, line),
                   detail::number_map(rec, "manual_counts", corpus_path, line, false));
  });
  if (!topic_path.empty()) {
    detail::for_each_record(topic_path, [&](const detail::json& rec, std::size_t line) {
      b.add_topic(detail::string_field(rec, "id", topic_path, line), rec.value("label", std::string{}),
                  detail::number_map(rec, "terms", topic_path, line));
    });
  }
  if (!key_term_path.empty()) {
    std::vector<std::string> terms;
    detail::for_each_record(key_term_path, [&](const detail::json& rec, std::size_t line) {
      terms.push_back(detail::string_field(rec, "term", key_term_path, line));
    });
    b.set_key_terms(std::move(terms));
  }
  return b.build();
}

inline std::vector<QueryRecord> load_query_file(const Corpus& corpus, const std::string& query_path,
                                                const LoadOptions& opts = {}) {
  std::vector<QueryRecord> out;
  detail::for_each_record(query_path, [&](const detail::json& rec, std::size_t line) {
    auto id = detail::string_field(rec, "id", query_path, line);
    for (const auto& q : out) {
      if (q.id == id) throw ValidationError("duplicate query id '" + id + "'");
    }
    out.push_back(make_query(corpus, id, detail::number_map(rec, "terms", query_path, line),
                             detail::string_list(rec, "relevant_docs", query_path, line),
                             detail::string_list(rec, "topic_ranking", query_path, line),
                             opts.require_topics));
  });
  if (out.empty()) throw ValidationError("'" + query_path + "' contains no queries");
  return out;
}

inline Dataset load_dataset(const DataPaths& paths, const LoadOptions& opts = {}) {
  Dataset ds;
  ds.corpus = load_corpus_file(paths.corpus, paths.topics, paths.key_terms, opts);
  ds.queries = load_query_file(ds.corpus, paths.queries, opts);
  return ds;
}

inline Dataset load_corpus(const std::string& corpus_path, const std::string& query_path,
                           const LoadOptions& opts = {}) {
  return load_dataset({corpus_path, query_path, {}, {}}, opts);
}

inline void write_corpus_file(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  nlohmann::json meta = {{"meta",
                          {{"format", "iscr-corpus"},
                           {"version", 1},
                           {"one_best_equals_manual", c.one_best_equals_manual()}}}};
  out << meta.dump() << '\n';
  for (const auto& d : c.documents()) {
    nlohmann::json rec;
    rec["id"] = d.id;
    rec["retrieval_counts"] = detail::sparse_to_json(c, d.retrieval_counts, false);
    if (!c.one_best_equals_manual())
      rec["manual_counts"] = detail::sparse_to_json(c, d.manual_counts, true);
    out << rec.dump() << '\n';
  }
}

inline void write_topic_file(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const auto& t : c.topics()) {
    nlohmann::json rec;
    rec["id"] = t.id;
    rec["label"] = t.label;
    rec["terms"] = detail::sparse_to_json(c, t.distribution, false);
    out << rec.dump() << '\n';
  }
}

inline void write_key_term_file(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  for (TermId t : c.key_terms()) out << nlohmann::json{{"term", c.term(t)}}.dump() << '\n';
}

inline void write_query_file(const std::vector<QueryRecord>& queries, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const auto& q : queries) {
    nlohmann::json rec;
    rec["id"] = q.id;
    rec["terms"] = q.terms;
    rec["relevant_docs"] = q.relevant_docs;
    rec["topic_ranking"] = q.topic_ranking;
    out << rec.dump() << '\n';
  }
}

}  // namespace iscr
