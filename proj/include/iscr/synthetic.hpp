#pragma once

// Planted-topic synthetic collection used in place of a real spoken archive.
//
// Every query belongs to a coarse topic and owns a private "facet" vocabulary.
// Relevant documents mix background, topic and facet terms; other documents of
// the same topic share the topic vocabulary and only leak a little facet
// vocabulary, so the first-pass ranking is confused and feedback that surfaces
// facet terms raises MAP. Each topic also has a headline word and a few generic
// words that every query repeats; they dominate S(t) without separating
// relevant documents from same-topic ones. Rare facet words are misrecognized
// more often than common ones, as out-of-vocabulary words are in real ASR.

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iscr/corpus.hpp"
#include "iscr/rng.hpp"

namespace iscr {

enum class TranscriptMode { Clean, OneBest, Lattice };

inline TranscriptMode transcript_mode_from_string(const std::string& s) {
  if (s == "clean") return TranscriptMode::Clean;
  if (s == "onebest") return TranscriptMode::OneBest;
  if (s == "lattice") return TranscriptMode::Lattice;
  throw ConfigError("unknown transcript mode '" + s + "' (expected clean | onebest | lattice)");
}

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t n_docs = 200;
  std::size_t n_queries = 30;
  std::size_t n_topics = 10;
  TranscriptMode mode = TranscriptMode::OneBest;
  double recognition_error = 0.1;
  std::size_t background_terms = 300;
  std::size_t topic_terms = 20;
  std::size_t facet_terms = 8;
  std::size_t facet_subset = 3;    // facet terms used by each relevant document
  double facet_share = 0.15;       // token share of facet terms in relevant documents
  double topical_fraction = 0.8;   // share of non-relevant documents drawn from a topic
  double query_facet_prob = 0.2;   // chance that a query mentions one facet term
  double generic_share = 0.14;     // token share of non-discriminative topic words, split evenly
  std::size_t generic_terms = 2;   // how many such words per topic; queries use all of them
  double facet_leak = 0.05;        // facet share in non-relevant documents of the same topic
  double facet_error = 0.3;        // recognition error for rare facet terms; negative: recognition_error
};

namespace detail {

inline std::string numbered(const char* fmt, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

struct Categorical {
  std::vector<double> cumulative;
  explicit Categorical(const std::vector<double>& w) {
    double s = 0.0;
    for (double x : w) cumulative.push_back(s += x);
    for (double& c : cumulative) c /= s;
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
  }
};

}  // namespace detail

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.n_docs < 20) throw ConfigError("synthetic corpus needs at least 20 documents");
  if (spec.n_queries < 5) throw ConfigError("synthetic corpus needs at least 5 queries");
  if (spec.n_topics < 4) throw ConfigError("synthetic corpus needs at least 4 topics");
  Rng rng(spec.seed);
  using detail::numbered;

  std::vector<std::string> background;
  std::vector<double> zipf;
  for (std::size_t i = 0; i < spec.background_terms; ++i) {
    background.push_back(numbered("bg%03zu", i));
    zipf.push_back(1.0 / static_cast<double>(i + 1));
  }
  const detail::Categorical bg_dist(zipf);

  auto hot = [](std::size_t topic) { return numbered("t%02zu_head", topic); };
  auto generic = [](std::size_t topic, std::size_t k) { return numbered("t%02zu_g%zu", topic, k); };
  auto topic_term = [](std::size_t topic, std::size_t k) { return numbered("t%02zu_%02zu", topic, k); };
  auto facet_term = [](std::size_t query, std::size_t k) { return numbered("q%02zu_f%zu", query, k); };

  // Per-query relevant document counts, bounded so that enough non-relevant documents remain.
  const std::size_t r_max = std::max<std::size_t>(1, (spec.n_docs * 7) / (10 * spec.n_queries));
  std::vector<std::size_t> relevant_count(spec.n_queries);
  for (auto& r : relevant_count) r = std::min(r_max, 3 + rng.index(4));

  struct DocPlan {
    int query = -1;  // owning query for relevant documents
    int topic = -1;  // -1: background document
  };
  std::vector<DocPlan> plans;
  for (std::size_t q = 0; q < spec.n_queries; ++q)
    for (std::size_t i = 0; i < relevant_count[q]; ++i)
      plans.push_back({static_cast<int>(q), static_cast<int>(q % spec.n_topics)});
  while (plans.size() < spec.n_docs) {
    if (rng.uniform() < spec.topical_fraction)
      plans.push_back({-1, static_cast<int>(rng.index(spec.n_topics))});
    else
      plans.push_back({-1, -1});
  }
  rng.shuffle(plans.begin(), plans.end());

  std::vector<std::map<std::string, double>> manual(plans.size());
  std::set<std::string> rare;  // facet vocabulary
  std::vector<std::vector<std::string>> relevant(spec.n_queries);
  std::vector<std::string> doc_ids;
  for (std::size_t d = 0; d < plans.size(); ++d) {
    doc_ids.push_back(numbered("d%04zu", d));
    const auto& plan = plans[d];
    const std::size_t length = 60 + rng.index(81);
    std::vector<std::size_t> facet_subset;
    if (plan.query >= 0) {
      relevant[static_cast<std::size_t>(plan.query)].push_back(doc_ids.back());
      std::vector<std::size_t> all(spec.facet_terms);
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
      rng.shuffle(all.begin(), all.end());
      facet_subset.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(spec.facet_subset, all.size())));
    }
    // source mixture: background, headline, topic vocabulary, facet vocabulary, generic topic term
    const double g = spec.generic_share;
    std::vector<double> mix;
    if (plan.query >= 0)
      mix = {0.73 - spec.facet_share - g, 0.07, 0.20, spec.facet_share, g};
    else if (plan.topic >= 0)
      mix = {0.55 - g - spec.facet_leak, 0.07, 0.38, spec.facet_leak, g};
    else
      mix = {0.92, 0.0, 0.08, 0.0, 0.0};
    const detail::Categorical source(mix);
    const std::size_t topic = plan.topic >= 0 ? static_cast<std::size_t>(plan.topic) : rng.index(spec.n_topics);
    for (std::size_t i = 0; i < length; ++i) {
      switch (source.draw(rng)) {
        case 0: manual[d][background[bg_dist.draw(rng)]] += 1.0; break;
        case 1: manual[d][hot(topic)] += 1.0; break;
        case 2: manual[d][topic_term(topic, rng.index(spec.topic_terms))] += 1.0; break;
        case 4: manual[d][generic(topic, rng.index(std::max<std::size_t>(1, spec.generic_terms)))] += 1.0; break;
        default:
          if (plan.query >= 0) {
            const auto f = facet_term(static_cast<std::size_t>(plan.query), facet_subset[rng.index(facet_subset.size())]);
            manual[d][f] += 1.0;
            rare.insert(f);
          } else {  // leaked facet of some query on this topic
            const std::size_t siblings = (spec.n_queries - topic + spec.n_topics - 1) / spec.n_topics;
            const std::size_t q = topic + spec.n_topics * rng.index(std::max<std::size_t>(1, siblings));
            const auto f = facet_term(q, rng.index(spec.facet_terms));
            manual[d][f] += 1.0;
            rare.insert(f);
          }
          break;
      }
    }
  }

  // Recognizer output: each token may be confused with a fixed partner term.
  std::vector<std::string> vocab;
  for (const auto& m : manual)
    for (const auto& [t, c] : m) vocab.push_back(t);
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  std::map<std::string, std::string> partner;
  for (const auto& t : vocab) partner[t] = vocab[rng.index(vocab.size())];

  CorpusBuilder builder;
  for (std::size_t d = 0; d < plans.size(); ++d) {
    std::map<std::string, double> recognized;
    for (const auto& [t, c] : manual[d]) {
      const double err = rare.count(t) && spec.facet_error >= 0.0 ? spec.facet_error : spec.recognition_error;
      switch (spec.mode) {
        case TranscriptMode::Clean: recognized[t] += c; break;
        case TranscriptMode::OneBest:
          for (int k = 0; k < static_cast<int>(c); ++k) recognized[rng.uniform() < err ? partner[t] : t] += 1.0;
          break;
        case TranscriptMode::Lattice:
          recognized[t] += c * (1.0 - err);
          recognized[partner[t]] += c * err;
          break;
      }
    }
    builder.add_document(doc_ids[d], std::move(recognized), manual[d]);
  }
  for (std::size_t j = 0; j < spec.n_topics; ++j) {
    std::map<std::string, double> dist;
    dist[hot(j)] = 0.2;
    for (std::size_t k = 0; k < spec.topic_terms; ++k) dist[topic_term(j, k)] += 0.8 / static_cast<double>(spec.topic_terms);
    std::map<std::string, double> present;
    double mass = 0.0;
    for (const auto& [t, p] : dist) {
      if (std::binary_search(vocab.begin(), vocab.end(), t)) {
        present[t] = p;
        mass += p;
      }
    }
    for (auto& [t, p] : present) p /= mass;
    builder.add_topic(numbered("T%02zu", j), "topic " + std::to_string(j), std::move(present));
  }

  Dataset ds;
  ds.corpus = builder.build();
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const std::size_t topic = q % spec.n_topics;
    std::map<std::string, double> terms;
    terms[hot(topic)] = 1.0;
    for (std::size_t k = 0; spec.generic_share > 0.0 && k < spec.generic_terms; ++k)
      if (ds.corpus.find_term(generic(topic, k))) terms[generic(topic, k)] = 1.0;
    for (int tries = 0; tries < 50; ++tries) {
      const auto t = topic_term(topic, rng.index(spec.topic_terms));
      if (ds.corpus.find_term(t)) {
        terms[t] = 1.0;
        break;
      }
    }
    if (rng.uniform() < spec.query_facet_prob) {
      const auto f = facet_term(q, rng.index(spec.facet_terms));
      if (ds.corpus.find_term(f)) terms[f] = 0.5;
    }
    std::vector<std::string> topics{numbered("T%02zu", topic)};
    while (topics.size() < 4) {
      auto t = numbered("T%02zu", rng.index(spec.n_topics));
      if (std::find(topics.begin(), topics.end(), t) == topics.end()) topics.push_back(t);
    }
    ds.queries.push_back(make_query(ds.corpus, numbered("q%03zu", q), std::move(terms), relevant[q], std::move(topics)));
  }
  return ds;
}

struct SyntheticFiles {
  std::filesystem::path corpus, queries, topics;
};

/// Writes corpus.jsonl, queries.jsonl and topics.jsonl into `dir`. Deterministic in the seed.
inline SyntheticFiles generate_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const Dataset ds = make_synthetic_dataset(spec);
  std::filesystem::create_directories(dir);
  SyntheticFiles f{dir / "corpus.jsonl", dir / "queries.jsonl", dir / "topics.jsonl"};
  write_corpus_file(ds.corpus, f.corpus.string());
  write_query_file(ds.queries, f.queries.string());
  write_topic_file(ds.corpus, f.topics.string());
  return f;
}

}  // namespace iscr
