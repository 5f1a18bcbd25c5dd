#pragma once

// Ranking quality (AP / MAP) and the distribution statistics used to compare
// how simulated and human users choose among ranked candidates.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "iscr/retrieval.hpp"

namespace iscr {

/// Standard non-interpolated average precision. Relevant documents that were
/// not retrieved contribute zero.
inline double average_precision(const RankedList& list, const QueryRecord& query) {
  if (query.relevant_indices.empty())
    throw ConfigError("average precision is undefined for query '" + query.id + "' without relevant documents");
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < list.entries.size(); ++rank) {
    if (query.is_relevant(list.entries[rank].doc)) {
      hits += 1.0;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(query.relevant_indices.size());
}

inline double mean_average_precision(std::span<const double> per_query_ap) {
  if (per_query_ap.empty()) throw ConfigError("MAP over an empty query set");
  double s = 0.0;
  for (double ap : per_query_ap) s += ap;
  return s / static_cast<double>(per_query_ap.size());
}

/// Probability vector over labelled outcomes (e.g. "1st".."4th").
struct ActionDistribution {
  std::vector<std::string> labels;
  std::vector<double> probabilities;
  std::size_t samples = 0;

  static ActionDistribution from_counts(std::vector<std::string> labels, std::span<const std::size_t> counts) {
    ISCR_EXPECT(labels.size() == counts.size(), "label/count size mismatch");
    ActionDistribution d;
    d.labels = std::move(labels);
    for (auto c : counts) d.samples += c;
    if (d.samples == 0) throw ContractError("action distribution needs at least one sample");
    for (auto c : counts) d.probabilities.push_back(static_cast<double>(c) / static_cast<double>(d.samples));
    return d;
  }
};

inline std::vector<std::string> rank_labels(std::size_t n = 4) {
  static const char* names[] = {"1st", "2nd", "3rd"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i < 3 ? names[i] : std::to_string(i + 1) + "th");
  return out;
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(const ActionDistribution& p) {
  double h = 0.0;
  for (double x : p.probabilities)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// KL(p || q) after add-epsilon smoothing and renormalization of both sides.
inline double kl_divergence(const ActionDistribution& p, const ActionDistribution& q, double epsilon_smooth = 1e-6) {
  if (p.labels != q.labels) throw ContractError("KL divergence requires matching outcome labels");
  const std::size_t n = p.probabilities.size();
  auto smooth = [&](const std::vector<double>& v) {
    std::vector<double> out(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (out[i] = v[i] + epsilon_smooth);
    for (auto& x : out) x /= s;
    return out;
  };
  const auto ps = smooth(p.probabilities);
  const auto qs = smooth(q.probabilities);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (ps[i] > 0.0) kl += ps[i] * std::log(ps[i] / qs[i]);
  return kl < 0.0 ? 0.0 : kl;
}

}  // namespace iscr
