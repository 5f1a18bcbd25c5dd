#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "iscr/iscr.hpp"

namespace iscr::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("iscr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Three documents over terms a..e, two topics, one query with d1 and d3 relevant.
inline Dataset toy_dataset() {
  CorpusBuilder b;
  b.add_document("d1", {{"a", 3}, {"b", 1}}, {{"a", 3}, {"b", 1}});
  b.add_document("d2", {{"b", 2}, {"c", 2}}, {{"b", 2}, {"c", 2}});
  b.add_document("d3", {{"a", 1}, {"d", 3}, {"e", 1}}, {{"a", 1}, {"d", 3}, {"e", 1}});
  b.add_topic("T1", "letters a", {{"a", 0.5}, {"d", 0.5}});
  b.add_topic("T2", "letters b", {{"b", 0.5}, {"c", 0.5}});
  b.add_topic("T3", "letter e", {{"e", 1.0}});
  b.add_topic("T4", "letter c", {{"c", 1.0}});
  Dataset ds;
  ds.corpus = b.build();
  ds.queries.push_back(make_query(ds.corpus, "q1", {{"b", 1.0}}, {"d1", "d3"}, {"T1", "T2", "T3", "T4"}));
  return ds;
}

inline SyntheticSpec small_spec(std::uint64_t seed = 7) {
  SyntheticSpec s;
  s.seed = seed;
  s.n_docs = 80;
  s.n_queries = 12;
  s.n_topics = 4;
  return s;
}

/// Tiny networks and short phases so that a full training run takes well under a second.
inline RunConfig tiny_config() {
  RunConfig c = desk_preset();
  for (auto* a : {&c.manager, &c.simulator}) {
    a->dqn.hidden = {8};
    a->dqn.batch_size = 4;
    a->dqn.replay_capacity = 200;
    a->dqn.sync_period = 5;
  }
  c.training.updates_per_phase = 5;
  c.training.epochs = 2;
  c.training.folds = 3;
  c.synthetic = small_spec();
  c.episode.simulator_k = 10;
  return c;
}

/// A manager whose greedy action is always `action`, whatever the state.
inline QLearner fixed_manager(const FeatureParams& fp, SystemAction action) {
  QLearnerConfig cfg;
  cfg.hidden = {4};
  QLearner m(manager_input_width(fp), kSystemActionCount, cfg, 1);
  auto& net = m.mutable_online();
  std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
  net.parameters()[net.layers().back().bias + static_cast<std::size_t>(action_index(action))] = 1.0;
  m.sync_target();
  return m;
}

}  // namespace iscr::test
