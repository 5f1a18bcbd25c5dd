#pragma once

// Alternating joint training of the dialogue manager and the simulator's
// decision makers, greedy evaluation, and the cross-validation harness.

#include <filesystem>
#include <functional>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iscr/config.hpp"

namespace iscr {

// ---------------------------------------------------------------------------
// Folds

/// Seeded shuffle, then round-robin assignment: fold sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 3) throw ConfigError("cross-validation needs at least 3 folds");
  if (k > n) throw ConfigError("cannot split " + std::to_string(n) + " queries into " + std::to_string(k) + " folds");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0xF01D));
  rng.shuffle(idx.begin(), idx.end());
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(idx[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct Split {
  std::vector<std::size_t> train, valid, test;  // indices into Dataset::queries
};

/// Trial t tests on fold t, tunes on fold t+1 and trains on the rest.
inline Split split_for_trial(const std::vector<std::vector<std::size_t>>& folds, std::size_t trial) {
  const std::size_t k = folds.size();
  ISCR_EXPECT(trial < k, "trial index out of range");
  Split s;
  s.test = folds[trial];
  s.valid = folds[(trial + 1) % k];
  for (std::size_t f = 0; f < k; ++f) {
    if (f == trial || f == (trial + 1) % k) continue;
    s.train.insert(s.train.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(s.train.begin(), s.train.end());
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  double mean_return = 0.0;
  double mean_map = 0.0;  // mean of final per-query AP
  double success_rate = 0.0;
  std::vector<EpisodeTrace> traces;
};

/// Greedy rollouts on `queries`. Each query gets its own seeded stream, so the
/// result does not depend on evaluation order.
inline Evaluation evaluate(const Dataset& data, const std::vector<std::size_t>& queries, const QLearner& manager,
                           const UserSimulator& simulator, const EpisodeSettings& settings, std::uint64_t seed) {
  if (queries.empty()) throw ConfigError("evaluation needs at least one query");
  Evaluation ev;
  std::size_t successes = 0;
  for (std::size_t qi : queries) {
    Rng rng(derive_seed(seed, qi));
    auto trace = run_episode(data.queries.at(qi), manager, simulator, data.corpus, settings, 0.0, 0.0, rng);
    ev.mean_return += trace.manager_return;
    ev.mean_map += trace.turns.empty() ? trace.map_initial.value_or(0.0) : trace.turns.back().map_after.value_or(0.0);
    if (trace.outcome == Outcome::Success) ++successes;
    ev.traces.push_back(std::move(trace));
  }
  const double n = static_cast<double>(queries.size());
  ev.mean_return /= n;
  ev.mean_map /= n;
  ev.success_rate = static_cast<double>(successes) / n;
  return ev;
}

// ---------------------------------------------------------------------------
// Joint training

struct EpochLog {
  int epoch = 0;
  double train_return = 0.0;
  double valid_return = 0.0;
  double train_map = 0.0;
  double valid_map = 0.0;
};

inline std::string learning_curve_header() { return "epoch\ttrain_return\tvalid_return\ttrain_map\tvalid_map"; }

inline std::string format_epoch_row(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\t%.17g", e.epoch, e.train_return, e.valid_return,
                e.train_map, e.valid_map);
  return buf;
}

inline void write_learning_curve(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << learning_curve_header() << "\n";
  for (const auto& e : log) out << format_epoch_row(e) << "\n";
}

/// Receives every training and evaluation episode as it completes.
using TraceSink = std::function<void(const EpisodeTrace&, int epoch)>;

enum class Phase { Manager, Simulator };

struct PhaseStats {
  std::size_t updates = 0;
  std::size_t episodes = 0;
  double mean_loss = 0.0;
};

class JointTrainer {
 public:
  JointTrainer(const Dataset& data, RunConfig cfg, Split split)
      : data_(&data),
        cfg_(std::move(cfg)),
        split_(std::move(split)),
        manager_(manager_input_width(cfg_.episode.features), kSystemActionCount, cfg_.manager.dqn,
                 derive_seed(cfg_.training.seed, 1)),
        bank_(cfg_.episode.simulator_k, cfg_.simulator.dqn, derive_seed(cfg_.training.seed, 2)),
        manager_replay_(cfg_.manager.dqn.replay_capacity),
        rng_(derive_seed(cfg_.training.seed, 3)) {
    if (split_.train.empty()) throw ConfigError("training split is empty");
    for (std::size_t a = 0; a < kSystemActionCount; ++a) simulator_replay_.emplace_back(cfg_.simulator.dqn.replay_capacity);
    if (cfg_.simulator_kind == SimulatorKind::Rule)
      simulator_ = std::make_unique<RuleBasedSimulator>();
    else
      simulator_ = std::make_unique<DqnSimulator>(bank_);
  }

  JointTrainer(const JointTrainer&) = delete;
  JointTrainer& operator=(const JointTrainer&) = delete;

  const RunConfig& config() const { return cfg_; }
  QLearner& manager() { return manager_; }
  const QLearner& manager() const { return manager_; }
  DecisionMakerBank& bank() { return bank_; }
  const DecisionMakerBank& bank() const { return bank_; }
  const UserSimulator& simulator() const { return *simulator_; }
  bool trains_simulator() const { return cfg_.simulator_kind == SimulatorKind::Dqn; }
  const ReplayBuffer& manager_replay() const { return manager_replay_; }
  const ReplayBuffer& simulator_replay(SystemAction a) const {
    return simulator_replay_[static_cast<std::size_t>(action_index(a))];
  }

  void set_trace_sink(TraceSink sink) { sink_ = std::move(sink); }

  /// Linear decay from epsilon_start to epsilon_end over the first part of the run.
  double epsilon(double progress) const {
    const auto& t = cfg_.training;
    const double frac = std::clamp(progress / t.epsilon_decay_fraction, 0.0, 1.0);
    return t.epsilon_start + (t.epsilon_end - t.epsilon_start) * frac;
  }

  /// Collects episodes and applies exactly C updates to the manager. The
  /// simulator bank is only read.
  PhaseStats run_manager_phase(int epoch = 0) { return run_phase(Phase::Manager, epoch); }

  /// Collects episodes and applies exactly C updates spread over the decision
  /// makers whose action occurred in each episode. The manager is only read.
  PhaseStats run_simulator_phase(int epoch = 0) {
    if (!trains_simulator()) throw ConfigError("the rule-based simulator has nothing to train");
    return run_phase(Phase::Simulator, epoch);
  }

  EpochLog evaluate_epoch(int epoch) {
    const std::uint64_t seed = derive_seed(cfg_.training.seed, 0xE0A1 + static_cast<std::uint64_t>(epoch));
    EpochLog log;
    log.epoch = epoch;
    const Evaluation tr = evaluate(*data_, split_.train, manager_, *simulator_, cfg_.episode, seed);
    log.train_return = tr.mean_return;
    log.train_map = tr.mean_map;
    emit(tr.traces, epoch, "eval_train");
    if (!split_.valid.empty()) {
      const Evaluation va = evaluate(*data_, split_.valid, manager_, *simulator_, cfg_.episode, seed);
      log.valid_return = va.mean_return;
      log.valid_map = va.mean_map;
      emit(va.traces, epoch, "eval_valid");
    }
    return log;
  }

  /// One manager phase, one simulator phase (DQN user only), then greedy
  /// evaluation. Keeps copies of the models with the best validation return.
  EpochLog train_epoch(int epoch) {
    run_manager_phase(epoch);
    if (trains_simulator()) run_simulator_phase(epoch);
    EpochLog log = evaluate_epoch(epoch);
    const double key = split_.valid.empty() ? log.train_return : log.valid_return;
    if (!best_manager_ || key > best_key_) {
      best_key_ = key;
      best_epoch_ = epoch;
      best_manager_ = std::make_unique<QLearner>(manager_);
      best_bank_ = std::make_unique<DecisionMakerBank>(bank_);
    }
    return log;
  }

  std::vector<EpochLog> train() {
    std::vector<EpochLog> out;
    for (int epoch = 1; epoch <= cfg_.training.epochs; ++epoch) out.push_back(train_epoch(epoch));
    return out;
  }

  int best_epoch() const { return best_epoch_; }

  /// Writes the best-validation models (or the current ones before any epoch).
  void save_best(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    (best_manager_ ? *best_manager_ : manager_).save((dir / "manager.ckpt").string());
    if (trains_simulator()) (best_bank_ ? *best_bank_ : bank_).save(dir);
  }

  void save_current(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    manager_.save((dir / "manager.ckpt").string());
    if (trains_simulator()) bank_.save(dir);
  }

 private:
  double progress(int epoch, Phase phase, std::size_t updates) const {
    const double phases = trains_simulator() ? 2.0 : 1.0;
    const double within = (phase == Phase::Simulator ? 1.0 : 0.0) +
                          static_cast<double>(updates) / static_cast<double>(cfg_.training.updates_per_phase);
    return (static_cast<double>(std::max(epoch, 1) - 1) + within / phases) / static_cast<double>(cfg_.training.epochs);
  }

  void emit(const std::vector<EpisodeTrace>& traces, int epoch, const char* phase) {
    if (!sink_) return;
    for (auto t : traces) {
      t.phase = phase;
      sink_(t, epoch);
    }
  }

  void store(const EpisodeTrace& trace) {
    for (auto& e : manager_experiences(trace)) manager_replay_.push(std::move(e));
    if (!trains_simulator()) return;
    for (auto& [a, e] : simulator_experiences(trace))
      simulator_replay_[static_cast<std::size_t>(action_index(a))].push(std::move(e));
  }

  std::vector<Experience> draw(const ReplayBuffer& buf, std::size_t batch) {
    std::vector<Experience> out;
    for (auto i : buf.sample_indices(batch, rng_)) out.push_back(buf.at(i));
    return out;
  }

  PhaseStats run_phase(Phase phase, int epoch) {
    const std::size_t C = cfg_.training.updates_per_phase;
    const std::size_t cap = cfg_.training.max_episodes_factor * C;
    PhaseStats st;
    double loss_sum = 0.0;
    while (st.updates < C) {
      if (st.episodes >= cap)
        throw Error("training phase stalled: " + std::to_string(st.updates) + " of " + std::to_string(C) +
                    " updates after " + std::to_string(st.episodes) + " episodes");
      const double eps = epsilon(progress(epoch, phase, st.updates));
      std::vector<SystemAction> seen;
      for (std::size_t k = 0; k < cfg_.training.episodes_per_update; ++k) {
        const auto& q = data_->queries.at(split_.train[rng_.index(split_.train.size())]);
        EpisodeTrace trace = run_episode(q, manager_, *simulator_, data_->corpus, cfg_.episode, eps, eps, rng_);
        trace.phase = phase == Phase::Manager ? "train_manager" : "train_simulator";
        ++st.episodes;
        store(trace);
        for (const auto& t : trace.turns)
          if (t.simulator_choice >= 0 && std::find(seen.begin(), seen.end(), t.prompt.action) == seen.end())
            seen.push_back(t.prompt.action);
        if (sink_) sink_(trace, epoch);
      }
      if (phase == Phase::Manager) {
        if (!manager_replay_.ready(cfg_.manager.dqn.batch_size)) continue;
        loss_sum += manager_.train_step(draw(manager_replay_, cfg_.manager.dqn.batch_size));
        ++st.updates;
      } else {
        std::sort(seen.begin(), seen.end(), [](auto a, auto b) { return action_index(a) < action_index(b); });
        for (auto a : seen) {
          if (st.updates == C) break;
          auto& buf = simulator_replay_[static_cast<std::size_t>(action_index(a))];
          if (!buf.ready(cfg_.simulator.dqn.batch_size)) continue;
          loss_sum += bank_.at(a).train_step(draw(buf, cfg_.simulator.dqn.batch_size));
          ++st.updates;
        }
      }
    }
    st.mean_loss = C ? loss_sum / static_cast<double>(C) : 0.0;
    return st;
  }

  const Dataset* data_;
  RunConfig cfg_;
  Split split_;
  QLearner manager_;
  DecisionMakerBank bank_;
  std::unique_ptr<UserSimulator> simulator_;
  ReplayBuffer manager_replay_;
  std::vector<ReplayBuffer> simulator_replay_;
  Rng rng_;
  TraceSink sink_;
  std::unique_ptr<QLearner> best_manager_;
  std::unique_ptr<DecisionMakerBank> best_bank_;
  double best_key_ = 0.0;
  int best_epoch_ = 0;
};

/// JSONL trace writer; each record carries the epoch it belongs to.
class TraceLog {
 public:
  explicit TraceLog(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot write '" + path + "'");
  }
  void write(const EpisodeTrace& t, int epoch) {
    auto j = to_json(t);
    j["epoch"] = epoch;
    out_ << j.dump() << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace iscr
