#pragma once

// Q-learning on top of Mlp: experience replay, target network, and the
// vanilla / double / dueling variants.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "iscr/nn.hpp"
#include "json.hpp"

namespace iscr {

enum class DqnVariant { Vanilla, Double, Dueling };

inline std::string to_string(DqnVariant v) {
  switch (v) {
    case DqnVariant::Vanilla: return "dqn";
    case DqnVariant::Double: return "double";
    case DqnVariant::Dueling: return "dueling";
  }
  return "?";
}

inline DqnVariant dqn_variant_from_string(const std::string& s) {
  if (s == "dqn" || s == "vanilla") return DqnVariant::Vanilla;
  if (s == "double") return DqnVariant::Double;
  if (s == "dueling") return DqnVariant::Dueling;
  throw ConfigError("unknown DQN variant '" + s + "' (expected dqn | double | dueling)");
}

struct Experience {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

/// Fixed-capacity ring with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
    ISCR_EXPECT(capacity > 0, "replay capacity must be positive");
  }

  void push(Experience e) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(e));
    } else {
      items_[next_] = std::move(e);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool ready(std::size_t batch) const { return items_.size() >= batch; }
  const Experience& at(std::size_t i) const { return items_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    ISCR_EXPECT(ready(batch), "replay buffer holds fewer experiences than the batch size");
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.index(items_.size());
    return idx;
  }

  std::vector<Experience> sample(std::size_t batch, Rng& rng) const {
    std::vector<Experience> out;
    for (auto i : sample_indices(batch, rng)) out.push_back(items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> items_;
};

/// argmax with ties resolved toward the lowest index.
inline int argmax(std::span<const double> q) {
  ISCR_EXPECT(!q.empty(), "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return static_cast<int>(best);
}

/// Epsilon-greedy choice over the network's outputs.
inline int act(const Mlp& net, std::span<const double> state, double epsilon, Rng& rng) {
  ISCR_EXPECT(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon)
    return static_cast<int>(rng.index(net.architecture().actions));
  auto q = net.forward(state);
  return argmax(q);
}

struct QLearnerConfig {
  DqnVariant variant = DqnVariant::Vanilla;
  std::vector<std::size_t> hidden{1024, 1024};
  double gamma = 0.99;
  double learning_rate = 8e-4;
  std::size_t batch_size = 256;
  std::size_t replay_capacity = 10000;
  std::size_t sync_period = 100;
};

inline constexpr char kCheckpointMagic[8] = {'I', 'S', 'C', 'R', 'Q', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Online network, target network and optimizer. Single writer.
class QLearner {
 public:
  QLearner(std::size_t input, std::size_t actions, QLearnerConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        online_(MlpArchitecture{input, cfg_.hidden, actions, cfg_.variant == DqnVariant::Dueling}),
        optimizer_(online_.parameter_count(), Adam::Options{cfg_.learning_rate}) {
    ISCR_EXPECT(cfg_.gamma >= 0.0 && cfg_.gamma <= 1.0, "discount must lie in [0,1]");
    ISCR_EXPECT(cfg_.sync_period >= 1, "sync period must be >= 1");
    Rng rng(seed);
    online_.initialize(rng);
    target_ = online_;
  }

  const QLearnerConfig& config() const { return cfg_; }
  DqnVariant variant() const { return cfg_.variant; }
  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  Mlp& mutable_online() { return online_; }
  Mlp& mutable_target() { return target_; }
  std::uint64_t train_steps() const { return steps_; }
  std::size_t input_width() const { return online_.architecture().input; }
  std::size_t action_count() const { return online_.architecture().actions; }

  std::vector<double> q_values(std::span<const double> s) const { return online_.forward(s); }

  int act(std::span<const double> s, double epsilon, Rng& rng) const { return iscr::act(online_, s, epsilon, rng); }

  double td_target(const Experience& e) const {
    if (e.done) return e.reward;
    const auto qt = target_.forward(e.next_state);
    if (cfg_.variant == DqnVariant::Double) {
      const auto qo = online_.forward(e.next_state);
      return e.reward + cfg_.gamma * qt[static_cast<std::size_t>(argmax(qo))];
    }
    return e.reward + cfg_.gamma * qt[static_cast<std::size_t>(argmax(qt))];
  }

  /// One gradient step on the mean squared TD error. Target parameters are not touched.
  double train_step(std::span<const Experience> batch) {
    ISCR_EXPECT(!batch.empty(), "train_step needs a non-empty batch");
    const std::size_t in = input_width();
    std::vector<double> states;
    states.reserve(batch.size() * in);
    std::vector<int> actions;
    std::vector<double> targets;
    for (const auto& e : batch) {
      ISCR_EXPECT(e.state.size() == in, "experience state width mismatch");
      states.insert(states.end(), e.state.begin(), e.state.end());
      actions.push_back(e.action);
      targets.push_back(td_target(e));
    }
    const double loss = online_.loss_and_gradient(states, actions, targets, grad_);
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss in train_step\n" + dump(batch, targets));
    optimizer_.step(online_.parameters(), grad_);
    for (double p : online_.parameters())
      if (!std::isfinite(p)) throw NumericalError("non-finite parameter after train_step\n" + dump(batch, targets));
    ++steps_;
    if (steps_ % cfg_.sync_period == 0) sync_target();
    return loss;
  }

  void sync_target() { target_ = online_; }

  nlohmann::json descriptor() const {
    const auto& a = online_.architecture();
    return {{"input", a.input},       {"hidden", a.hidden},         {"actions", a.actions},
            {"dueling", a.dueling},   {"variant", to_string(cfg_.variant)},
            {"gamma", cfg_.gamma},    {"learning_rate", cfg_.learning_rate},
            {"train_steps", steps_}};
  }

  /// Binary checkpoint: magic, version, JSON descriptor, online and target parameters.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    const std::string desc = descriptor().dump();
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(desc.size()));
    out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    write_pod(out, static_cast<std::uint64_t>(online_.parameter_count()));
    write_params(out, online_.parameters());
    write_params(out, target_.parameters());
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
  }

  /// Restores parameters into this learner; the stored architecture must match exactly.
  void load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
      throw ValidationError("'" + path + "' is not a Q-network checkpoint");
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
      throw ValidationError("checkpoint '" + path + "' has unsupported version " + std::to_string(version));
    const auto len = read_pod<std::uint64_t>(in, path);
    std::string desc(len, '\0');
    in.read(desc.data(), static_cast<std::streamsize>(len));
    nlohmann::json d = nlohmann::json::parse(desc, nullptr, false);
    if (d.is_discarded()) throw ValidationError("checkpoint '" + path + "' has a corrupt descriptor");
    MlpArchitecture stored{d.value("input", std::size_t{0}), d.value("hidden", std::vector<std::size_t>{}),
                           d.value("actions", std::size_t{0}), d.value("dueling", false)};
    if (!(stored == online_.architecture()) || d.value("variant", std::string{}) != to_string(cfg_.variant))
      throw ValidationError("checkpoint architecture mismatch in '" + path + "': expected " +
                            online_.architecture().describe() + " [" + to_string(cfg_.variant) + "], found " +
                            stored.describe() + " [" + d.value("variant", std::string{"?"}) + "]");
    const auto n = read_pod<std::uint64_t>(in, path);
    if (n != online_.parameter_count()) throw ValidationError("checkpoint '" + path + "' parameter count mismatch");
    read_params(in, online_.parameters(), path);
    read_params(in, target_.parameters(), path);
    steps_ = d.value("train_steps", std::uint64_t{0});
  }

 private:
  template <typename T>
  static void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <typename T>
  static T read_pod(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ValidationError("checkpoint '" + path + "' is truncated");
    return v;
  }
  static void write_params(std::ostream& out, std::span<const double> p) {
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
  }
  static void read_params(std::istream& in, std::span<double> p, const std::string& path) {
    in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
    if (!in) throw ValidationError("checkpoint '" + path + "' is truncated");
  }

  static std::string dump(std::span<const Experience> batch, const std::vector<double>& targets) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      os << "  [" << i << "] a=" << batch[i].action << " r=" << batch[i].reward << " done=" << batch[i].done
         << " target=" << targets[i] << " s=(";
      for (std::size_t j = 0; j < batch[i].state.size(); ++j) os << (j ? "," : "") << batch[i].state[j];
      os << ")\n";
    }
    return os.str();
  }

  QLearnerConfig cfg_;
  Mlp online_;
  Mlp target_;
  Adam optimizer_;
  std::vector<double> grad_;
  std::uint64_t steps_ = 0;
};

}  // namespace iscr
