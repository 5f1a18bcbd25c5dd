#pragma once

// Feed-forward Q-network with ReLU hidden layers and either a linear head or a
// dueling (value + centered advantage) head, with hand-written backprop and
// an Adam optimizer. Parameters live in one flat buffer so that optimizers,
// checkpoints and gradient checks all see the same layout.
//
// Every output element is computed as a dot product in a fixed order that does
// not depend on the batch size, so single-state and batched evaluation agree
// bit for bit.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "iscr/error.hpp"
#include "iscr/rng.hpp"

namespace iscr {

struct MlpArchitecture {
  std::size_t input = 0;
  std::vector<std::size_t> hidden;
  std::size_t actions = 0;
  bool dueling = false;

  bool operator==(const MlpArchitecture&) const = default;

  std::string describe() const {
    std::ostringstream os;
    os << input;
    for (auto h : hidden) os << "-" << h;
    os << "-" << actions << (dueling ? " (dueling)" : " (linear head)");
    return os.str();
  }
};

class Mlp {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weights = 0;  // offset of the out x in row-major weight block
    std::size_t bias = 0;     // offset of the bias vector
  };

  Mlp() = default;

  /// All parameters zero.
  explicit Mlp(MlpArchitecture arch) : arch_(std::move(arch)) {
    ISCR_EXPECT(arch_.input > 0 && arch_.actions > 0, "network needs positive input and action widths");
    std::size_t width = arch_.input, offset = 0;
    auto add = [&](std::size_t in, std::size_t out) {
      Layer l{in, out, offset, offset + in * out};
      offset += in * out + out;
      layers_.push_back(l);
    };
    for (auto h : arch_.hidden) {
      ISCR_EXPECT(h > 0, "hidden layer width must be positive");
      add(width, h);
      width = h;
    }
    if (arch_.dueling) {
      add(width, 1);  // value stream
      add(width, arch_.actions);
    } else {
      add(width, arch_.actions);
    }
    params_.assign(offset, 0.0);
  }

  /// He-style uniform weights, zero biases.
  void initialize(Rng& rng) {
    for (const auto& l : layers_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.in));
      for (std::size_t i = 0; i < l.in * l.out; ++i) params_[l.weights + i] = rng.uniform(-bound, bound);
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(l.bias), l.out, 0.0);
    }
  }

  const MlpArchitecture& architecture() const { return arch_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t hidden_layer_count() const { return arch_.hidden.size(); }
  const Layer& value_layer() const { return layers_.at(arch_.hidden.size()); }
  const Layer& advantage_layer() const { return layers_.back(); }

  std::vector<double> forward(std::span<const double> state) const {
    Activations a = run(state, 1);
    return std::move(a.q);
  }

  /// Q-values for `batch` states stored row-major.
  std::vector<double> forward_batch(std::span<const double> states, std::size_t batch) const {
    return run(states, batch).q;
  }

  struct Streams {
    double value = 0.0;
    std::vector<double> advantages;
  };

  /// Raw value and advantage outputs of a dueling head, before centering.
  Streams streams(std::span<const double> state) const {
    ISCR_EXPECT(arch_.dueling, "streams() requires a dueling head");
    Activations a = run(state, 1);
    return {a.value[0], a.advantage};
  }

  /// Mean over the batch of (Q(s_b, a_b) - y_b)^2; writes d loss / d params into `grad`.
  double loss_and_gradient(std::span<const double> states, std::span<const int> actions,
                           std::span<const double> targets, std::vector<double>& grad) const {
    const std::size_t B = actions.size();
    ISCR_EXPECT(B > 0 && targets.size() == B, "loss needs a non-empty batch with one target per sample");
    Activations a = run(states, B);
    const std::size_t A = arch_.actions;

    std::vector<double> gq(B * A, 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      ISCR_EXPECT(actions[b] >= 0 && static_cast<std::size_t>(actions[b]) < A, "action index out of range");
      const double diff = a.q[b * A + static_cast<std::size_t>(actions[b])] - targets[b];
      loss += diff * diff;
      gq[b * A + static_cast<std::size_t>(actions[b])] = 2.0 * diff / static_cast<double>(B);
    }
    loss /= static_cast<double>(B);

    grad.assign(params_.size(), 0.0);
    const std::size_t H = arch_.hidden.size();
    const std::vector<double>& top = a.hidden.empty() ? a.input : a.hidden.back();
    std::vector<double> dtop;
    if (arch_.dueling) {
      const Layer& vl = layers_[H];
      const Layer& al = layers_[H + 1];
      std::vector<double> dv(B, 0.0), da(B * A, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < A; ++j) s += gq[b * A + j];
        dv[b] = s;
        for (std::size_t j = 0; j < A; ++j) da[b * A + j] = gq[b * A + j] - s / static_cast<double>(A);
      }
      std::vector<double> d1, d2;
      backward_linear(vl, top, dv, B, grad, d1);
      backward_linear(al, top, da, B, grad, d2);
      dtop.resize(d1.size());
      for (std::size_t i = 0; i < d1.size(); ++i) dtop[i] = d1[i] + d2[i];
    } else {
      backward_linear(layers_[H], top, gq, B, grad, dtop);
    }
    for (std::size_t l = H; l-- > 0;) {
      // through the ReLU of hidden layer l
      const auto& pre = a.pre[l];
      for (std::size_t i = 0; i < dtop.size(); ++i)
        if (!(pre[i] > 0.0)) dtop[i] = 0.0;
      const std::vector<double>& below = l == 0 ? a.input : a.hidden[l - 1];
      std::vector<double> dbelow;
      backward_linear(layers_[l], below, dtop, B, grad, dbelow);
      dtop = std::move(dbelow);
    }
    return loss;
  }

 private:
  struct Activations {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;     // per hidden layer, pre-ReLU
    std::vector<std::vector<double>> hidden;  // per hidden layer, post-ReLU
    std::vector<double> value;                // dueling only
    std::vector<double> advantage;            // dueling only
    std::vector<double> q;
  };

  void linear(const Layer& l, const std::vector<double>& x, std::size_t B, std::vector<double>& y) const {
    y.resize(B * l.out);
    const double* W = params_.data() + l.weights;
    const double* bias = params_.data() + l.bias;
    for (std::size_t b = 0; b < B; ++b) {
      const double* xb = x.data() + b * l.in;
      for (std::size_t o = 0; o < l.out; ++o) {
        const double* w = W + o * l.in;
        double s = 0.0;
        for (std::size_t i = 0; i < l.in; ++i) s += w[i] * xb[i];
        y[b * l.out + o] = s + bias[o];
      }
    }
  }

  // Accumulates weight/bias gradients for `l` and returns d loss / d input.
  void backward_linear(const Layer& l, const std::vector<double>& x, const std::vector<double>& dy,
                       std::size_t B, std::vector<double>& grad, std::vector<double>& dx) const {
    double* gW = grad.data() + l.weights;
    double* gb = grad.data() + l.bias;
    const double* W = params_.data() + l.weights;
    dx.assign(B * l.in, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const double* xb = x.data() + b * l.in;
      double* dxb = dx.data() + b * l.in;
      for (std::size_t o = 0; o < l.out; ++o) {
        const double g = dy[b * l.out + o];
        if (g == 0.0) continue;
        gb[o] += g;
        double* gw = gW + o * l.in;
        const double* w = W + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) {
          gw[i] += g * xb[i];
          dxb[i] += g * w[i];
        }
      }
    }
  }

  Activations run(std::span<const double> states, std::size_t B) const {
    ISCR_EXPECT(states.size() == B * arch_.input,
                "state width " + std::to_string(B ? states.size() / B : 0) + " does not match network input " +
                    std::to_string(arch_.input));
    Activations a;
    a.input.assign(states.begin(), states.end());
    const std::vector<double>* x = &a.input;
    const std::size_t H = arch_.hidden.size();
    a.pre.resize(H);
    a.hidden.resize(H);
    for (std::size_t l = 0; l < H; ++l) {
      linear(layers_[l], *x, B, a.pre[l]);
      a.hidden[l] = a.pre[l];
      for (double& v : a.hidden[l]) v = v > 0.0 ? v : 0.0;
      x = &a.hidden[l];
    }
    const std::size_t A = arch_.actions;
    if (arch_.dueling) {
      linear(layers_[H], *x, B, a.value);
      linear(layers_[H + 1], *x, B, a.advantage);
      a.q.resize(B * A);
      for (std::size_t b = 0; b < B; ++b) {
        double mean = 0.0;
        for (std::size_t j = 0; j < A; ++j) mean += a.advantage[b * A + j];
        mean /= static_cast<double>(A);
        for (std::size_t j = 0; j < A; ++j) a.q[b * A + j] = a.value[b] + (a.advantage[b * A + j] - mean);
      }
    } else {
      linear(layers_[H], *x, B, a.q);
    }
    return a;
  }

  MlpArchitecture arch_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

/// Adaptive-moment gradient descent over a flat parameter buffer.
class Adam {
 public:
  struct Options {
    double learning_rate = 8e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  Adam(std::size_t n, Options opt) : opt_(opt), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ISCR_EXPECT(params.size() == m_.size() && grad.size() == m_.size(), "optimizer size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * grad[i];
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
      params[i] -= opt_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opt_.epsilon);
    }
  }

  const Options& options() const { return opt_; }
  std::uint64_t steps() const { return t_; }

 private:
  Options opt_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace iscr
