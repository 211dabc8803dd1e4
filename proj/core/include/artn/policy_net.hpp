#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "artn/categorical.hpp"
#include "artn/rng.hpp"

namespace artn::nn {

/// Layer sizes of the actor-critic CNN. The default is the production
/// network over a 3x24x24 observation stack.
struct NetConfig {
  int in_channels = 3;
  int in_height = 24;
  int in_width = 24;
  int conv1_filters = 8;
  int conv1_kernel = 5;
  int conv1_stride = 2;
  int conv2_filters = 16;
  int conv2_kernel = 3;
  int conv2_stride = 2;
  int hidden = 128;

  int conv1_height() const { return (in_height - conv1_kernel) / conv1_stride + 1; }
  int conv1_width() const { return (in_width - conv1_kernel) / conv1_stride + 1; }
  int conv2_height() const { return (conv1_height() - conv2_kernel) / conv2_stride + 1; }
  int conv2_width() const { return (conv1_width() - conv2_kernel) / conv2_stride + 1; }
  int input_size() const { return in_channels * in_height * in_width; }
  int flat_size() const { return conv2_filters * conv2_height() * conv2_width(); }

  // Throws ShapeMismatch when a layer has no output.
  void validate() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// A 4x4-input network small enough for finite-difference checks.
NetConfig tiny_net_config();

struct TensorInfo {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// conv1.weight [f1, c, k1, k1], conv1.bias [f1], conv2.*, dense.weight
// [hidden, flat], dense.bias, policy.weight [5, hidden], policy.bias,
// value.weight [1, hidden], value.bias.
std::vector<TensorInfo> tensor_layout(const NetConfig& cfg);

template <typename T>
struct NetOutput {
  std::array<T, kNumActions> logits{};
  T value = 0;
};

/// Intermediate values kept by forward() for backward().
template <typename T>
struct Activations {
  std::vector<T> patches1;  // [c*k1*k1][h1*w1]
  std::vector<T> conv1;     // post-ReLU [f1][h1*w1]
  std::vector<T> patches2;  // [f1*k2*k2][h2*w2]
  std::vector<T> conv2;     // post-ReLU, flattened [f2*h2*w2]
  std::vector<T> hidden;    // post-ReLU [hidden]
  NetOutput<T> out;
};

/// Convolutional actor-critic with ReLU after conv1, conv2 and the dense
/// layer, a 5-way policy head and a scalar value head. Parameters live in one
/// flat buffer laid out by tensor_layout().
template <typename T>
class ActorCritic {
 public:
  explicit ActorCritic(NetConfig cfg = {});

  const NetConfig& config() const { return cfg_; }
  const std::vector<TensorInfo>& tensors() const { return layout_; }
  const TensorInfo& tensor(std::string_view name) const;
  std::size_t param_count() const { return params_.size(); }
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }

  /// Orthogonal rows scaled by a per-layer gain (sqrt 2 for hidden layers,
  /// 0.01 for the policy head, 1 for the value head); zero biases.
  void init(Rng& rng);

  // Throws ShapeMismatch unless input.size() == config().input_size().
  NetOutput<T> forward(std::span<const T> input) const;
  void forward(std::span<const T> input, Activations<T>& act) const;

  /// Accumulates d(loss)/d(params) into `grad` given the loss gradient with
  /// respect to the outputs of the forward pass recorded in `act`.
  void backward(const Activations<T>& act, const std::array<T, kNumActions>& dlogits, T dvalue,
                std::span<T> grad) const;

  template <typename U>
  ActorCritic<U> cast() const {
    ActorCritic<U> out(cfg_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  NetConfig cfg_;
  std::vector<TensorInfo> layout_;
  std::vector<T> params_;
  // Offsets of each tensor in params_, cached from layout_.
  std::size_t w1_, b1_, w2_, b2_, wd_, bd_, wp_, bp_, wv_, bv_;
};

extern template class ActorCritic<float>;
extern template class ActorCritic<double>;

using PolicyNet = ActorCritic<float>;

struct PpoLossConfig {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

template <typename T>
struct Minibatch {
  std::vector<T> obs;  // size() * input_size, row-major
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

struct LossStats {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Clipped-surrogate PPO loss over a minibatch:
///   policy_loss + value_coef * mean((V - R)^2) - entropy_coef * mean(H).
/// When `grad` is non-empty it is overwritten with the analytic gradient.
/// Throws NonFiniteLoss if the loss is NaN or infinite.
template <typename T>
LossStats ppo_loss(const ActorCritic<T>& net, const Minibatch<T>& batch, const PpoLossConfig& cfg,
                   std::span<T> grad = {});

extern template LossStats ppo_loss(const ActorCritic<float>&, const Minibatch<float>&,
                                   const PpoLossConfig&, std::span<float>);
extern template LossStats ppo_loss(const ActorCritic<double>&, const Minibatch<double>&,
                                   const PpoLossConfig&, std::span<double>);

struct AdamConfig {
  double lr = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
};

/// Adam with bias correction, preceded by global gradient-norm clipping.
class Adam {
 public:
  using Config = AdamConfig;

  explicit Adam(std::size_t n_params, Config cfg = {});

  /// Clips `grad` in place and applies one update. Returns the gradient norm
  /// before clipping.
  double step(std::span<float> params, std::span<float> grad);
  double step(std::span<double> params, std::span<double> grad);

  std::int64_t step_count() const { return t_; }
  Config& config() { return cfg_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  template <typename T>
  double step_impl(std::span<T> params, std::span<T> grad);

  Config cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

// Global L2 norm; scales `grad` so its norm is at most max_norm.
template <typename T>
double clip_grad_norm(std::span<T> grad, double max_norm);

}  // namespace artn::nn
