#include "artn/policy_net.hpp"

#include <algorithm>
#include <cmath>

#include "artn/error.hpp"

namespace artn::nn {

void NetConfig::validate() const {
  const int dims[] = {in_channels,   in_height,    in_width,     conv1_filters, conv1_kernel,
                      conv1_stride,  conv2_filters, conv2_kernel, conv2_stride,  hidden};
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorCode::ShapeMismatch, "network dimensions must be positive");
  }
  if (conv1_kernel > in_height || conv1_kernel > in_width || conv2_kernel > conv1_height() ||
      conv2_kernel > conv1_width()) {
    throw Error(ErrorCode::ShapeMismatch, "kernel larger than its input");
  }
}

NetConfig tiny_net_config() {
  NetConfig c;
  c.in_channels = 3;
  c.in_height = 4;
  c.in_width = 4;
  c.conv1_filters = 2;
  c.conv1_kernel = 2;
  c.conv1_stride = 1;
  c.conv2_filters = 3;
  c.conv2_kernel = 2;
  c.conv2_stride = 1;
  c.hidden = 6;
  return c;
}

std::vector<TensorInfo> tensor_layout(const NetConfig& cfg) {
  cfg.validate();
  using Shape = std::vector<std::uint32_t>;
  auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  const std::vector<std::pair<std::string, Shape>> specs = {
      {"conv1.weight",
       {u(cfg.conv1_filters), u(cfg.in_channels), u(cfg.conv1_kernel), u(cfg.conv1_kernel)}},
      {"conv1.bias", {u(cfg.conv1_filters)}},
      {"conv2.weight",
       {u(cfg.conv2_filters), u(cfg.conv1_filters), u(cfg.conv2_kernel), u(cfg.conv2_kernel)}},
      {"conv2.bias", {u(cfg.conv2_filters)}},
      {"dense.weight", {u(cfg.hidden), u(cfg.flat_size())}},
      {"dense.bias", {u(cfg.hidden)}},
      {"policy.weight", {u(kNumActions), u(cfg.hidden)}},
      {"policy.bias", {u(kNumActions)}},
      {"value.weight", {1u, u(cfg.hidden)}},
      {"value.bias", {1u}},
  };
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  for (const auto& [name, shape] : specs) {
    std::size_t size = 1;
    for (auto d : shape) size *= d;
    out.push_back({name, shape, offset, size});
    offset += size;
  }
  return out;
}

template <typename T>
ActorCritic<T>::ActorCritic(NetConfig cfg) : cfg_(cfg), layout_(tensor_layout(cfg)) {
  params_.assign(layout_.back().offset + layout_.back().size, T(0));
  w1_ = tensor("conv1.weight").offset;
  b1_ = tensor("conv1.bias").offset;
  w2_ = tensor("conv2.weight").offset;
  b2_ = tensor("conv2.bias").offset;
  wd_ = tensor("dense.weight").offset;
  bd_ = tensor("dense.bias").offset;
  wp_ = tensor("policy.weight").offset;
  bp_ = tensor("policy.bias").offset;
  wv_ = tensor("value.weight").offset;
  bv_ = tensor("value.bias").offset;
}

template <typename T>
const TensorInfo& ActorCritic<T>::tensor(std::string_view name) const {
  for (const auto& t : layout_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::ShapeMismatch, "no tensor named '" + std::string(name) + "'");
}

namespace {

// Fills a rows x cols matrix with orthonormal rows (or columns, when there
// are more rows than columns) via modified Gram-Schmidt on Gaussian draws.
std::vector<double> orthogonal(int rows, int cols, Rng& rng) {
  const bool transpose = rows > cols;
  const int n = transpose ? cols : rows;  // vectors to orthonormalize
  const int len = transpose ? rows : cols;
  std::vector<double> v(static_cast<std::size_t>(n * len));
  for (auto& x : v) x = rng.normal();
  for (int i = 0; i < n; ++i) {
    double* vi = &v[static_cast<std::size_t>(i * len)];
    for (int j = 0; j < i; ++j) {
      const double* vj = &v[static_cast<std::size_t>(j * len)];
      double d = 0.0;
      for (int k = 0; k < len; ++k) d += vi[k] * vj[k];
      for (int k = 0; k < len; ++k) vi[k] -= d * vj[k];
    }
    double norm = 0.0;
    for (int k = 0; k < len; ++k) norm += vi[k] * vi[k];
    norm = std::sqrt(norm);
    for (int k = 0; k < len; ++k) vi[k] /= norm;
  }
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r * cols + c)] =
          transpose ? v[static_cast<std::size_t>(c * len + r)] : v[static_cast<std::size_t>(r * len + c)];
    }
  }
  return out;
}

// Gathers kernel-sized windows into a [c*k*k][oh*ow] matrix.
template <typename T>
void im2col(const T* in, int channels, int h, int w, int k, int stride, int oh, int ow, T* out) {
  const int npos = oh * ow;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = out + static_cast<std::ptrdiff_t>(((c * k + ky) * k + kx) * npos);
        for (int y = 0; y < oh; ++y) {
          const T* src = in + (c * h + y * stride + ky) * w + kx;
          for (int x = 0; x < ow; ++x) row[y * ow + x] = src[x * stride];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, int stride, int oh, int ow, T* out) {
  const int npos = oh * ow;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::ptrdiff_t>(((c * k + ky) * k + kx) * npos);
        for (int y = 0; y < oh; ++y) {
          T* dst = out + (c * h + y * stride + ky) * w + kx;
          for (int x = 0; x < ow; ++x) dst[x * stride] += row[y * ow + x];
        }
      }
    }
  }
}

// out[o][p] = relu(b[o] + sum_k W[o][k] * P[k][p])
template <typename T>
void conv_forward(const T* W, const T* b, const T* P, int filters, int fan_in, int npos, T* out) {
  for (int o = 0; o < filters; ++o) {
    T* dst = out + o * npos;
    std::fill(dst, dst + npos, b[o]);
    const T* wrow = W + o * fan_in;
    for (int k = 0; k < fan_in; ++k) {
      const T wk = wrow[k];
      const T* prow = P + k * npos;
      for (int p = 0; p < npos; ++p) dst[p] += wk * prow[p];
    }
    for (int p = 0; p < npos; ++p) dst[p] = std::max(dst[p], T(0));
  }
}

// Weight and bias gradients of a conv layer given dZ [filters][npos].
template <typename T>
void conv_weight_grad(const T* dz, const T* P, int filters, int fan_in, int npos, T* dW, T* db) {
  for (int o = 0; o < filters; ++o) {
    const T* dzo = dz + o * npos;
    T bsum = 0;
    for (int p = 0; p < npos; ++p) bsum += dzo[p];
    db[o] += bsum;
    T* dwrow = dW + o * fan_in;
    for (int k = 0; k < fan_in; ++k) {
      const T* prow = P + k * npos;
      T s = 0;
      for (int p = 0; p < npos; ++p) s += dzo[p] * prow[p];
      dwrow[k] += s;
    }
  }
}

}  // namespace

template <typename T>
void ActorCritic<T>::init(Rng& rng) {
  for (const auto& t : layout_) {
    T* dst = params_.data() + t.offset;
    if (t.shape.size() == 1) {
      std::fill(dst, dst + t.size, T(0));
      continue;
    }
    const int rows = static_cast<int>(t.shape[0]);
    const int cols = static_cast<int>(t.size) / rows;
    double gain = std::sqrt(2.0);
    if (t.name == "policy.weight") gain = 0.01;
    if (t.name == "value.weight") gain = 1.0;
    const auto m = orthogonal(rows, cols, rng);
    for (std::size_t i = 0; i < t.size; ++i) dst[i] = static_cast<T>(gain * m[i]);
  }
}

template <typename T>
NetOutput<T> ActorCritic<T>::forward(std::span<const T> input) const {
  Activations<T> act;
  forward(input, act);
  return act.out;
}

template <typename T>
void ActorCritic<T>::forward(std::span<const T> input, Activations<T>& act) const {
  if (static_cast<int>(input.size()) != cfg_.input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation has " + std::to_string(input.size()) +
                                              " values, network expects " +
                                              std::to_string(cfg_.input_size()));
  }
  const NetConfig& c = cfg_;
  const int h1 = c.conv1_height(), w1 = c.conv1_width(), n1 = h1 * w1;
  const int h2 = c.conv2_height(), w2 = c.conv2_width(), n2 = h2 * w2;
  const int fan1 = c.in_channels * c.conv1_kernel * c.conv1_kernel;
  const int fan2 = c.conv1_filters * c.conv2_kernel * c.conv2_kernel;
  const int flat = c.flat_size();
  const T* p = params_.data();

  act.patches1.resize(static_cast<std::size_t>(fan1 * n1));
  act.conv1.resize(static_cast<std::size_t>(c.conv1_filters * n1));
  act.patches2.resize(static_cast<std::size_t>(fan2 * n2));
  act.conv2.resize(static_cast<std::size_t>(flat));
  act.hidden.resize(static_cast<std::size_t>(c.hidden));

  im2col(input.data(), c.in_channels, c.in_height, c.in_width, c.conv1_kernel, c.conv1_stride, h1,
         w1, act.patches1.data());
  conv_forward(p + w1_, p + b1_, act.patches1.data(), c.conv1_filters, fan1, n1, act.conv1.data());
  im2col(act.conv1.data(), c.conv1_filters, h1, w1, c.conv2_kernel, c.conv2_stride, h2, w2,
         act.patches2.data());
  conv_forward(p + w2_, p + b2_, act.patches2.data(), c.conv2_filters, fan2, n2, act.conv2.data());

  for (int j = 0; j < c.hidden; ++j) {
    const T* wrow = p + wd_ + static_cast<std::size_t>(j) * flat;
    T s = p[bd_ + j];
    for (int i = 0; i < flat; ++i) s += wrow[i] * act.conv2[static_cast<std::size_t>(i)];
    act.hidden[static_cast<std::size_t>(j)] = std::max(s, T(0));
  }
  for (int a = 0; a < kNumActions; ++a) {
    const T* wrow = p + wp_ + static_cast<std::size_t>(a) * c.hidden;
    T s = p[bp_ + a];
    for (int j = 0; j < c.hidden; ++j) s += wrow[j] * act.hidden[static_cast<std::size_t>(j)];
    act.out.logits[static_cast<std::size_t>(a)] = s;
  }
  T v = p[bv_];
  for (int j = 0; j < c.hidden; ++j) v += p[wv_ + j] * act.hidden[static_cast<std::size_t>(j)];
  act.out.value = v;
}

template <typename T>
void ActorCritic<T>::backward(const Activations<T>& act, const std::array<T, kNumActions>& dlogits,
                              T dvalue, std::span<T> grad) const {
  if (grad.size() != params_.size()) throw Error(ErrorCode::ShapeMismatch, "gradient size mismatch");
  const NetConfig& c = cfg_;
  const int h1 = c.conv1_height(), w1 = c.conv1_width(), n1 = h1 * w1;
  const int h2 = c.conv2_height(), w2 = c.conv2_width(), n2 = h2 * w2;
  const int fan1 = c.in_channels * c.conv1_kernel * c.conv1_kernel;
  const int fan2 = c.conv1_filters * c.conv2_kernel * c.conv2_kernel;
  const int flat = c.flat_size();
  const T* p = params_.data();
  T* g = grad.data();

  // Heads.
  std::vector<T> dh(static_cast<std::size_t>(c.hidden), T(0));
  for (int a = 0; a < kNumActions; ++a) {
    const T da = dlogits[static_cast<std::size_t>(a)];
    g[bp_ + a] += da;
    T* gw = g + wp_ + static_cast<std::size_t>(a) * c.hidden;
    const T* w = p + wp_ + static_cast<std::size_t>(a) * c.hidden;
    for (int j = 0; j < c.hidden; ++j) {
      gw[j] += da * act.hidden[static_cast<std::size_t>(j)];
      dh[static_cast<std::size_t>(j)] += da * w[j];
    }
  }
  g[bv_] += dvalue;
  for (int j = 0; j < c.hidden; ++j) {
    g[wv_ + j] += dvalue * act.hidden[static_cast<std::size_t>(j)];
    dh[static_cast<std::size_t>(j)] += dvalue * p[wv_ + j];
  }

  // Dense.
  std::vector<T> dflat(static_cast<std::size_t>(flat), T(0));
  for (int j = 0; j < c.hidden; ++j) {
    if (act.hidden[static_cast<std::size_t>(j)] <= T(0)) continue;
    const T dz = dh[static_cast<std::size_t>(j)];
    g[bd_ + j] += dz;
    T* gw = g + wd_ + static_cast<std::size_t>(j) * flat;
    const T* w = p + wd_ + static_cast<std::size_t>(j) * flat;
    for (int i = 0; i < flat; ++i) {
      gw[i] += dz * act.conv2[static_cast<std::size_t>(i)];
      dflat[static_cast<std::size_t>(i)] += dz * w[i];
    }
  }

  // conv2.
  for (int i = 0; i < flat; ++i) {
    if (act.conv2[static_cast<std::size_t>(i)] <= T(0)) dflat[static_cast<std::size_t>(i)] = T(0);
  }
  conv_weight_grad(dflat.data(), act.patches2.data(), c.conv2_filters, fan2, n2, g + w2_, g + b2_);
  std::vector<T> dpatch(static_cast<std::size_t>(fan2 * n2), T(0));
  for (int o = 0; o < c.conv2_filters; ++o) {
    const T* dzo = dflat.data() + o * n2;
    const T* w = p + w2_ + static_cast<std::size_t>(o) * fan2;
    for (int k = 0; k < fan2; ++k) {
      T* row = dpatch.data() + static_cast<std::size_t>(k) * n2;
      const T wk = w[k];
      for (int q = 0; q < n2; ++q) row[q] += wk * dzo[q];
    }
  }
  std::vector<T> dconv1(static_cast<std::size_t>(c.conv1_filters * n1), T(0));
  col2im_add(dpatch.data(), c.conv1_filters, h1, w1, c.conv2_kernel, c.conv2_stride, h2, w2,
             dconv1.data());

  // conv1.
  for (std::size_t i = 0; i < dconv1.size(); ++i) {
    if (act.conv1[i] <= T(0)) dconv1[i] = T(0);
  }
  conv_weight_grad(dconv1.data(), act.patches1.data(), c.conv1_filters, fan1, n1, g + w1_, g + b1_);
}

template class ActorCritic<float>;
template class ActorCritic<double>;

template <typename T>
LossStats ppo_loss(const ActorCritic<T>& net, const Minibatch<T>& batch, const PpoLossConfig& cfg,
                   std::span<T> grad) {
  const std::size_t n = batch.size();
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty minibatch");
  const auto in = static_cast<std::size_t>(net.config().input_size());
  if (batch.obs.size() != n * in || batch.old_log_probs.size() != n ||
      batch.advantages.size() != n || batch.returns.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "minibatch arrays disagree in length");
  }
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), T(0));

  const double inv_n = 1.0 / static_cast<double>(n);
  LossStats st;
  Activations<T> act;
  for (std::size_t i = 0; i < n; ++i) {
    net.forward(std::span<const T>(batch.obs.data() + i * in, in), act);
    const auto& z = act.out.logits;
    double m = static_cast<double>(z[0]);
    for (T l : z) m = std::max(m, static_cast<double>(l));
    double sum = 0.0;
    for (T l : z) sum += std::exp(static_cast<double>(l) - m);
    const double lse = m + std::log(sum);
    std::array<double, kNumActions> logp{}, prob{};
    double entropy = 0.0;
    for (int j = 0; j < kNumActions; ++j) {
      logp[j] = static_cast<double>(z[static_cast<std::size_t>(j)]) - lse;
      prob[j] = std::exp(logp[j]);
      entropy -= prob[j] * logp[j];
    }
    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double ratio = std::exp(logp[static_cast<std::size_t>(a)] - batch.old_log_probs[i]);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double s1 = ratio * adv;
    const double s2 = clipped * adv;
    const bool outside = std::abs(ratio - 1.0) > cfg.clip;
    const double v = static_cast<double>(act.out.value);
    const double verr = v - batch.returns[i];

    st.policy_loss -= std::min(s1, s2) * inv_n;
    st.value_loss += verr * verr * inv_n;
    st.entropy += entropy * inv_n;
    st.clip_fraction += (outside ? 1.0 : 0.0) * inv_n;
    st.approx_kl += (batch.old_log_probs[i] - logp[static_cast<std::size_t>(a)]) * inv_n;

    if (want_grad) {
      // d(-min(s1, s2))/d(log p_a): the clipped branch has no gradient.
      const double dlogp = (s1 <= s2 || !outside) ? -ratio * adv : 0.0;
      std::array<T, kNumActions> dz{};
      for (int j = 0; j < kNumActions; ++j) {
        const double onehot = j == a ? 1.0 : 0.0;
        const double d = dlogp * (onehot - prob[j]) +
                         cfg.entropy_coef * prob[j] * (logp[j] + entropy);
        dz[static_cast<std::size_t>(j)] = static_cast<T>(d * inv_n);
      }
      const T dv = static_cast<T>(cfg.value_coef * 2.0 * verr * inv_n);
      net.backward(act, dz, dv, grad);
    }
  }
  st.total = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
  if (!std::isfinite(st.total)) throw Error(ErrorCode::NonFiniteLoss, "PPO loss is not finite");
  return st;
}

template LossStats ppo_loss(const ActorCritic<float>&, const Minibatch<float>&,
                            const PpoLossConfig&, std::span<float>);
template LossStats ppo_loss(const ActorCritic<double>&, const Minibatch<double>&,
                            const PpoLossConfig&, std::span<double>);

template <typename T>
double clip_grad_norm(std::span<T> grad, double max_norm) {
  double sq = 0.0;
  for (T g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteLoss, "gradient is not finite");
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (T& g : grad) g = static_cast<T>(static_cast<double>(g) * scale);
  }
  return norm;
}

template double clip_grad_norm(std::span<float>, double);
template double clip_grad_norm(std::span<double>, double);

Adam::Adam(std::size_t n_params, Config cfg) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

double Adam::step(std::span<float> params, std::span<float> grad) { return step_impl(params, grad); }
double Adam::step(std::span<double> params, std::span<double> grad) {
  return step_impl(params, grad);
}

template <typename T>
double Adam::step_impl(std::span<T> params, std::span<T> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  const double norm = clip_grad_norm(grad, cfg_.max_grad_norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
  }
  return norm;
}

}  // namespace artn::nn
