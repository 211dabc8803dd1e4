#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "artn/rng.hpp"

namespace artn::nn {

inline constexpr int kNumActions = 5;
using Logits = std::array<float, kNumActions>;

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};

inline double log_sum_exp(std::span<const float> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float l : logits) sum += std::exp(static_cast<double>(l) - m);
  return m + std::log(sum);
}

inline std::array<double, kNumActions> softmax(const Logits& logits) {
  const double lse = log_sum_exp(logits);
  std::array<double, kNumActions> p{};
  for (int i = 0; i < kNumActions; ++i) p[i] = std::exp(static_cast<double>(logits[i]) - lse);
  return p;
}

inline double log_prob(const Logits& logits, int action) {
  return static_cast<double>(logits[static_cast<std::size_t>(action)]) - log_sum_exp(logits);
}

inline double entropy(const Logits& logits) {
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (float l : logits) {
    const double lp = static_cast<double>(l) - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

/// Inverse-CDF draw from softmax(logits) using one uniform variate.
inline SampledAction sample_action(const Logits& logits, Rng& rng) {
  const auto p = softmax(logits);
  const double u = rng.uniform();
  double cum = 0.0;
  int chosen = kNumActions - 1;
  for (int i = 0; i < kNumActions; ++i) {
    cum += p[static_cast<std::size_t>(i)];
    if (u < cum) {
      chosen = i;
      break;
    }
  }
  return {chosen, log_prob(logits, chosen)};
}

// Ties go to the lowest index.
inline int greedy_action(const Logits& logits) {
  int best = 0;
  for (int i = 1; i < kNumActions; ++i) {
    if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace artn::nn
