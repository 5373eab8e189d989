#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marl/errors.hpp"

namespace marl::tensor {

/// Numerically stable softmax. Throws NumericError on non-finite logits.
template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax(): empty logits");
  for (T z : logits) {
    if (!std::isfinite(z)) throw NumericError("softmax(): non-finite logit");
  }
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T s = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  return softmax(std::span<const T>(logits));
}

/// Draws an index with the given probabilities.
template <class T, class Rng>
int categorical_sample(std::span<const T> probs, Rng& rng) {
  if (probs.empty()) throw ShapeError("categorical_sample(): empty probability vector");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += static_cast<double>(probs[i]);
    if (probs[i] > T(0)) last_positive = static_cast<int>(i);
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left the cumulative sum just below u.
  return last_positive;
}

/// argmax with lowest-index tie-break.
template <class T>
int categorical_greedy(std::span<const T> probs) {
  if (probs.empty()) throw ShapeError("categorical_greedy(): empty probability vector");
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  }
  return best;
}

template <class T>
T entropy(std::span<const T> probs) {
  T h = 0;
  for (T p : probs) {
    if (p > T(0)) h -= p * std::log(p);
  }
  return h;
}

}  // namespace marl::tensor
