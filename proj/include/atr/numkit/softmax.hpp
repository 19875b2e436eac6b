#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "atr/errors.hpp"

namespace atr::numkit {

// Masked, max-stabilized softmax. Masked positions come back as exactly zero.
template <typename T>
std::vector<T> softmax_row(std::span<const T> scores, const std::vector<bool>& visible) {
  if (visible.size() != scores.size()) throw ShapeError("softmax_row: mask length mismatch");
  T max_score = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!visible[i]) continue;
    if (!std::isfinite(scores[i])) throw NonFiniteError("softmax_row: non-finite visible score");
    max_score = any ? std::max(max_score, scores[i]) : scores[i];
    any = true;
  }
  if (!any) throw EmptyContextError("softmax_row: every position is masked");

  std::vector<T> out(scores.size(), T{0});
  T total{0};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!visible[i]) continue;
    out[i] = std::exp(scores[i] - max_score);
    total += out[i];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (visible[i]) out[i] /= total;
  }
  return out;
}

template <typename T>
std::vector<T> softmax_row(std::span<const T> scores) {
  return softmax_row(scores, std::vector<bool>(scores.size(), true));
}

template <typename T>
std::vector<T> softmax_row(const std::vector<T>& scores) {
  return softmax_row(std::span<const T>(scores));
}

// log(sum(exp(x))) with max subtraction.
template <typename T>
T log_sum_exp(std::span<const T> xs) {
  if (xs.empty()) throw EmptyContextError("log_sum_exp: empty input");
  T m = *std::max_element(xs.begin(), xs.end());
  T acc{0};
  for (T x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace atr::numkit
