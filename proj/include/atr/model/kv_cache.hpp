#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "atr/model/config.hpp"
#include "atr/numkit/matrix.hpp"

namespace atr::model {

// Per-layer key and value rows, one full d_model row per processed token.
// Head h reads the column slice [h*d_head, (h+1)*d_head).
class KVCache {
 public:
  explicit KVCache(const ModelConfig& config);

  std::size_t length() const { return length_; }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return length_ >= capacity_; }

  std::span<const double> key(std::size_t layer, std::size_t head, std::size_t position) const;
  std::span<const double> value(std::size_t layer, std::size_t head, std::size_t position) const;
  // Value rows of one head as an n x d_head matrix.
  numkit::Matrix values(std::size_t layer, std::size_t head) const;

  void append(std::size_t layer, std::span<const double> key_row, std::span<const double> value_row);
  // Marks the rows appended for the current token as committed in all layers.
  void commit();

 private:
  std::size_t n_layers_;
  std::size_t d_model_;
  std::size_t d_head_;
  std::size_t capacity_;
  std::size_t length_ = 0;
  std::vector<std::vector<double>> keys_;
  std::vector<std::vector<double>> values_;
};

}  // namespace atr::model
