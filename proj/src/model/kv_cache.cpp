#include "atr/model/kv_cache.hpp"

#include "atr/errors.hpp"

namespace atr::model {

KVCache::KVCache(const ModelConfig& config)
    : n_layers_(config.n_layers),
      d_model_(config.d_model),
      d_head_(config.d_head()),
      capacity_(config.max_seq_len),
      keys_(config.n_layers),
      values_(config.n_layers) {}

std::span<const double> KVCache::key(std::size_t layer, std::size_t head, std::size_t position) const {
  return {keys_[layer].data() + position * d_model_ + head * d_head_, d_head_};
}

std::span<const double> KVCache::value(std::size_t layer, std::size_t head, std::size_t position) const {
  return {values_[layer].data() + position * d_model_ + head * d_head_, d_head_};
}

numkit::Matrix KVCache::values(std::size_t layer, std::size_t head) const {
  const std::size_t n = values_[layer].size() / d_model_;
  numkit::Matrix out(n, d_head_);
  for (std::size_t j = 0; j < n; ++j) {
    auto src = value(layer, head, j);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

void KVCache::append(std::size_t layer, std::span<const double> key_row, std::span<const double> value_row) {
  if (key_row.size() != d_model_ || value_row.size() != d_model_) throw ShapeError("kv row width mismatch");
  if (keys_[layer].size() / d_model_ != length_) throw ShapeError("kv append out of order");
  keys_[layer].insert(keys_[layer].end(), key_row.begin(), key_row.end());
  values_[layer].insert(values_[layer].end(), value_row.begin(), value_row.end());
}

void KVCache::commit() {
  for (std::size_t l = 0; l < n_layers_; ++l) {
    if (keys_[l].size() / d_model_ != length_ + 1) throw ShapeError("kv commit with missing layer rows");
  }
  ++length_;
}

}  // namespace atr::model
