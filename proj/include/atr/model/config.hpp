#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"

namespace atr::model {

enum class Precision { kF64, kF32 };

using TokenId = std::size_t;

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 64;
  std::size_t vocab_size = 64;
  std::size_t max_seq_len = 1024;
  bool feedforward = true;
  Precision precision = Precision::kF64;
  // Multiplier on the sinusoidal position signal; 0 disables it.
  double position_scale = 1.0;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t d_ff() const { return 4 * d_model; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const ModelConfig& cfg);

}  // namespace atr::model
