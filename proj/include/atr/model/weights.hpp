#pragma once

#include <cstdint>
#include <vector>

#include "atr/model/config.hpp"
#include "atr/numkit/matrix.hpp"

namespace atr::model {

using numkit::Matrix;

struct LayerWeights {
  Matrix wq;  // d_model x d_model; head h owns columns [h*d_head, (h+1)*d_head)
  Matrix wk;
  Matrix wv;
  Matrix wo;
  Matrix ff_in;   // d_model x 4*d_model (empty when feedforward is off)
  Matrix ff_out;  // 4*d_model x d_model

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct ModelWeights {
  ModelConfig config;
  Matrix token_embedding;  // vocab x d_model
  std::vector<LayerWeights> layers;
  Matrix vocab_head;  // d_model x vocab

  // Zero-filled weights of the right shapes.
  static ModelWeights zeros(const ModelConfig& config);

  // Throws ShapeError / NonFiniteError when shapes or values are inconsistent.
  void validate() const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

// Every entry ~ N(0, 1/d_model), drawn in storage order from a stream seeded by `seed`.
ModelWeights synthesize_model(std::uint64_t seed, const ModelConfig& config);

}  // namespace atr::model
