#include "atr/model/weights.hpp"

#include <cmath>
#include <string>

#include "atr/numkit/random_stream.hpp"

namespace atr::model {
namespace {

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.all_finite()) throw NonFiniteError(name + " contains a non-finite value");
}

}  // namespace

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  ModelWeights w;
  w.config = config;
  w.token_embedding = Matrix(config.vocab_size, d);
  w.layers.resize(config.n_layers);
  for (auto& layer : w.layers) {
    layer.wq = Matrix(d, d);
    layer.wk = Matrix(d, d);
    layer.wv = Matrix(d, d);
    layer.wo = Matrix(d, d);
    if (config.feedforward) {
      layer.ff_in = Matrix(d, config.d_ff());
      layer.ff_out = Matrix(config.d_ff(), d);
    }
  }
  w.vocab_head = Matrix(d, config.vocab_size);
  return w;
}

void ModelWeights::validate() const {
  config.validate();
  const std::size_t d = config.d_model;
  check_shape(token_embedding, config.vocab_size, d, "token_embedding");
  if (layers.size() != config.n_layers) throw ShapeError("layer count does not match config");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string p = "layer " + std::to_string(l) + " ";
    check_shape(layer.wq, d, d, p + "wq");
    check_shape(layer.wk, d, d, p + "wk");
    check_shape(layer.wv, d, d, p + "wv");
    check_shape(layer.wo, d, d, p + "wo");
    if (config.feedforward) {
      check_shape(layer.ff_in, d, config.d_ff(), p + "ff_in");
      check_shape(layer.ff_out, config.d_ff(), d, p + "ff_out");
    }
  }
  check_shape(vocab_head, d, config.vocab_size, "vocab_head");
}

ModelWeights synthesize_model(std::uint64_t seed, const ModelConfig& config) {
  ModelWeights w = ModelWeights::zeros(config);
  numkit::RandomStream stream(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  auto fill = [&](Matrix& m) {
    for (double& x : m.values()) x = scale * stream.normal();
  };
  fill(w.token_embedding);
  for (auto& layer : w.layers) {
    fill(layer.wq);
    fill(layer.wk);
    fill(layer.wv);
    fill(layer.wo);
    if (config.feedforward) {
      fill(layer.ff_in);
      fill(layer.ff_out);
    }
  }
  fill(w.vocab_head);
  return w;
}

}  // namespace atr::model
