#include "atr/model/config.hpp"

#include <cstdint>
#include <cstdio>

#include "atr/errors.hpp"

namespace atr::model {

void ModelConfig::validate() const {
  if (n_layers == 0) throw InvalidParameterError("n_layers must be >= 1");
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) {
    throw InvalidParameterError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                                std::to_string(n_heads) + ")");
  }
  if (vocab_size < 2) throw InvalidParameterError("vocab_size must be >= 2");
  if (max_seq_len < 1) throw InvalidParameterError("max_seq_len must be >= 1");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"n_layers", cfg.n_layers},
                        {"n_heads", cfg.n_heads},
                        {"d_model", cfg.d_model},
                        {"vocab_size", cfg.vocab_size},
                        {"max_seq_len", cfg.max_seq_len},
                        {"feedforward", cfg.feedforward},
                        {"precision", cfg.precision == Precision::kF32 ? "f32" : "f64"},
                        {"position_scale", cfg.position_scale}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig cfg;
    cfg.n_layers = j.at("n_layers").get<std::size_t>();
    cfg.n_heads = j.at("n_heads").get<std::size_t>();
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.feedforward = j.at("feedforward").get<bool>();
    const auto precision = j.at("precision").get<std::string>();
    if (precision == "f64") {
      cfg.precision = Precision::kF64;
    } else if (precision == "f32") {
      cfg.precision = Precision::kF32;
    } else {
      throw ParseError("unknown precision '" + precision + "'");
    }
    cfg.position_scale = j.value("position_scale", 1.0);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

std::string config_hash(const ModelConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace atr::model
