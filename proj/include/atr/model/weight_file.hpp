#pragma once

#include <cstdint>
#include <filesystem>

#include "atr/model/weights.hpp"

namespace atr::model {

inline constexpr char kWeightMagic[4] = {'A', 'T', 'R', 'W'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

// Layout (all integers and floats little-endian):
//   "ATRW" | u32 version | u32 header_len | header JSON | f64 arrays
// Arrays follow the order listed in the header's "arrays" field:
// token_embedding, then per layer wq, wk, wv, wo[, ff_in, ff_out], then vocab_head.
void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace atr::model
