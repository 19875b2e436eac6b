#pragma once

#include <cstddef>
#include <string_view>

namespace atr {

enum class TokenType { kSystem, kVisual, kInstruction, kOutput };

inline constexpr std::size_t kTokenTypeCount = 4;

std::string_view token_type_name(TokenType type);

// Contiguous segmentation of a sequence: [0, s_end) system, [s_end, v_end)
// visual, [v_end, i_end) instruction, [i_end, ...) output.
struct TokenTypeMap {
  std::size_t s_end = 0;
  std::size_t v_end = 0;
  std::size_t i_end = 0;

  // Throws InvalidParameterError unless s_end <= v_end <= i_end.
  void validate() const;

  TokenType type_of(std::size_t position) const {
    if (position < s_end) return TokenType::kSystem;
    if (position < v_end) return TokenType::kVisual;
    if (position < i_end) return TokenType::kInstruction;
    return TokenType::kOutput;
  }

  std::size_t visual_count() const { return v_end - s_end; }
  std::size_t output_count(std::size_t row_length) const {
    return row_length > i_end ? row_length - i_end : 0;
  }

  friend bool operator==(const TokenTypeMap&, const TokenTypeMap&) = default;
};

}  // namespace atr
