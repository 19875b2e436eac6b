#include "atr/attnreal/attnreal.hpp"

#include <algorithm>
#include <string>

#include "atr/attnreal/hook.hpp"

namespace atr {

std::string_view token_type_name(TokenType type) {
  switch (type) {
    case TokenType::kSystem: return "system";
    case TokenType::kVisual: return "visual";
    case TokenType::kInstruction: return "instruction";
    case TokenType::kOutput: return "output";
  }
  return "unknown";
}

void TokenTypeMap::validate() const {
  if (!(s_end <= v_end && v_end <= i_end)) {
    throw InvalidParameterError("token type map must satisfy s_end <= v_end <= i_end (got " +
                                std::to_string(s_end) + ", " + std::to_string(v_end) + ", " +
                                std::to_string(i_end) + ")");
  }
}

namespace attnreal {

void AttnRealConfig::validate(std::size_t n_layers) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidParameterError("alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  if (!(threshold > 0.0)) {
    throw InvalidParameterError("threshold must be positive, got " + std::to_string(threshold));
  }
  for (std::size_t l : layers) {
    if (l >= n_layers) {
      throw InvalidParameterError("layer " + std::to_string(l) + " out of range [0, " +
                                  std::to_string(n_layers) + ")");
    }
  }
}

bool AttnRealConfig::applies_to(std::size_t layer) const {
  return layers.empty() || std::find(layers.begin(), layers.end(), layer) != layers.end();
}

std::vector<SinkReport> AttnRealHook::transform(std::span<std::vector<double>> head_rows,
                                                const HookSite& site) const {
  if (!cfg_.applies_to(site.layer) || head_rows.empty()) return {};
  const TokenTypeMap& map = *site.map;
  std::vector<SinkReport> reports;
  reports.reserve(head_rows.size());

  if (cfg_.per_head) {
    for (auto& row : head_rows) {
      auto sinks = identify_sinks<double>(row, map, cfg_.threshold);
      reports.push_back(reallocate_sinks<double>(row, map, cfg_.alpha, std::move(sinks)));
    }
    return reports;
  }

  std::vector<double> mean(head_rows.front().size(), 0.0);
  for (const auto& row : head_rows)
    for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
  for (double& m : mean) m /= static_cast<double>(head_rows.size());
  const auto shared = identify_sinks<double>(mean, map, cfg_.threshold);
  for (auto& row : head_rows) reports.push_back(reallocate_sinks<double>(row, map, cfg_.alpha, shared));
  return reports;
}

}  // namespace attnreal
}  // namespace atr
