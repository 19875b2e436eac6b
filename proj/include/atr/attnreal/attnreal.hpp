#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "atr/attnreal/token_types.hpp"
#include "atr/errors.hpp"

namespace atr::attnreal {

struct AttnRealConfig {
  double threshold = 1.0;  // T: a sink receives more than T/n attention
  double alpha = 1.0;      // down-scaling factor; 1.0 disables the intervention
  // Layers the intervention runs on. Empty means every layer.
  std::vector<std::size_t> layers;
  // When false, sinks are identified on the head-averaged row and the same
  // sink set is reallocated in every head of the layer.
  bool per_head = true;

  void validate(std::size_t n_layers) const;
  bool applies_to(std::size_t layer) const;
  bool is_identity() const { return alpha == 1.0; }
};

// One query's post-softmax distribution over its visible keys.
template <typename T = double>
struct AttentionRow {
  std::vector<T> weights;
  std::size_t query_position = 0;
};

struct SinkReport {
  std::vector<std::size_t> sink_indices;
  double delta_mass = 0.0;
  double per_visual_increment = 0.0;
  // Sinks were found but there are no visual tokens to receive the mass.
  bool no_visual = false;

  bool has_sinks() const { return !sink_indices.empty(); }
};

// Output-range positions j with row[j] > threshold / n, n = row length.
template <typename T>
std::vector<std::size_t> identify_sinks(std::span<const T> row, const TokenTypeMap& map,
                                        double threshold) {
  std::vector<std::size_t> sinks;
  const std::size_t n = row.size();
  if (n == 0) return sinks;
  const T bar = static_cast<T>(threshold / static_cast<double>(n));
  for (std::size_t j = map.i_end; j < n; ++j) {
    if (row[j] > bar) sinks.push_back(j);
  }
  return sinks;
}

// Scales the given sink entries by alpha and spreads the removed mass evenly
// over the visual range. Entries outside sinks and the visual range are untouched.
template <typename T>
SinkReport reallocate_sinks(std::span<T> row, const TokenTypeMap& map, double alpha,
                            std::vector<std::size_t> sinks) {
  SinkReport report;
  report.sink_indices = std::move(sinks);
  if (report.sink_indices.empty() || alpha == 1.0) return report;
  const std::size_t n_visual = map.visual_count();
  if (n_visual == 0 || map.v_end > row.size()) {
    report.no_visual = true;
    return report;
  }
  const T a = static_cast<T>(alpha);
  T delta{0};
  for (std::size_t j : report.sink_indices) {
    const T before = row[j];
    row[j] = a * before;
    delta += before - row[j];
  }
  const T increment = delta / static_cast<T>(n_visual);
  for (std::size_t k = map.s_end; k < map.v_end; ++k) row[k] += increment;
  report.delta_mass = static_cast<double>(delta);
  report.per_visual_increment = static_cast<double>(increment);
  return report;
}

template <typename T>
std::pair<AttentionRow<T>, SinkReport> reallocate(const AttentionRow<T>& row, const TokenTypeMap& map,
                                                  const AttnRealConfig& cfg) {
  AttentionRow<T> out = row;
  auto sinks = identify_sinks<T>(std::span<const T>(row.weights), map, cfg.threshold);
  SinkReport report = reallocate_sinks<T>(std::span<T>(out.weights), map, cfg.alpha, std::move(sinks));
  return {std::move(out), std::move(report)};
}

}  // namespace atr::attnreal
