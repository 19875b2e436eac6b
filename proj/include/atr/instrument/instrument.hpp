#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atr/attnreal/attnreal.hpp"
#include "atr/model/transformer.hpp"
#include "atr/numkit/pca.hpp"

namespace atr::instrument {

using model::StepTrace;
using model::TokenId;

// Shortest decimal form that reads back to the same double.
std::string format_real(double v);

// ---- attention mass per token type -------------------------------------

struct MassRecord {
  std::size_t step = 0;
  std::size_t position = 0;
  std::array<double, kTokenTypeCount> mass{};  // system, visual, instruction, output

  double operator[](TokenType t) const { return mass[static_cast<std::size_t>(t)]; }
};

// For each trace: the query row's attention summed per token type, averaged
// over every layer and head. Throws EmptyInputError for an empty trace list.
std::vector<MassRecord> attention_mass_series(std::span<const StepTrace> traces, const TokenTypeMap& map);

void write_mass_csv(std::ostream& out, std::span<const MassRecord> series);

// Spearman correlation with average ranks for ties; 0 when either side is constant.
double rank_correlation(std::span<const double> x, std::span<const double> y);

// ---- feature export ----------------------------------------------------

struct FeatureRow {
  std::size_t position = 0;
  TokenId token = 0;
  TokenType type = TokenType::kSystem;
  std::vector<double> values;                 // final hidden state
  std::optional<std::array<double, 2>> coords;  // 2-D projection, when requested
};

struct FeatureTable {
  std::vector<FeatureRow> rows;
  std::optional<numkit::Projection2d> projection;
};

// One row per trace. With `project`, rows also carry their pca_2d coordinates
// (stream seeded by `seed`); a degenerate cloud raises DegenerateProjectionError.
FeatureTable export_features(std::span<const StepTrace> traces, const TokenTypeMap& map, bool project = false,
                             std::uint64_t seed = 0);

void write_features_csv(std::ostream& out, const FeatureTable& table);

// ---- logit sweep -------------------------------------------------------

struct LogitSweep {
  std::vector<double> alphas;
  std::vector<TokenId> tokens;
  std::vector<std::vector<double>> logits;  // logits[token index][alpha index]
  std::vector<double> baseline;             // hook-free logits of the watched tokens
};

// Feeds `prompt` once per alpha (AttnReal at `threshold`, every layer) and
// records the final position's pre-softmax logits for the watched tokens.
LogitSweep logit_sweep(const model::ModelWeights& weights, const model::Prompt& prompt, const TokenTypeMap& map,
                       std::span<const double> alphas, std::span<const TokenId> watch, double threshold = 1.0);

void write_logit_sweep_csv(std::ostream& out, const LogitSweep& sweep);

// ---- FLOP model --------------------------------------------------------

enum class FlopMode { kGreedy, kBeam, kNucleus, kContrastive };

std::string_view flop_mode_name(FlopMode m);
FlopMode parse_flop_mode(std::string_view name);

struct FlopQuery {
  FlopMode mode = FlopMode::kGreedy;
  bool attnreal = false;
  std::size_t beam_width = 1;  // used by kBeam only
  std::size_t context_len = 512;
  std::optional<std::size_t> attnreal_layers;  // default: every layer
};

// Analytic per-token cost, multiply-add = 2 FLOPs. Per layer 8d^2 + 4nd + 5nH,
// plus 16d^2 with the feedforward; vocab head 2dv; AttnReal 3n per layer and
// head it runs on. Beam scales by width, contrastive runs two forwards.
std::uint64_t flops_estimate(const model::ModelConfig& config, const FlopQuery& query);

struct FlopEntry {
  std::string label;
  std::uint64_t flops = 0;
};

void write_flops_csv(std::ostream& out, const std::string& config_hash, std::span<const FlopEntry> entries);

}  // namespace atr::instrument
