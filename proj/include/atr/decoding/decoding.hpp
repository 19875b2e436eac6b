#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "atr/attnreal/attnreal.hpp"
#include "atr/model/transformer.hpp"
#include "atr/numkit/random_stream.hpp"

namespace atr::decoding {

using model::Prompt;
using model::Session;
using model::StepTrace;
using model::TokenId;

enum class Strategy { kGreedy, kBeam, kNucleus };

std::string_view strategy_name(Strategy s);
// Throws InvalidParameterError for unknown names.
Strategy parse_strategy(std::string_view name);

struct DecodeConfig {
  Strategy strategy = Strategy::kGreedy;
  std::size_t max_new_tokens = 512;
  std::size_t beam_width = 5;
  double top_p = 0.9;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;  // nucleus draws come from RandomStream(seed, stream_id)
  std::optional<TokenId> eos_token;  // none: only the length cap stops generation

  void validate() const;
};

enum class FinishReason { kEos, kLength };

std::string_view finish_reason_name(FinishReason r);

struct GenerationResult {
  std::vector<TokenId> tokens;
  std::vector<StepTrace> traces;  // traces[i] holds the logits that produced tokens[i]
  double log_prob = 0.0;          // sum of model log-probabilities of the emitted tokens
  FinishReason finish = FinishReason::kLength;
};

// Session-level decoders. `session` must be fresh; the prompt is fed through it first.
GenerationResult greedy_decode(Session& session, const Prompt& prompt, const DecodeConfig& cfg);
GenerationResult beam_search(Session& session, const Prompt& prompt, const DecodeConfig& cfg);
GenerationResult nucleus_sample(Session& session, const Prompt& prompt, const DecodeConfig& cfg);
GenerationResult generate(Session& session, const Prompt& prompt, const DecodeConfig& cfg);

// Model-level entry points; `attnreal` empty means no hook at all.
GenerationResult generate(const model::ModelWeights& weights, const Prompt& prompt, const TokenTypeMap& map,
                          const std::optional<attnreal::AttnRealConfig>& attnreal, const DecodeConfig& cfg);

// Lowest id among the maximal logits.
TokenId argmax(std::span<const double> logits);

// log softmax(logits)[token].
double token_log_prob(std::span<const double> logits, TokenId token);

// Probabilities sorted descending (ties by ascending id), cut to the shortest
// prefix whose mass reaches top_p, renormalized.
std::vector<std::pair<TokenId, double>> nucleus_support(std::span<const double> probabilities, double top_p);

TokenId sample_nucleus(std::span<const double> probabilities, double top_p, numkit::RandomStream& stream);

// softmax(logits / temperature).
std::vector<double> tempered_probabilities(std::span<const double> logits, double temperature);

}  // namespace atr::decoding
