#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "atr/attnreal/hook.hpp"
#include "atr/model/kv_cache.hpp"
#include "atr/model/weights.hpp"

namespace atr::model {

// A token id, optionally with an embedding that replaces the table lookup
// (used for visual features).
struct InputToken {
  TokenId id = 0;
  std::vector<double> embedding;

  InputToken() = default;
  InputToken(TokenId token) : id(token) {}  // NOLINT(google-explicit-constructor)
  InputToken(TokenId token, std::vector<double> features) : id(token), embedding(std::move(features)) {}
};

using Prompt = std::vector<InputToken>;

Prompt make_prompt(const std::vector<TokenId>& tokens);

struct StepTrace {
  std::size_t step = 0;      // index of the processed token within its session
  std::size_t position = 0;  // absolute sequence position of the query
  TokenId token = 0;
  // attention[layer][head]: post-hook row over positions [0, position].
  std::vector<std::vector<std::vector<double>>> attention;
  // sinks[layer]: hook reports for that layer, empty when the hook did not run.
  std::vector<std::vector<attnreal::SinkReport>> sinks;
  std::vector<double> hidden;  // final residual stream fed to the vocab head
  std::vector<double> logits;
  std::vector<double> probabilities;

  std::size_t sink_count() const;
};

// One incremental decoding step. Embeds the token at position cache.length(),
// runs every layer with the hook applied to each post-softmax row, appends
// this step's keys and values to the cache and projects to logits.
StepTrace forward_step(const ModelWeights& weights, KVCache& cache, const InputToken& token,
                       const TokenTypeMap& map, const AttentionHook* hook);

// Full-sequence causal recompute without a cache; returns the logits of every
// position (n x vocab). Reference route for incremental decoding.
numkit::Matrix forward_sequence(const ModelWeights& weights, const Prompt& tokens, const TokenTypeMap& map,
                                const AttentionHook* hook);

// Sinusoidal absolute position signal of length d_model.
std::vector<double> position_encoding(std::size_t position, std::size_t d_model);

// Per-type split of one head's mix: c_t = sum over type-t keys of a_j * V_j.
struct TypeContributions {
  std::array<std::vector<double>, kTokenTypeCount> by_type;
  const std::vector<double>& operator[](TokenType t) const { return by_type[static_cast<std::size_t>(t)]; }
};

TypeContributions decompose_hidden(std::span<const double> row, const numkit::Matrix& values,
                                   const TokenTypeMap& map);

// Incremental decoding state that a decoder can step and fork.
class Session {
 public:
  virtual ~Session() = default;
  virtual std::unique_ptr<Session> clone() const = 0;
  virtual StepTrace advance(const InputToken& token) = 0;
  virtual std::size_t length() const = 0;
  virtual std::size_t capacity() const = 0;
  virtual std::size_t vocab_size() const = 0;
};

class TransformerSession final : public Session {
 public:
  // `weights` and `hook` must outlive the session and all of its clones.
  TransformerSession(const ModelWeights& weights, TokenTypeMap map, const AttentionHook* hook);

  std::unique_ptr<Session> clone() const override;
  StepTrace advance(const InputToken& token) override;
  std::size_t length() const override { return cache_.length(); }
  std::size_t capacity() const override { return cache_.capacity(); }
  std::size_t vocab_size() const override { return weights_->config.vocab_size; }

  const KVCache& cache() const { return cache_; }

 private:
  const ModelWeights* weights_;
  TokenTypeMap map_;
  const AttentionHook* hook_;
  KVCache cache_;
};

// Feeds every prompt token through a fresh session and returns all traces.
std::vector<StepTrace> trace_sequence(const ModelWeights& weights, const Prompt& tokens, const TokenTypeMap& map,
                                      const AttentionHook* hook);

}  // namespace atr::model
