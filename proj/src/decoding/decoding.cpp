#include "atr/decoding/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>

#include "atr/attnreal/hook.hpp"
#include "atr/numkit/softmax.hpp"

namespace atr::decoding {
namespace {

// Cumulative-mass slack so that e.g. 0.5 + 0.3 still reaches top_p = 0.8.
constexpr double kTopPSlack = 1e-12;

StepTrace prefill(Session& session, const Prompt& prompt) {
  if (prompt.empty()) throw EmptyContextError("prompt must contain at least one token");
  if (prompt.size() > session.capacity()) {
    throw SequenceLengthError("prompt of " + std::to_string(prompt.size()) + " tokens exceeds max_seq_len " +
                              std::to_string(session.capacity()));
  }
  StepTrace last;
  for (const auto& t : prompt) last = session.advance(t);
  return last;
}

bool is_eos(const DecodeConfig& cfg, TokenId t) { return cfg.eos_token && *cfg.eos_token == t; }

GenerationResult run_single_path(Session& session, const Prompt& prompt, const DecodeConfig& cfg,
                                 const std::function<TokenId(const StepTrace&)>& choose) {
  cfg.validate();
  GenerationResult result;
  StepTrace current = prefill(session, prompt);
  while (true) {
    const TokenId token = choose(current);
    result.log_prob += token_log_prob(current.logits, token);
    current.step = result.tokens.size();
    result.tokens.push_back(token);
    result.traces.push_back(std::move(current));
    if (is_eos(cfg, token)) {
      result.finish = FinishReason::kEos;
      break;
    }
    if (result.tokens.size() >= cfg.max_new_tokens || session.length() >= session.capacity()) {
      result.finish = FinishReason::kLength;
      break;
    }
    current = session.advance(token);
  }
  return result;
}

// Persistent list so that beams share trace prefixes instead of copying them.
struct TraceNode {
  StepTrace trace;
  std::shared_ptr<const TraceNode> parent;
};

struct Beam {
  std::vector<TokenId> tokens;
  double score = 0.0;
  bool finished = false;
  std::shared_ptr<const TraceNode> history;
  std::unique_ptr<Session> session;
  StepTrace pending;  // logits for the next token of a running beam
};

// Higher score first; equal scores fall back to the lexicographically smaller sequence.
bool ranks_before(double score_a, const std::vector<TokenId>& a, double score_b, const std::vector<TokenId>& b) {
  if (score_a != score_b) return score_a > score_b;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

GenerationResult materialize(const Beam& beam) {
  GenerationResult result;
  result.tokens = beam.tokens;
  result.log_prob = beam.score;
  result.finish = beam.finished ? FinishReason::kEos : FinishReason::kLength;
  for (auto node = beam.history; node; node = node->parent) result.traces.push_back(node->trace);
  std::reverse(result.traces.begin(), result.traces.end());
  return result;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kBeam: return "beam";
    case Strategy::kNucleus: return "nucleus";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "beam") return Strategy::kBeam;
  if (name == "nucleus") return Strategy::kNucleus;
  throw InvalidParameterError("unknown decoding strategy '" + std::string(name) + "'");
}

std::string_view finish_reason_name(FinishReason r) { return r == FinishReason::kEos ? "eos" : "length"; }

void DecodeConfig::validate() const {
  if (beam_width < 1) throw InvalidParameterError("beam_width must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidParameterError("top_p must lie in (0, 1]");
  if (!(temperature > 0.0)) throw InvalidParameterError("temperature must be positive");
  if (max_new_tokens < 1) throw InvalidParameterError("max_new_tokens must be >= 1");
}

TokenId argmax(std::span<const double> logits) {
  if (logits.empty()) throw EmptyContextError("argmax of empty logits");
  TokenId best = 0;
  for (TokenId i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

double token_log_prob(std::span<const double> logits, TokenId token) {
  return logits[token] - numkit::log_sum_exp(logits);
}

std::vector<double> tempered_probabilities(std::span<const double> logits, double temperature) {
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& x : scaled) x /= temperature;
  return numkit::softmax_row(scaled);
}

std::vector<std::pair<TokenId, double>> nucleus_support(std::span<const double> probabilities, double top_p) {
  std::vector<std::pair<TokenId, double>> order;
  order.reserve(probabilities.size());
  for (TokenId i = 0; i < probabilities.size(); ++i) order.emplace_back(i, probabilities[i]);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  double mass = 0.0;
  std::size_t keep = order.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    mass += order[i].second;
    if (mass >= top_p - kTopPSlack) {
      keep = i + 1;
      break;
    }
  }
  order.resize(keep);
  double total = 0.0;
  for (const auto& [id, p] : order) total += p;
  for (auto& entry : order) entry.second /= total;
  return order;
}

TokenId sample_nucleus(std::span<const double> probabilities, double top_p, numkit::RandomStream& stream) {
  const auto support = nucleus_support(probabilities, top_p);
  const double u = stream.uniform();
  double cumulative = 0.0;
  for (const auto& [id, p] : support) {
    cumulative += p;
    if (u < cumulative) return id;
  }
  return support.back().first;
}

GenerationResult greedy_decode(Session& session, const Prompt& prompt, const DecodeConfig& cfg) {
  return run_single_path(session, prompt, cfg, [](const StepTrace& t) { return argmax(t.logits); });
}

GenerationResult nucleus_sample(Session& session, const Prompt& prompt, const DecodeConfig& cfg) {
  numkit::RandomStream stream(cfg.seed, cfg.stream_id);
  return run_single_path(session, prompt, cfg, [&](const StepTrace& t) {
    const auto probs = tempered_probabilities(t.logits, cfg.temperature);
    return sample_nucleus(probs, cfg.top_p, stream);
  });
}

GenerationResult beam_search(Session& session, const Prompt& prompt, const DecodeConfig& cfg) {
  cfg.validate();
  const std::size_t width = cfg.beam_width;

  std::vector<Beam> frontier;
  {
    Beam root;
    root.pending = prefill(session, prompt);
    root.session = session.clone();
    frontier.push_back(std::move(root));
  }

  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    struct Candidate {
      std::size_t parent;
      std::optional<TokenId> token;  // empty: carry a finished beam over unchanged
      double score;
      std::vector<TokenId> tokens;
    };
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < frontier.size(); ++b) {
      const Beam& beam = frontier[b];
      if (beam.finished) {
        candidates.push_back({b, std::nullopt, beam.score, beam.tokens});
        continue;
      }
      const auto& logits = beam.pending.logits;
      const double lse = numkit::log_sum_exp<double>(logits);
      // Only the top `width` tokens of a beam can survive selection.
      std::vector<TokenId> ids(logits.size());
      std::iota(ids.begin(), ids.end(), TokenId{0});
      const std::size_t take = std::min(width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                        [&](TokenId a, TokenId b2) { return logits[a] != logits[b2] ? logits[a] > logits[b2] : a < b2; });
      for (std::size_t i = 0; i < take; ++i) {
        const TokenId t = ids[i];
        std::vector<TokenId> seq = beam.tokens;
        seq.push_back(t);
        candidates.push_back({b, t, beam.score + (logits[t] - lse), std::move(seq)});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return ranks_before(a.score, a.tokens, b.score, b.tokens);
    });
    if (candidates.size() > width) candidates.resize(width);

    std::vector<Beam> next;
    next.reserve(candidates.size());
    bool any_running = false;
    for (auto& c : candidates) {
      Beam& parent = frontier[c.parent];
      Beam child;
      child.tokens = std::move(c.tokens);
      child.score = c.score;
      if (!c.token) {
        child.finished = true;
        child.history = parent.history;
        next.push_back(std::move(child));
        continue;
      }
      StepTrace trace = parent.pending;
      trace.step = step;
      child.history = std::make_shared<const TraceNode>(TraceNode{std::move(trace), parent.history});
      if (is_eos(cfg, *c.token)) {
        child.finished = true;
      } else {
        any_running = true;
        child.session = parent.session->clone();
        const bool can_continue = child.tokens.size() < cfg.max_new_tokens && child.session->length() < child.session->capacity();
        if (can_continue) child.pending = child.session->advance(*c.token);
      }
      next.push_back(std::move(child));
    }
    frontier = std::move(next);
    if (!any_running) break;
    const bool context_full = std::all_of(frontier.begin(), frontier.end(), [](const Beam& b) {
      return b.finished || b.session->length() >= b.session->capacity();
    });
    if (context_full) break;
  }

  const Beam* best_finished = nullptr;
  const Beam* best_running = nullptr;
  for (const Beam& b : frontier) {
    const Beam*& slot = b.finished ? best_finished : best_running;
    if (slot == nullptr || ranks_before(b.score, b.tokens, slot->score, slot->tokens)) slot = &b;
  }
  return materialize(best_finished != nullptr ? *best_finished : *best_running);
}

GenerationResult generate(Session& session, const Prompt& prompt, const DecodeConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::kGreedy: return greedy_decode(session, prompt, cfg);
    case Strategy::kBeam: return beam_search(session, prompt, cfg);
    case Strategy::kNucleus: return nucleus_sample(session, prompt, cfg);
  }
  throw InvalidParameterError("unknown strategy");
}

GenerationResult generate(const model::ModelWeights& weights, const Prompt& prompt, const TokenTypeMap& map,
                          const std::optional<attnreal::AttnRealConfig>& attnreal, const DecodeConfig& cfg) {
  std::optional<attnreal::AttnRealHook> hook;
  if (attnreal) {
    attnreal->validate(weights.config.n_layers);
    hook.emplace(*attnreal);
  }
  model::TransformerSession session(weights, map, hook ? &*hook : nullptr);
  return generate(session, prompt, cfg);
}

}  // namespace atr::decoding
