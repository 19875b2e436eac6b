#include "atr/model/transformer.hpp"

#include <cmath>
#include <string>

#include "atr/numkit/softmax.hpp"

namespace atr::model {
namespace {

// x (1 x rows) times w (rows x cols); each output accumulates left to right.
template <typename T>
std::vector<T> vec_mat(const std::vector<T>& x, const Matrix& w) {
  std::vector<T> out(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    T acc{0};
    for (std::size_t k = 0; k < w.rows(); ++k) acc += x[k] * static_cast<T>(w(k, j));
    out[j] = acc;
  }
  return out;
}

template <typename T>
T gelu(T x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  const T inner = static_cast<T>(kC) * (x + static_cast<T>(0.044715) * x * x * x);
  return static_cast<T>(0.5) * x * (T{1} + std::tanh(inner));
}

template <typename T>
std::vector<double> widen(const std::vector<T>& v) {
  return std::vector<double>(v.begin(), v.end());
}

void check_input(const ModelWeights& weights, std::size_t position, const InputToken& token) {
  const auto& cfg = weights.config;
  if (position >= cfg.max_seq_len) {
    throw SequenceLengthError("sequence length limit " + std::to_string(cfg.max_seq_len) + " reached");
  }
  if (token.id >= cfg.vocab_size) {
    throw VocabError("token " + std::to_string(token.id) + " outside vocabulary of " +
                     std::to_string(cfg.vocab_size));
  }
  if (!token.embedding.empty() && token.embedding.size() != cfg.d_model) {
    throw ShapeError("embedding override has " + std::to_string(token.embedding.size()) + " values, expected " +
                     std::to_string(cfg.d_model));
  }
}

std::vector<double> embed(const ModelWeights& weights, std::size_t position, const InputToken& token) {
  const auto& cfg = weights.config;
  std::vector<double> x(cfg.d_model);
  auto row = weights.token_embedding.row(token.id);
  const bool overridden = !token.embedding.empty();
  const auto pe = position_encoding(position, cfg.d_model);
  for (std::size_t i = 0; i < cfg.d_model; ++i) {
    x[i] = (overridden ? token.embedding[i] : row[i]) + cfg.position_scale * pe[i];
  }
  return x;
}

template <typename T>
StepTrace forward_impl(const ModelWeights& weights, KVCache& cache, const InputToken& token, const TokenTypeMap& map,
                       const AttentionHook* hook) {
  const auto& cfg = weights.config;
  const std::size_t position = cache.length();
  check_input(weights, position, token);

  const std::size_t d = cfg.d_model;
  const std::size_t n_heads = cfg.n_heads;
  const std::size_t dk = cfg.d_head();
  const std::size_t n = position + 1;
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(dk)));

  StepTrace trace;
  trace.step = position;
  trace.position = position;
  trace.token = token.id;
  trace.attention.resize(cfg.n_layers);
  trace.sinks.resize(cfg.n_layers);

  std::vector<T> x;
  for (double v : embed(weights, position, token)) x.push_back(static_cast<T>(v));

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& layer = weights.layers[l];
    const auto q = vec_mat(x, layer.wq);
    const auto k = vec_mat(x, layer.wk);
    const auto v = vec_mat(x, layer.wv);
    cache.append(l, widen(k), widen(v));

    std::vector<std::vector<double>> rows(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
      std::vector<T> scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        auto key = cache.key(l, h, j);
        T acc{0};
        for (std::size_t c = 0; c < dk; ++c) acc += q[h * dk + c] * static_cast<T>(key[c]);
        scores[j] = acc / scale;
      }
      rows[h] = widen(numkit::softmax_row<T>(scores));
    }
    if (hook != nullptr) {
      HookSite site{l, position, &map};
      trace.sinks[l] = hook->transform(rows, site);
    }

    std::vector<T> mixed(d, T{0});
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t c = 0; c < dk; ++c) {
        T acc{0};
        for (std::size_t j = 0; j < n; ++j) acc += static_cast<T>(rows[h][j]) * static_cast<T>(cache.value(l, h, j)[c]);
        mixed[h * dk + c] = acc;
      }
    }
    const auto attn_out = vec_mat(mixed, layer.wo);
    for (std::size_t i = 0; i < d; ++i) x[i] += attn_out[i];

    if (cfg.feedforward) {
      auto hidden = vec_mat(x, layer.ff_in);
      for (T& u : hidden) u = gelu(u);
      const auto ff = vec_mat(hidden, layer.ff_out);
      for (std::size_t i = 0; i < d; ++i) x[i] += ff[i];
    }
    trace.attention[l] = std::move(rows);
  }
  cache.commit();

  const auto logits = vec_mat(x, weights.vocab_head);
  for (T lv : logits) {
    if (!std::isfinite(lv)) throw NonFiniteError("non-finite logit");
  }
  trace.hidden = widen(x);
  trace.logits = widen(logits);
  trace.probabilities = widen(numkit::softmax_row<T>(logits));
  return trace;
}

}  // namespace

Prompt make_prompt(const std::vector<TokenId>& tokens) { return Prompt(tokens.begin(), tokens.end()); }

std::size_t StepTrace::sink_count() const {
  std::size_t total = 0;
  for (const auto& layer : sinks)
    for (const auto& r : layer) total += r.sink_indices.size();
  return total;
}

std::vector<double> position_encoding(std::size_t position, std::size_t d_model) {
  std::vector<double> pe(d_model);
  const double pos = static_cast<double>(position);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double freq = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
    pe[i] = std::sin(pos / freq);
    if (i + 1 < d_model) pe[i + 1] = std::cos(pos / freq);
  }
  return pe;
}

StepTrace forward_step(const ModelWeights& weights, KVCache& cache, const InputToken& token, const TokenTypeMap& map,
                       const AttentionHook* hook) {
  if (weights.config.precision == Precision::kF32) return forward_impl<float>(weights, cache, token, map, hook);
  return forward_impl<double>(weights, cache, token, map, hook);
}

numkit::Matrix forward_sequence(const ModelWeights& weights, const Prompt& tokens, const TokenTypeMap& map,
                                const AttentionHook* hook) {
  const auto& cfg = weights.config;
  const std::size_t n = tokens.size();
  const std::size_t d = cfg.d_model;
  const std::size_t dk = cfg.d_head();
  const double scale = std::sqrt(static_cast<double>(dk));
  if (n == 0) throw EmptyContextError("forward_sequence: empty input");

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    check_input(weights, i, tokens[i]);
    const auto e = embed(weights, i, tokens[i]);
    std::copy(e.begin(), e.end(), x.row(i).begin());
  }

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& layer = weights.layers[l];
    const Matrix q = numkit::matmul(x, layer.wq);
    const Matrix k = numkit::matmul(x, layer.wk);
    const Matrix v = numkit::matmul(x, layer.wv);
    Matrix mixed(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<bool> visible(n);
      for (std::size_t j = 0; j < n; ++j) visible[j] = j <= i;
      std::vector<std::vector<double>> rows(cfg.n_heads);
      for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        std::vector<double> scores(n, 0.0);
        for (std::size_t j = 0; j <= i; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dk; ++c) acc += q(i, h * dk + c) * k(j, h * dk + c);
          scores[j] = acc / scale;
        }
        auto full = numkit::softmax_row<double>(scores, visible);
        rows[h].assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(i + 1));
      }
      if (hook != nullptr) {
        HookSite site{l, i, &map};
        hook->transform(rows, site);
      }
      for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        for (std::size_t c = 0; c < dk; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += rows[h][j] * v(j, h * dk + c);
          mixed(i, h * dk + c) = acc;
        }
      }
    }
    const Matrix attn_out = numkit::matmul(mixed, layer.wo);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) x(i, c) += attn_out(i, c);
    if (cfg.feedforward) {
      Matrix hidden = numkit::matmul(x, layer.ff_in);
      for (double& u : hidden.values()) u = gelu(u);
      const Matrix ff = numkit::matmul(hidden, layer.ff_out);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) x(i, c) += ff(i, c);
    }
  }
  return numkit::matmul(x, weights.vocab_head);
}

TypeContributions decompose_hidden(std::span<const double> row, const numkit::Matrix& values,
                                   const TokenTypeMap& map) {
  if (row.size() > values.rows()) throw ShapeError("decompose_hidden: more weights than value rows");
  TypeContributions out;
  for (auto& c : out.by_type) c.assign(values.cols(), 0.0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    auto& target = out.by_type[static_cast<std::size_t>(map.type_of(j))];
    for (std::size_t c = 0; c < values.cols(); ++c) target[c] += row[j] * values(j, c);
  }
  return out;
}

TransformerSession::TransformerSession(const ModelWeights& weights, TokenTypeMap map, const AttentionHook* hook)
    : weights_(&weights), map_(map), hook_(hook), cache_(weights.config) {
  map_.validate();
}

std::unique_ptr<Session> TransformerSession::clone() const { return std::make_unique<TransformerSession>(*this); }

StepTrace TransformerSession::advance(const InputToken& token) {
  return forward_step(*weights_, cache_, token, map_, hook_);
}

std::vector<StepTrace> trace_sequence(const ModelWeights& weights, const Prompt& tokens, const TokenTypeMap& map,
                                      const AttentionHook* hook) {
  TransformerSession session(weights, map, hook);
  std::vector<StepTrace> traces;
  traces.reserve(tokens.size());
  for (const auto& t : tokens) traces.push_back(session.advance(t));
  return traces;
}

}  // namespace atr::model
