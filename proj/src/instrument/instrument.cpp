#include "atr/instrument/instrument.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "atr/attnreal/hook.hpp"
#include "atr/errors.hpp"

namespace atr::instrument {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<MassRecord> attention_mass_series(std::span<const StepTrace> traces, const TokenTypeMap& map) {
  if (traces.empty()) throw EmptyInputError("attention_mass_series: no traces");
  std::vector<MassRecord> out;
  out.reserve(traces.size());
  for (const auto& trace : traces) {
    MassRecord rec;
    rec.step = trace.step;
    rec.position = trace.position;
    std::size_t rows = 0;
    for (const auto& layer : trace.attention) {
      for (const auto& row : layer) {
        for (std::size_t j = 0; j < row.size(); ++j) rec.mass[static_cast<std::size_t>(map.type_of(j))] += row[j];
        ++rows;
      }
    }
    if (rows == 0) throw EmptyInputError("attention_mass_series: trace without attention rows");
    for (double& m : rec.mass) m /= static_cast<double>(rows);
    out.push_back(rec);
  }
  return out;
}

void write_mass_csv(std::ostream& out, std::span<const MassRecord> series) {
  out << "step,mass_s,mass_v,mass_i,mass_o\n";
  for (const auto& r : series) {
    out << r.step;
    for (double m : r.mass) out << ',' << format_real(m);
    out << '\n';
  }
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double rank_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("rank_correlation: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

FeatureTable export_features(std::span<const StepTrace> traces, const TokenTypeMap& map, bool project,
                             std::uint64_t seed) {
  FeatureTable table;
  table.rows.reserve(traces.size());
  for (const auto& t : traces) {
    table.rows.push_back(FeatureRow{t.position, t.token, map.type_of(t.position), t.hidden, std::nullopt});
  }
  if (project && !table.rows.empty()) {
    const std::size_t d = table.rows.front().values.size();
    numkit::Matrix points(table.rows.size(), d);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (table.rows[r].values.size() != d) throw ShapeError("export_features: ragged hidden states");
      std::copy(table.rows[r].values.begin(), table.rows[r].values.end(), points.row(r).begin());
    }
    numkit::RandomStream stream(seed);
    table.projection = numkit::pca_2d(points, stream);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      table.rows[r].coords = std::array<double, 2>{table.projection->coordinates(r, 0),
                                                   table.projection->coordinates(r, 1)};
    }
  }
  return table;
}

void write_features_csv(std::ostream& out, const FeatureTable& table) {
  const std::size_t d = table.rows.empty() ? 0 : table.rows.front().values.size();
  const bool coords = !table.rows.empty() && table.rows.front().coords.has_value();
  out << "position,token,type";
  for (std::size_t i = 0; i < d; ++i) out << ",h" << i;
  if (coords) out << ",pc1,pc2";
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.position << ',' << r.token << ',' << token_type_name(r.type);
    for (double v : r.values) out << ',' << format_real(v);
    if (coords) out << ',' << format_real((*r.coords)[0]) << ',' << format_real((*r.coords)[1]);
    out << '\n';
  }
}

LogitSweep logit_sweep(const model::ModelWeights& weights, const model::Prompt& prompt, const TokenTypeMap& map,
                       std::span<const double> alphas, std::span<const TokenId> watch, double threshold) {
  if (prompt.empty()) throw EmptyInputError("logit_sweep: empty prompt");
  for (TokenId t : watch) {
    if (t >= weights.config.vocab_size) throw VocabError("logit_sweep: watched token out of range");
  }
  LogitSweep sweep;
  sweep.alphas.assign(alphas.begin(), alphas.end());
  sweep.tokens.assign(watch.begin(), watch.end());
  sweep.logits.assign(watch.size(), std::vector<double>(alphas.size()));

  auto last_logits = [&](const AttentionHook* hook) {
    return model::trace_sequence(weights, prompt, map, hook).back().logits;
  };
  const auto base = last_logits(nullptr);
  for (TokenId t : watch) sweep.baseline.push_back(base[t]);

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    attnreal::AttnRealConfig cfg;
    cfg.alpha = alphas[a];
    cfg.threshold = threshold;
    cfg.validate(weights.config.n_layers);
    const attnreal::AttnRealHook hook(cfg);
    const auto logits = last_logits(&hook);
    for (std::size_t i = 0; i < watch.size(); ++i) sweep.logits[i][a] = logits[watch[i]];
  }
  return sweep;
}

void write_logit_sweep_csv(std::ostream& out, const LogitSweep& sweep) {
  out << "token,alpha,logit\n";
  for (std::size_t i = 0; i < sweep.tokens.size(); ++i)
    for (std::size_t a = 0; a < sweep.alphas.size(); ++a)
      out << sweep.tokens[i] << ',' << format_real(sweep.alphas[a]) << ',' << format_real(sweep.logits[i][a]) << '\n';
}

std::string_view flop_mode_name(FlopMode m) {
  switch (m) {
    case FlopMode::kGreedy: return "greedy";
    case FlopMode::kBeam: return "beam";
    case FlopMode::kNucleus: return "nucleus";
    case FlopMode::kContrastive: return "contrastive";
  }
  return "?";
}

FlopMode parse_flop_mode(std::string_view name) {
  for (FlopMode m : {FlopMode::kGreedy, FlopMode::kBeam, FlopMode::kNucleus, FlopMode::kContrastive}) {
    if (flop_mode_name(m) == name) return m;
  }
  throw InvalidParameterError("unknown flop mode '" + std::string(name) + "'");
}

std::uint64_t flops_estimate(const model::ModelConfig& config, const FlopQuery& query) {
  config.validate();
  if (query.mode == FlopMode::kBeam && query.beam_width == 0) throw InvalidParameterError("beam width must be >= 1");
  const std::uint64_t d = config.d_model, n = query.context_len, h = config.n_heads, L = config.n_layers;
  std::uint64_t per_layer = 8 * d * d + 4 * n * d + 5 * n * h;
  if (config.feedforward) per_layer += 16 * d * d;
  std::uint64_t total = L * per_layer + 2 * d * config.vocab_size;
  if (query.attnreal) {
    const std::uint64_t layers = query.attnreal_layers.value_or(L);
    if (layers > L) throw InvalidParameterError("attnreal layer count exceeds n_layers");
    total += 3 * n * h * layers;
  }
  switch (query.mode) {
    case FlopMode::kBeam: return total * query.beam_width;
    case FlopMode::kContrastive: return total * 2;
    default: return total;
  }
}

void write_flops_csv(std::ostream& out, const std::string& config_hash, std::span<const FlopEntry> entries) {
  out << "config_hash,mode,flops_per_token\n";
  for (const auto& e : entries) out << config_hash << ',' << e.label << ',' << e.flops << '\n';
}

}  // namespace atr::instrument
