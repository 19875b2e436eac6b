#include <cmath>
#include <random>
#include <sstream>

#include "atr/attnreal/hook.hpp"
#include "atr/errors.hpp"
#include "atr/instrument/instrument.hpp"
#include "atr/scenario/scenario.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace atr;
using instrument::FlopMode;
using instrument::FlopQuery;

namespace {

model::StepTrace trace_with(std::size_t position, std::vector<std::vector<std::vector<double>>> attention) {
  model::StepTrace t;
  t.step = position;
  t.position = position;
  t.attention = std::move(attention);
  return t;
}

model::ModelConfig small(std::size_t layers, bool ff) {
  model::ModelConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = 8;
  c.vocab_size = 12;
  c.max_seq_len = 64;
  c.feedforward = ff;
  return c;
}

}  // namespace

TEST_CASE("mass series: one-hot and uniform rows") {
  const TokenTypeMap map{1, 3, 4};
  const auto one_hot = trace_with(4, {{{0, 0, 1, 0, 0}}});
  const auto m = instrument::attention_mass_series(std::vector{one_hot}, map);
  CHECK(m[0].mass == std::array<double, 4>{0, 1, 0, 0});

  const auto uniform = trace_with(4, {{{0.2, 0.2, 0.2, 0.2, 0.2}}});
  const auto u = instrument::attention_mass_series(std::vector{uniform}, map);
  CHECK(std::abs(u[0][TokenType::kSystem] - 0.2) < 1e-15);
  CHECK(std::abs(u[0][TokenType::kVisual] - 0.4) < 1e-15);
  CHECK(std::abs(u[0][TokenType::kInstruction] - 0.2) < 1e-15);
  CHECK(std::abs(u[0][TokenType::kOutput] - 0.2) < 1e-15);
  CHECK_THROWS_AS(instrument::attention_mass_series({}, map), EmptyInputError);
}

TEST_CASE("mass series: random traces against direct summation") {
  std::mt19937_64 rng(3);
  const auto hook = [] {
    attnreal::AttnRealConfig c;
    c.alpha = 0.5;
    return attnreal::AttnRealHook(c);
  }();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = model::synthesize_model(seed, small(3, true));
    std::vector<model::TokenId> ids(15);
    for (auto& t : ids) t = rng() % 12;
    const TokenTypeMap map{2, 6, 9};
    const auto traces = model::trace_sequence(w, model::make_prompt(ids), map, &hook);
    const auto series = instrument::attention_mass_series(traces, map);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      std::array<double, 4> want{};
      for (const auto& layer : traces[i].attention)
        for (const auto& row : layer)
          for (std::size_t j = 0; j < row.size(); ++j) {
            const std::size_t type = j < 2 ? 0 : j < 6 ? 1 : j < 9 ? 2 : 3;
            want[type] += row[j] / 6.0;
          }
      double total = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(std::abs(series[i].mass[k] - want[k]) <= 1e-12);
        total += series[i].mass[k];
      }
      REQUIRE(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("rank correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(instrument::rank_correlation(x, std::vector<double>{2, 4, 6, 8, 100}) == doctest::Approx(1.0));
  CHECK(instrument::rank_correlation(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(instrument::rank_correlation(x, std::vector<double>{1, 1, 1, 1, 1}) == 0.0);
  // ties get average ranks: ranks of y are 1.5,1.5,3,4,5
  const double r = instrument::rank_correlation(x, std::vector<double>{0, 0, 1, 2, 3});
  CHECK(r == doctest::Approx(0.9746794344808963));
}

TEST_CASE("feature export: labels, identical rows, projection against an eigensolver") {
  const TokenTypeMap map{1, 2, 3};
  std::vector<model::StepTrace> traces;
  for (std::size_t p = 0; p < 4; ++p) {
    auto t = trace_with(p, {});
    t.token = p;
    t.hidden = {1.0, 2.0, 3.0};
    traces.push_back(t);
  }
  auto table = instrument::export_features(traces, map);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].type == TokenType::kSystem);
  CHECK(table.rows[1].type == TokenType::kVisual);
  CHECK(table.rows[2].type == TokenType::kInstruction);
  CHECK(table.rows[3].type == TokenType::kOutput);
  CHECK(table.rows[0].values == table.rows[3].values);
  CHECK_THROWS_AS(instrument::export_features(traces, map, true), DegenerateProjectionError);

  std::ostringstream csv;
  instrument::write_features_csv(csv, table);
  CHECK(csv.str().rfind("position,token,type,h0,h1,h2\n0,0,system,1,2,3\n", 0) == 0);

  std::mt19937_64 rng(4);
  const auto w = model::synthesize_model(9, small(2, true));
  std::vector<model::TokenId> ids(30);
  for (auto& t : ids) t = rng() % 12;
  const auto full = model::trace_sequence(w, model::make_prompt(ids), map, nullptr);
  table = instrument::export_features(full, map, true, 5);
  oracle::Grid pts;
  for (const auto& t : full) pts.push_back(t.hidden);
  const auto eig = oracle::jacobi_eigen(oracle::sample_covariance(pts));
  std::vector<double> mean(8, 0.0);
  for (const auto& p : pts)
    for (std::size_t k = 0; k < 8; ++k) mean[k] += p[k] / static_cast<double>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t axis = 0; axis < 2; ++axis) {
      double proj = 0;
      for (std::size_t k = 0; k < 8; ++k) proj += (pts[i][k] - mean[k]) * eig.vectors[axis][k];
      REQUIRE(std::abs(std::abs(proj) - std::abs((*table.rows[i].coords)[axis])) <= 1e-6);
    }
  }
  // pairwise distances in the plane agree as well
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double want = 0, got = 0;
      for (std::size_t axis = 0; axis < 2; ++axis) {
        double a = 0, b = 0;
        for (std::size_t k = 0; k < 8; ++k) a += (pts[i][k] - pts[j][k]) * eig.vectors[axis][k];
        b = (*table.rows[i].coords)[axis] - (*table.rows[j].coords)[axis];
        want += a * a;
        got += b * b;
      }
      REQUIRE(std::abs(std::sqrt(want) - std::sqrt(got)) <= 1e-6);
    }
  }
}

TEST_CASE("logit sweep: baseline column, collinearity, grounded direction") {
  std::mt19937_64 rng(6);
  const TokenTypeMap map{1, 5, 7};
  const std::vector<model::TokenId> watch{0, 3, 7, 11};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = model::synthesize_model(seed, small(1, false));
    std::vector<model::TokenId> ids(12);
    for (auto& t : ids) t = rng() % 12;
    const auto prompt = model::make_prompt(ids);
    const auto one = instrument::logit_sweep(w, prompt, map, std::vector<double>{1.0}, watch);
    for (std::size_t i = 0; i < watch.size(); ++i) REQUIRE(one.logits[i][0] == one.baseline[i]);

    const auto s = instrument::logit_sweep(w, prompt, map, std::vector<double>{1.0, 0.7, 0.4}, watch);
    for (std::size_t i = 0; i < watch.size(); ++i) {
      const auto& l = s.logits[i];
      REQUIRE(std::abs((l[2] - l[0]) - 2.0 * (l[1] - l[0])) <= 1e-5);
    }
  }

  const auto lex = scenario::default_lexicon();
  const auto gw = scenario::build_grounded_model(0, lex, model::ModelConfig{}, {});
  const scenario::VocabLayout vocab{lex.size()};
  for (const auto& scene : scenario::build_scenes(0, lex, {}, 64)) {
    auto prompt = scene.prompt();
    // two emitted objects give the output range something to attract attention
    prompt.emplace_back(vocab.object_token(scene.ground_truth[0]));
    prompt.emplace_back(vocab.object_token(scene.ground_truth[1]));
    const std::vector<model::TokenId> gt_watch{vocab.object_token(scene.ground_truth[2])};
    const auto s = instrument::logit_sweep(gw, prompt, scene.map, std::vector<double>{1.0, 0.7}, gt_watch);
    CHECK(s.logits[0][1] > s.logits[0][0]);
  }
}

TEST_CASE("flops: hand count, ratios, monotonicity") {
  model::ModelConfig hand;
  hand.n_layers = 1;
  hand.n_heads = 1;
  hand.d_model = 2;
  hand.vocab_size = 3;
  hand.feedforward = false;
  FlopQuery q;
  q.context_len = 2;
  // 8*4 + 4*2*2 + 5*2*1 = 58, head 2*2*3 = 12
  CHECK(instrument::flops_estimate(hand, q) == 70);
  q.attnreal = true;
  CHECK(instrument::flops_estimate(hand, q) == 76);
  hand.feedforward = true;
  q.attnreal = false;
  CHECK(instrument::flops_estimate(hand, q) == 134);

  const model::ModelConfig def;
  FlopQuery off;
  off.context_len = 512;
  FlopQuery on = off;
  on.attnreal = true;
  const double ratio = double(instrument::flops_estimate(def, on)) / double(instrument::flops_estimate(def, off));
  CHECK(ratio <= 1.03);
  CHECK(ratio > 1.0);
  FlopQuery beam = off;
  beam.mode = FlopMode::kBeam;
  beam.beam_width = 5;
  CHECK(instrument::flops_estimate(def, beam) == 5 * instrument::flops_estimate(def, off));
  FlopQuery vcd = off;
  vcd.mode = FlopMode::kContrastive;
  CHECK(instrument::flops_estimate(def, vcd) == 2 * instrument::flops_estimate(def, off));

  auto base = instrument::flops_estimate(def, on);
  for (int field = 0; field < 5; ++field) {
    auto c = def;
    auto qq = on;
    switch (field) {
      case 0: c.n_layers += 1; break;
      case 1: c.n_heads = 4; break;
      case 2: c.d_model = 128; break;
      case 3: c.vocab_size += 1; break;
      case 4: qq.context_len += 1; break;
    }
    CHECK(instrument::flops_estimate(c, qq) > base);
  }
  CHECK(instrument::parse_flop_mode("contrastive") == FlopMode::kContrastive);
  CHECK_THROWS_AS(instrument::parse_flop_mode("dola"), InvalidParameterError);
}

TEST_CASE("csv writers and number formatting") {
  CHECK(instrument::format_real(0.1) == "0.1");
  CHECK(instrument::format_real(1.0) == "1");
  CHECK(std::stod(instrument::format_real(1.0 / 3)) == 1.0 / 3);
  std::ostringstream m;
  instrument::MassRecord r;
  r.step = 3;
  r.mass = {0.25, 0.5, 0.125, 0.125};
  instrument::write_mass_csv(m, std::vector{r});
  CHECK(m.str() == "step,mass_s,mass_v,mass_i,mass_o\n3,0.25,0.5,0.125,0.125\n");
  std::ostringstream f;
  instrument::write_flops_csv(f, "abc", std::vector<instrument::FlopEntry>{{"greedy", 10}});
  CHECK(f.str() == "config_hash,mode,flops_per_token\nabc,greedy,10\n");
}
