#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "atr/errors.hpp"
#include "atr/metrics/metrics.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace atr;
using metrics::CaptionRecord;
using metrics::ObjectLexicon;

namespace {

ObjectLexicon fixture_lexicon() {
  return ObjectLexicon({{"car", {"cars", "automobile"}, false},
                        {"dog", {"dogs"}, false},
                        {"person", {"people", "man"}, true},
                        {"cat", {"cats"}, false},
                        {"traffic light", {"traffic lights"}, false},
                        {"light", {"lights"}, false}});
}

std::vector<CaptionRecord> two_records(const ObjectLexicon& lex) {
  CaptionRecord r1{"r1", {lex.require("car"), lex.require("dog"), lex.require("person")},
                   {lex.require("car"), lex.require("dog")}};
  CaptionRecord r2{"r2", {lex.require("cat")}, {lex.require("cat")}};
  return {r1, r2};
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string w;
  for (char c : s) {
    if (c == ' ') {
      if (!w.empty()) out.push_back(w);
      w.clear();
    } else {
      w += c;
    }
  }
  if (!w.empty()) out.push_back(w);
  return out;
}

}  // namespace

TEST_CASE("lexicon: synonyms, case and injectivity") {
  const auto lex = fixture_lexicon();
  CHECK(lex.find("Automobile") == lex.find("car"));
  CHECK(lex.find("traffic LIGHTS") == lex.find("traffic light"));
  CHECK_FALSE(lex.find("bus").has_value());
  CHECK_THROWS_AS(lex.require("bus"), InvalidRecordError);
  CHECK(lex.targets() == metrics::ClassSet{2});
  CHECK(lex.max_phrase_words() == 2);
  CHECK_THROWS_AS(ObjectLexicon({{"car", {"ride"}, false}, {"bike", {"ride"}, false}}), InvalidParameterError);
  CHECK_THROWS_AS(ObjectLexicon({{"car", {}, false}, {"auto", {"CAR"}, false}}), InvalidParameterError);
}

TEST_CASE("lexicon: json round trip") {
  const auto lex = fixture_lexicon();
  const auto back = metrics::lexicon_from_json(metrics::lexicon_to_json(lex));
  REQUIRE(back.size() == lex.size());
  for (std::size_t c = 0; c < lex.size(); ++c) {
    CHECK(back.name(c) == lex.name(c));
    CHECK(back.is_target(c) == lex.is_target(c));
    CHECK(back.classes()[c].synonyms == lex.classes()[c].synonyms);
  }
  CHECK_THROWS_AS(metrics::lexicon_from_json(nlohmann::json{{"classes", 3}}), ParseError);
}

TEST_CASE("extract_objects") {
  const auto lex = fixture_lexicon();
  CHECK(metrics::extract_objects(words("a car near a car"), lex) == metrics::ClassSet{0});
  CHECK(metrics::extract_objects(words("the automobile stopped"), lex) == metrics::ClassSet{0});
  CHECK(metrics::extract_objects({}, lex).empty());
  // longest match wins: "traffic light" is not also a "light"
  CHECK(metrics::extract_objects(words("a Traffic Light and two dogs"), lex) == metrics::ClassSet{1, 4});
  CHECK(metrics::extract_objects(words("lights"), lex) == metrics::ClassSet{5});
}

TEST_CASE("hand fixture") {
  const auto lex = fixture_lexicon();
  const auto recs = two_records(lex);
  const auto chair = metrics::chair_metrics(recs);
  CHECK(chair.chair_i == 0.25);
  CHECK(chair.chair_s == 0.5);
  const auto f1 = metrics::f1_score(recs);
  CHECK(f1.precision == 0.75);
  CHECK(f1.recall == 1.0);
  CHECK(std::abs(f1.f1 - 6.0 / 7.0) <= 1e-15);
  const auto amber = metrics::amber_metrics(recs, lex);
  CHECK(std::abs(amber.chair - 1.0 / 6.0) <= 1e-15);
  CHECK(amber.cover == 1.0);
  CHECK(amber.hal == 0.5);
  CHECK(amber.cog == 0.25);
}

TEST_CASE("perfect and disjoint records") {
  const auto lex = fixture_lexicon();
  std::vector<CaptionRecord> perfect{{"a", {0, 1}, {0, 1}}, {"b", {3}, {3}}};
  const auto s = metrics::evaluate(perfect, lex);
  CHECK(s.chair_s == 0);
  CHECK(s.chair_i == 0);
  CHECK(s.f1 == 1);
  CHECK(s.amber_chair == 0);
  CHECK(s.cover == 1);
  CHECK(s.hal == 0);
  CHECK(s.cog == 0);
  std::vector<CaptionRecord> disjoint{{"a", {0}, {1}}, {"b", {2}, {3}}};
  const auto f = metrics::f1_score(disjoint);
  CHECK(f.precision == 0);
  CHECK(f.recall == 0);
  CHECK(f.f1 == 0);
  std::vector<CaptionRecord> silent{{"a", {}, {1}}};
  CHECK(metrics::chair_metrics(silent).chair_i == 0);
  CHECK(metrics::amber_metrics(silent, lex).chair == 0);
}

TEST_CASE("errors") {
  const auto lex = fixture_lexicon();
  std::vector<CaptionRecord> none;
  CHECK_THROWS_AS(metrics::chair_metrics(none), EmptyInputError);
  CHECK_THROWS_AS(metrics::f1_score(none), EmptyInputError);
  CHECK_THROWS_AS(metrics::amber_metrics(none, lex), EmptyInputError);
  std::vector<CaptionRecord> no_gt{{"a", {0}, {}}};
  CHECK_THROWS_AS(metrics::amber_metrics(no_gt, lex), InvalidRecordError);
}

TEST_CASE("metrics equal the brute-force oracle on random record sets") {
  const auto lex = fixture_lexicon();
  std::vector<bool> targets(lex.size());
  for (std::size_t c = 0; c < lex.size(); ++c) targets[c] = lex.is_target(c);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto recs = oracle::random_records(rng, 1 + rng() % 12, lex.size());
    const auto want = oracle::brute_metrics(oracle::to_masks(recs, lex.size()), targets);
    const auto got = metrics::evaluate(recs, lex);
    REQUIRE(got.chair_s == want.chair_s);
    REQUIRE(got.chair_i == want.chair_i);
    REQUIRE(got.precision == want.precision);
    REQUIRE(got.recall == want.recall);
    REQUIRE(got.f1 == want.f1);
    REQUIRE(got.amber_chair == want.amber_chair);
    REQUIRE(got.cover == want.cover);
    REQUIRE(got.hal == want.hal);
    REQUIRE(got.cog == want.cog);
    REQUIRE(got.records == recs.size());
  }
}

TEST_CASE("properties: chair_i = 1 - precision, permutation invariance, adding a perfect record") {
  const auto lex = fixture_lexicon();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    auto recs = oracle::random_records(rng, 2 + rng() % 10, lex.size());
    const auto base = metrics::evaluate(recs, lex);
    std::size_t mentions = 0;
    for (const auto& r : recs) mentions += r.mentioned.size();
    if (mentions > 0) REQUIRE(std::abs(base.chair_i - (1.0 - base.precision)) <= 1e-15);

    auto shuffled = recs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto perm = metrics::evaluate(shuffled, lex);
    REQUIRE(perm.chair_s == base.chair_s);
    REQUIRE(perm.chair_i == base.chair_i);
    REQUIRE(perm.f1 == base.f1);
    REQUIRE(perm.hal == base.hal);
    REQUIRE(perm.cog == base.cog);
    REQUIRE(std::abs(perm.amber_chair - base.amber_chair) <= 1e-15);
    REQUIRE(std::abs(perm.cover - base.cover) <= 1e-15);

    auto more = recs;
    more.push_back({"perfect", recs[0].ground_truth, recs[0].ground_truth});
    const auto after = metrics::evaluate(more, lex);
    REQUIRE(after.chair_s <= base.chair_s);
    REQUIRE(after.chair_i <= base.chair_i);
    REQUIRE(after.hal <= base.hal);
  }
}

TEST_CASE("records file and summary serialization") {
  const auto lex = fixture_lexicon();
  const auto dir = std::filesystem::temp_directory_path() / "atr_test_metrics";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "records.jsonl");
    out << R"({"id":"r1","caption":["a","car","a","dog","and","a","man"],"gt":["car","dog"]})" << '\n';
    out << '\n';
    out << R"({"id":"r2","mentioned":["cats"],"gt":["cat"]})" << '\n';
  }
  const auto recs = metrics::load_records(dir / "records.jsonl", lex);
  REQUIRE(recs.size() == 2);
  const auto s = metrics::evaluate(recs, lex);
  CHECK(s.chair_i == 0.25);
  const auto j = metrics::summary_to_json(s);
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("chair_s") == 0.5);
  CHECK(metrics::summary_csv_header().rfind("records,", 0) == 0);

  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"id":"r1","gt":["car"]})" << '\n';
  }
  CHECK_THROWS_AS(metrics::load_records(dir / "bad.jsonl", lex), ParseError);
  {
    std::ofstream out(dir / "unknown.jsonl");
    out << R"({"id":"r1","mentioned":["bus"],"gt":["car"]})" << '\n';
  }
  CHECK_THROWS_AS(metrics::load_records(dir / "unknown.jsonl", lex), InvalidRecordError);
  {
    std::ofstream out(dir / "broken.jsonl");
    out << "{not json\n";
  }
  CHECK_THROWS_AS(metrics::load_records(dir / "broken.jsonl", lex), ParseError);
}
