#include "atr/metrics/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "atr/errors.hpp"

namespace atr::metrics {
namespace {

std::size_t intersection_size(const ClassSet& a, const ClassSet& b) {
  std::size_t n = 0;
  for (std::size_t x : a) n += b.count(x);
  return n;
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void require_records(std::span<const CaptionRecord> records, const char* what) {
  if (records.empty()) throw EmptyInputError(std::string(what) + ": no records");
}

}  // namespace

ClassSet extract_objects(const std::vector<std::string>& words, const ObjectLexicon& lexicon) {
  ClassSet found;
  const std::size_t longest = lexicon.max_phrase_words();
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(longest, words.size() - i); len >= 1; --len) {
      std::string phrase = words[i];
      for (std::size_t k = 1; k < len; ++k) phrase += " " + words[i + k];
      if (auto cls = lexicon.find(phrase)) {
        found.insert(*cls);
        matched = len;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return found;
}

ChairScores chair_metrics(std::span<const CaptionRecord> records) {
  require_records(records, "chair_metrics");
  std::size_t hallucinated = 0;
  std::size_t mentioned = 0;
  std::size_t bad_captions = 0;
  for (const auto& r : records) {
    const std::size_t h = r.mentioned.size() - intersection_size(r.mentioned, r.ground_truth);
    hallucinated += h;
    mentioned += r.mentioned.size();
    if (h > 0) ++bad_captions;
  }
  ChairScores s;
  s.chair_i = ratio(static_cast<double>(hallucinated), static_cast<double>(mentioned));
  s.chair_s = static_cast<double>(bad_captions) / static_cast<double>(records.size());
  return s;
}

F1Scores f1_score(std::span<const CaptionRecord> records) {
  require_records(records, "f1_score");
  std::size_t correct = 0;
  std::size_t mentioned = 0;
  std::size_t truth = 0;
  for (const auto& r : records) {
    correct += intersection_size(r.mentioned, r.ground_truth);
    mentioned += r.mentioned.size();
    truth += r.ground_truth.size();
  }
  F1Scores s;
  s.precision = ratio(static_cast<double>(correct), static_cast<double>(mentioned));
  s.recall = ratio(static_cast<double>(correct), static_cast<double>(truth));
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

AmberScores amber_metrics(std::span<const CaptionRecord> records, const ObjectLexicon& lexicon) {
  require_records(records, "amber_metrics");
  const ClassSet targets = lexicon.targets();
  double chair_sum = 0.0;
  double cover_sum = 0.0;
  std::size_t hallucinating = 0;
  std::size_t target_hits = 0;
  std::size_t mentioned = 0;
  for (const auto& r : records) {
    if (r.ground_truth.empty()) throw InvalidRecordError("record '" + r.id + "' has an empty ground truth");
    const std::size_t correct = intersection_size(r.mentioned, r.ground_truth);
    const double chair = r.mentioned.empty()
                             ? 0.0
                             : 1.0 - static_cast<double>(correct) / static_cast<double>(r.mentioned.size());
    chair_sum += chair;
    cover_sum += static_cast<double>(correct) / static_cast<double>(r.ground_truth.size());
    if (chair > 0.0) ++hallucinating;
    for (std::size_t c : r.mentioned) {
      if (!r.ground_truth.count(c) && targets.count(c)) ++target_hits;
    }
    mentioned += r.mentioned.size();
  }
  const double n = static_cast<double>(records.size());
  AmberScores s;
  s.chair = chair_sum / n;
  s.cover = cover_sum / n;
  s.hal = static_cast<double>(hallucinating) / n;
  s.cog = ratio(static_cast<double>(target_hits), static_cast<double>(mentioned));
  return s;
}

EvalSummary evaluate(std::span<const CaptionRecord> records, const ObjectLexicon& lexicon) {
  const auto chair = chair_metrics(records);
  const auto f1 = f1_score(records);
  const auto amber = amber_metrics(records, lexicon);
  EvalSummary s;
  s.chair_s = chair.chair_s;
  s.chair_i = chair.chair_i;
  s.precision = f1.precision;
  s.recall = f1.recall;
  s.f1 = f1.f1;
  s.amber_chair = amber.chair;
  s.cover = amber.cover;
  s.hal = amber.hal;
  s.cog = amber.cog;
  s.records = records.size();
  return s;
}

nlohmann::json summary_to_json(const EvalSummary& s) {
  return {{"schema_version", 1}, {"records", s.records},   {"chair_s", s.chair_s},
          {"chair_i", s.chair_i}, {"precision", s.precision}, {"recall", s.recall},
          {"f1", s.f1},           {"amber_chair", s.amber_chair}, {"cover", s.cover},
          {"hal", s.hal},         {"cog", s.cog}};
}

std::string summary_csv_header() { return "records,chair_s,chair_i,precision,recall,f1,amber_chair,cover,hal,cog"; }

std::string summary_csv_row(const EvalSummary& s) {
  std::ostringstream out;
  out << std::setprecision(17) << s.records << ',' << s.chair_s << ',' << s.chair_i << ',' << s.precision << ','
      << s.recall << ',' << s.f1 << ',' << s.amber_chair << ',' << s.cover << ',' << s.hal << ',' << s.cog;
  return out.str();
}

CaptionRecord record_from_json(const nlohmann::json& j, const ObjectLexicon& lexicon) {
  CaptionRecord r;
  try {
    const auto& id = j.at("id");
    r.id = id.is_string() ? id.get<std::string>() : id.dump();
    if (j.contains("caption")) {
      r.mentioned = extract_objects(j.at("caption").get<std::vector<std::string>>(), lexicon);
    } else if (j.contains("mentioned")) {
      for (const auto& c : j.at("mentioned").get<std::vector<std::string>>()) r.mentioned.insert(lexicon.require(c));
    } else {
      throw ParseError("record needs either 'caption' or 'mentioned'");
    }
    for (const auto& c : j.at("gt").get<std::vector<std::string>>()) r.ground_truth.insert(lexicon.require(c));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("record: ") + e.what());
  }
  return r;
}

std::vector<CaptionRecord> load_records(const std::filesystem::path& path, const ObjectLexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open records '" + path.string() + "'");
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line), lexicon));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace atr::metrics
