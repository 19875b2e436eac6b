#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "atr/metrics/lexicon.hpp"

namespace atr::metrics {

using ClassSet = std::set<std::size_t>;

struct CaptionRecord {
  std::string id;
  ClassSet mentioned;
  ClassSet ground_truth;
};

struct ChairScores {
  double chair_s = 0.0;
  double chair_i = 0.0;
};

struct F1Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct AmberScores {
  double chair = 0.0;
  double cover = 0.0;
  double hal = 0.0;
  double cog = 0.0;
};

struct EvalSummary {
  double chair_s = 0.0;
  double chair_i = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double amber_chair = 0.0;
  double cover = 0.0;
  double hal = 0.0;
  double cog = 0.0;
  std::size_t records = 0;
};

// Longest-match object extraction over a word sequence, deduplicated.
ClassSet extract_objects(const std::vector<std::string>& words, const ObjectLexicon& lexicon);

// Pooled over mentions: chair_i = sum|M\G| / sum|M|; chair_s = share of records with M\G nonempty.
ChairScores chair_metrics(std::span<const CaptionRecord> records);
// Micro-averaged precision / recall / F1.
F1Scores f1_score(std::span<const CaptionRecord> records);
// Per-record means for chair and cover; hal is the share of records with chair > 0;
// cog = sum|(M\G) & targets| / sum|M|. Every record needs a nonempty ground truth.
AmberScores amber_metrics(std::span<const CaptionRecord> records, const ObjectLexicon& lexicon);

EvalSummary evaluate(std::span<const CaptionRecord> records, const ObjectLexicon& lexicon);

nlohmann::json summary_to_json(const EvalSummary& s);
std::string summary_csv_header();
std::string summary_csv_row(const EvalSummary& s);

// JSON lines: {"id", "caption":[words] | "mentioned":[classes], "gt":[classes]}.
std::vector<CaptionRecord> load_records(const std::filesystem::path& path, const ObjectLexicon& lexicon);
CaptionRecord record_from_json(const nlohmann::json& j, const ObjectLexicon& lexicon);

}  // namespace atr::metrics
