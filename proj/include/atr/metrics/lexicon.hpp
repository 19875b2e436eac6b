#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace atr::metrics {

struct ObjectClass {
  std::string name;
  std::vector<std::string> synonyms;  // the canonical name is always matched as well
  bool is_target = false;             // member of the hallucination-target subset
};

// Object vocabulary with a synonym -> class index. Matching is case-insensitive
// and a synonym may span several words ("traffic light").
class ObjectLexicon {
 public:
  ObjectLexicon() = default;
  // Throws InvalidParameterError when a synonym maps to two classes.
  explicit ObjectLexicon(std::vector<ObjectClass> classes);

  std::size_t size() const { return classes_.size(); }
  const std::vector<ObjectClass>& classes() const { return classes_; }
  const std::string& name(std::size_t cls) const { return classes_.at(cls).name; }
  bool is_target(std::size_t cls) const { return classes_.at(cls).is_target; }
  std::set<std::size_t> targets() const;

  // Class whose name or synonym equals `phrase` (case-insensitive).
  std::optional<std::size_t> find(const std::string& phrase) const;
  // Like find(), but throws InvalidRecordError for unknown phrases.
  std::size_t require(const std::string& phrase) const;

  std::size_t max_phrase_words() const { return max_words_; }

 private:
  std::vector<ObjectClass> classes_;
  std::map<std::string, std::size_t> index_;
  std::size_t max_words_ = 0;
};

std::string to_lower(std::string s);

// {"schema_version":1,"classes":[{"name":..,"synonyms":[..],"is_target":..}]}
nlohmann::json lexicon_to_json(const ObjectLexicon& lexicon);
ObjectLexicon lexicon_from_json(const nlohmann::json& j);
ObjectLexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const ObjectLexicon& lexicon, const std::filesystem::path& path);

}  // namespace atr::metrics
