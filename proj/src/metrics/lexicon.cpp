#include "atr/metrics/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "atr/errors.hpp"

namespace atr::metrics {
namespace {

// Lowercases and collapses runs of whitespace to single spaces.
std::string normalize_phrase(const std::string& phrase, std::size_t* words = nullptr) {
  std::istringstream in(to_lower(phrase));
  std::string word;
  std::string out;
  std::size_t count = 0;
  while (in >> word) {
    if (!out.empty()) out.push_back(' ');
    out += word;
    ++count;
  }
  if (words != nullptr) *words = count;
  return out;
}

}  // namespace

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

ObjectLexicon::ObjectLexicon(std::vector<ObjectClass> classes) : classes_(std::move(classes)) {
  for (std::size_t cls = 0; cls < classes_.size(); ++cls) {
    std::vector<std::string> phrases = classes_[cls].synonyms;
    phrases.insert(phrases.begin(), classes_[cls].name);
    for (const auto& raw : phrases) {
      std::size_t words = 0;
      const std::string key = normalize_phrase(raw, &words);
      if (key.empty()) throw InvalidParameterError("empty synonym in class '" + classes_[cls].name + "'");
      auto [it, inserted] = index_.emplace(key, cls);
      if (!inserted && it->second != cls) {
        throw InvalidParameterError("synonym '" + key + "' maps to both '" + classes_[it->second].name + "' and '" +
                                    classes_[cls].name + "'");
      }
      max_words_ = std::max(max_words_, words);
    }
  }
}

std::set<std::size_t> ObjectLexicon::targets() const {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].is_target) out.insert(i);
  }
  return out;
}

std::optional<std::size_t> ObjectLexicon::find(const std::string& phrase) const {
  auto it = index_.find(normalize_phrase(phrase));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ObjectLexicon::require(const std::string& phrase) const {
  auto cls = find(phrase);
  if (!cls) throw InvalidRecordError("unknown object class '" + phrase + "'");
  return *cls;
}

nlohmann::json lexicon_to_json(const ObjectLexicon& lexicon) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : lexicon.classes()) {
    classes.push_back({{"name", c.name}, {"synonyms", c.synonyms}, {"is_target", c.is_target}});
  }
  return {{"schema_version", 1}, {"classes", classes}};
}

ObjectLexicon lexicon_from_json(const nlohmann::json& j) {
  std::vector<ObjectClass> classes;
  try {
    for (const auto& c : j.at("classes")) {
      ObjectClass oc;
      oc.name = c.at("name").get<std::string>();
      oc.synonyms = c.value("synonyms", std::vector<std::string>{});
      oc.is_target = c.value("is_target", false);
      classes.push_back(std::move(oc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
  try {
    return ObjectLexicon(std::move(classes));
  } catch (const InvalidParameterError& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
}

ObjectLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open lexicon '" + path.string() + "'");
  try {
    return lexicon_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("lexicon '" + path.string() + "': " + e.what());
  }
}

void save_lexicon(const ObjectLexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError("cannot write lexicon '" + path.string() + "'");
  out << lexicon_to_json(lexicon).dump(2) << '\n';
}

}  // namespace atr::metrics
