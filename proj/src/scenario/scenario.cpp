#include "atr/scenario/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "atr/errors.hpp"
#include "atr/numkit/random_stream.hpp"

namespace atr::scenario {

std::optional<std::size_t> VocabLayout::class_of(TokenId token) const {
  if (token >= kFirstObject && token < kFirstObject + n_classes) return token - kFirstObject;
  return std::nullopt;
}

std::string VocabLayout::word(TokenId token, const metrics::ObjectLexicon& lexicon) const {
  if (auto cls = class_of(token)) return lexicon.name(*cls);
  switch (token) {
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    case kImage: return "<image>";
    case kDescribe: return "describe";
    case kImageWord: return "image";
    default: return "<unk:" + std::to_string(token) + ">";
  }
}

model::Prompt Scene::prompt() const {
  model::Prompt out;
  out.reserve(prompt_tokens.size());
  for (std::size_t i = 0; i < prompt_tokens.size(); ++i) {
    if (i >= map.s_end && i < map.v_end) {
      auto row = visual_embeddings.row(i - map.s_end);
      out.emplace_back(prompt_tokens[i], std::vector<double>(row.begin(), row.end()));
    } else {
      out.emplace_back(prompt_tokens[i]);
    }
  }
  return out;
}

std::vector<double> class_anchor(std::size_t cls, std::size_t n_classes, std::size_t d_model) {
  std::vector<double> v(d_model, 0.0);
  v[FeatureLayout{n_classes}.visual(cls)] = 1.0;
  return v;
}

std::vector<Scene> build_scenes(std::uint64_t seed, const metrics::ObjectLexicon& lexicon, const SceneOptions& options,
                                std::size_t d_model) {
  const std::size_t n_classes = lexicon.size();
  const FeatureLayout features{n_classes};
  if (options.objects_per_scene > n_classes) {
    throw InvalidParameterError("objects per scene (" + std::to_string(options.objects_per_scene) +
                                ") exceeds lexicon size (" + std::to_string(n_classes) + ")");
  }
  if (options.objects_per_scene > options.visual_tokens) {
    throw InvalidParameterError("objects per scene exceeds the number of visual tokens");
  }
  if (d_model < features.min_d_model()) {
    throw InvalidParameterError("d_model " + std::to_string(d_model) + " cannot hold " + std::to_string(n_classes) +
                                " classes (need " + std::to_string(features.min_d_model()) + ")");
  }

  numkit::RandomStream root(seed);
  std::vector<Scene> scenes;
  scenes.reserve(options.count);
  for (std::size_t s = 0; s < options.count; ++s) {
    numkit::RandomStream stream = root.split(s);
    Scene scene;
    char id[32];
    std::snprintf(id, sizeof id, "scene-%04zu", s);
    scene.id = id;

    std::vector<std::size_t> pool(n_classes);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < options.objects_per_scene; ++i) {
      const std::size_t j = i + stream.below(n_classes - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> objects(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(options.objects_per_scene));

    scene.visual_embeddings = numkit::Matrix(options.visual_tokens, d_model);
    for (std::size_t t = 0; t < options.visual_tokens; ++t) {
      auto row = scene.visual_embeddings.row(t);
      row[features.bias()] = 1.0;
      row[features.flag_visual()] = 1.0;
      if (t < objects.size()) row[features.visual(objects[t])] += 1.0;
      for (std::size_t c = 0; c < n_classes; ++c) row[features.visual(c)] += options.noise * stream.normal();
    }
    scene.ground_truth = objects;
    std::sort(scene.ground_truth.begin(), scene.ground_truth.end());

    scene.prompt_tokens.push_back(VocabLayout::kBos);
    scene.prompt_tokens.insert(scene.prompt_tokens.end(), options.visual_tokens, VocabLayout::kImage);
    scene.prompt_tokens.push_back(VocabLayout::kDescribe);
    scene.prompt_tokens.push_back(VocabLayout::kImageWord);
    scene.map = TokenTypeMap{1, 1 + options.visual_tokens, 3 + options.visual_tokens};
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<double> zipf_prior(std::size_t n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += p[i] = 1.0 / static_cast<double>(i + 1);
  for (double& x : p) x /= total;
  return p;
}

void BiasSpec::validate(std::size_t n_classes) const {
  if (!(prior_strength >= 0.0)) throw InvalidParameterError("prior strength must be >= 0");
  if (!(sink_gain >= 0.0)) throw InvalidParameterError("sink gain must be >= 0");
  if (!prior.empty()) {
    if (prior.size() != n_classes) throw InvalidParameterError("prior length must match the lexicon");
    double total = 0.0;
    for (double p : prior) {
      if (!(p >= 0.0)) throw InvalidParameterError("prior entries must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidParameterError("prior must sum to 1");
  }
}

std::vector<double> BiasSpec::resolved_prior(std::size_t n_classes) const {
  return prior.empty() ? zipf_prior(n_classes) : prior;
}

model::ModelWeights build_grounded_model(std::uint64_t seed, const metrics::ObjectLexicon& lexicon,
                                         model::ModelConfig config, const BiasSpec& bias,
                                         const GroundedParams& params) {
  const std::size_t n_classes = lexicon.size();
  const FeatureLayout f{n_classes};
  const VocabLayout vocab{n_classes};
  bias.validate(n_classes);
  config.validate();
  if (config.d_model < f.min_d_model()) {
    throw InvalidParameterError("d_model " + std::to_string(config.d_model) + " too small for " +
                                std::to_string(n_classes) + " classes (need " + std::to_string(f.min_d_model()) + ")");
  }
  const std::size_t dk = config.d_head();
  if (dk < std::max<std::size_t>(n_classes, 4)) {
    throw InvalidParameterError("head width " + std::to_string(dk) + " too small for " + std::to_string(n_classes) +
                                " classes");
  }
  if (config.vocab_size < vocab.min_vocab()) {
    throw InvalidParameterError("vocab_size " + std::to_string(config.vocab_size) + " too small (need " +
                                std::to_string(vocab.min_vocab()) + ")");
  }
  config.position_scale = 0.0;

  model::ModelWeights w = model::ModelWeights::zeros(config);
  const std::vector<double> prior = bias.resolved_prior(n_classes);

  auto& emb = w.token_embedding;
  for (TokenId t = 0; t < config.vocab_size; ++t) emb(t, f.bias()) = 1.0;
  emb(VocabLayout::kBos, f.flag_system()) = 1.0;
  emb(VocabLayout::kImage, f.flag_visual()) = 1.0;
  emb(VocabLayout::kDescribe, f.flag_instruction()) = 1.0;
  emb(VocabLayout::kImageWord, f.flag_instruction()) = 1.0;
  emb(VocabLayout::kEos, f.flag_output()) = 1.0;
  for (TokenId t = vocab.min_vocab(); t < config.vocab_size; ++t) emb(t, f.flag_output()) = 1.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    emb(vocab.object_token(c), f.flag_output()) = 1.0;
    emb(vocab.object_token(c), f.word(c)) = 1.0;
  }
  // Dimensions past the feature layout are read by no projection.
  numkit::RandomStream stream(seed);
  for (TokenId t = 0; t < config.vocab_size; ++t)
    for (std::size_t i = f.min_d_model(); i < config.d_model; ++i) emb(t, i) = 0.01 * stream.normal();

  const double root_dk = std::sqrt(static_cast<double>(dk));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    auto& layer = w.layers[l];
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const std::size_t o = h * dk;
      layer.wq(f.bias(), o + 0) = params.system_score * root_dk;
      layer.wq(f.bias(), o + 3) = root_dk;
      layer.wk(f.flag_system(), o + 0) = 1.0;
      layer.wk(f.flag_visual(), o + 1) = 1.0;
      layer.wk(f.flag_instruction(), o + 2) = 1.0;
      layer.wk(f.flag_output(), o + 3) = bias.sink_gain;
      if (l != 0) continue;
      for (std::size_t c = 0; c < n_classes; ++c) {
        layer.wv(f.visual(c), o + c) = 1.0;
        layer.wv(f.word(c), o + c) = -params.repeat_penalty;
        layer.wv(f.flag_output(), o + c) = bias.prior_strength * prior[c];
        layer.wo(o + c, f.visual(c)) = params.logit_scale / static_cast<double>(config.n_heads);
      }
    }
  }

  for (TokenId t = 0; t < config.vocab_size; ++t) w.vocab_head(f.bias(), t) = -params.logit_scale;
  w.vocab_head(f.bias(), VocabLayout::kEos) = params.logit_scale * params.eos_level;
  for (std::size_t c = 0; c < n_classes; ++c) {
    w.vocab_head(f.bias(), vocab.object_token(c)) = 0.0;
    w.vocab_head(f.visual(c), vocab.object_token(c)) = 1.0;
  }
  w.validate();
  return w;
}

metrics::ObjectLexicon default_lexicon() {
  return metrics::ObjectLexicon({
      {"person", {"people", "persons", "man", "men", "woman", "women"}, true},
      {"car", {"cars", "automobile", "automobiles"}, false},
      {"chair", {"chairs"}, true},
      {"dog", {"dogs", "puppy"}, false},
      {"bottle", {"bottles"}, false},
      {"cup", {"cups", "mug"}, false},
      {"bicycle", {"bicycles", "bike", "bikes"}, false},
      {"bench", {"benches"}, false},
  });
}

std::vector<std::string> caption_words(const std::vector<TokenId>& tokens, const metrics::ObjectLexicon& lexicon) {
  const VocabLayout vocab{lexicon.size()};
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (TokenId t : tokens) words.push_back(vocab.word(t, lexicon));
  return words;
}

metrics::CaptionRecord caption_record(const Scene& scene, const std::vector<TokenId>& tokens,
                                      const metrics::ObjectLexicon& lexicon) {
  metrics::CaptionRecord r;
  r.id = scene.id;
  r.mentioned = metrics::extract_objects(caption_words(tokens, lexicon), lexicon);
  r.ground_truth.insert(scene.ground_truth.begin(), scene.ground_truth.end());
  return r;
}

nlohmann::json scene_to_json(const Scene& scene, const metrics::ObjectLexicon& lexicon) {
  nlohmann::json gt = nlohmann::json::array();
  for (std::size_t c : scene.ground_truth) gt.push_back(lexicon.name(c));
  nlohmann::json visual = nlohmann::json::array();
  for (std::size_t r = 0; r < scene.visual_embeddings.rows(); ++r) {
    auto row = scene.visual_embeddings.row(r);
    visual.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"schema_version", 1},
          {"id", scene.id},
          {"prompt_tokens", scene.prompt_tokens},
          {"type_ranges", {{"s_end", scene.map.s_end}, {"v_end", scene.map.v_end}, {"i_end", scene.map.i_end}}},
          {"gt", gt},
          {"visual_embeddings", visual}};
}

Scene scene_from_json(const nlohmann::json& j, const metrics::ObjectLexicon& lexicon) {
  Scene s;
  try {
    s.id = j.at("id").get<std::string>();
    s.prompt_tokens = j.at("prompt_tokens").get<std::vector<TokenId>>();
    const auto& r = j.at("type_ranges");
    s.map = TokenTypeMap{r.at("s_end").get<std::size_t>(), r.at("v_end").get<std::size_t>(),
                         r.at("i_end").get<std::size_t>()};
    for (const auto& name : j.at("gt").get<std::vector<std::string>>()) s.ground_truth.push_back(lexicon.require(name));
    std::sort(s.ground_truth.begin(), s.ground_truth.end());
    const auto rows = j.value("visual_embeddings", std::vector<std::vector<double>>{});
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    std::vector<double> flat;
    for (const auto& row : rows) {
      if (row.size() != cols) throw ParseError("ragged visual_embeddings in scene '" + s.id + "'");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    s.visual_embeddings = numkit::Matrix(rows.size(), cols, std::move(flat));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
  try {
    s.map.validate();
  } catch (const InvalidParameterError& e) {
    throw ParseError("scene '" + s.id + "': " + e.what());
  }
  if (s.map.i_end > s.prompt_tokens.size()) throw ParseError("scene '" + s.id + "': type ranges exceed the prompt");
  if (s.visual_embeddings.rows() != 0 && s.visual_embeddings.rows() != s.map.visual_count()) {
    throw ParseError("scene '" + s.id + "': visual_embeddings rows do not match the visual range");
  }
  return s;
}

void save_corpus(const std::vector<Scene>& scenes, const metrics::ObjectLexicon& lexicon,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError("cannot write corpus '" + path.string() + "'");
  for (const auto& s : scenes) out << scene_to_json(s, lexicon).dump() << '\n';
}

std::vector<Scene> load_corpus(const std::filesystem::path& path, const metrics::ObjectLexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open corpus '" + path.string() + "'");
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      scenes.push_back(scene_from_json(nlohmann::json::parse(line), lexicon));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace atr::scenario
