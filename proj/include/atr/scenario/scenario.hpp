#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atr/attnreal/token_types.hpp"
#include "atr/metrics/lexicon.hpp"
#include "atr/metrics/metrics.hpp"
#include "atr/model/transformer.hpp"
#include "atr/model/weights.hpp"

namespace atr::scenario {

using model::TokenId;

// Token ids shared by grounded models and scene prompts. Object words follow
// the special tokens in lexicon order.
struct VocabLayout {
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kImage = 2;
  static constexpr TokenId kDescribe = 3;
  static constexpr TokenId kImageWord = 4;
  static constexpr TokenId kFirstObject = 5;

  std::size_t n_classes = 0;

  std::size_t min_vocab() const { return kFirstObject + n_classes; }
  TokenId object_token(std::size_t cls) const { return kFirstObject + cls; }
  std::optional<std::size_t> class_of(TokenId token) const;
  std::string word(TokenId token, const metrics::ObjectLexicon& lexicon) const;
};

// Residual-stream feature assignment of the grounded model.
//   [0, C)        visual object features, also the logit read-out space
//   [C, 2C)       object-word identity
//   2C            constant bias
//   2C+1 .. 2C+4  token-kind flags: system, visual, instruction, output
struct FeatureLayout {
  std::size_t n_classes = 0;

  std::size_t visual(std::size_t cls) const { return cls; }
  std::size_t word(std::size_t cls) const { return n_classes + cls; }
  std::size_t bias() const { return 2 * n_classes; }
  std::size_t flag_system() const { return 2 * n_classes + 1; }
  std::size_t flag_visual() const { return 2 * n_classes + 2; }
  std::size_t flag_instruction() const { return 2 * n_classes + 3; }
  std::size_t flag_output() const { return 2 * n_classes + 4; }
  std::size_t min_d_model() const { return 2 * n_classes + 5; }
};

struct Scene {
  std::string id;
  std::vector<std::size_t> ground_truth;  // sorted class indices
  numkit::Matrix visual_embeddings;       // one d_model row per visual token
  std::vector<TokenId> prompt_tokens;
  TokenTypeMap map;

  model::Prompt prompt() const;
};

struct SceneOptions {
  std::size_t count = 10;
  std::size_t objects_per_scene = 3;  // k
  std::size_t visual_tokens = 8;
  double noise = 0.03;
};

// Deterministic per seed. Ground-truth sets are drawn without replacement;
// each object's visual token is its class anchor plus N(0, noise) jitter on the
// visual feature block; remaining visual tokens are jitter-only padding.
std::vector<Scene> build_scenes(std::uint64_t seed, const metrics::ObjectLexicon& lexicon, const SceneOptions& options,
                                std::size_t d_model);

// Unit anchor vector of a class in the residual stream.
std::vector<double> class_anchor(std::size_t cls, std::size_t n_classes, std::size_t d_model);

struct BiasSpec {
  double prior_strength = 0.25;  // beta
  std::vector<double> prior;     // over lexicon classes; empty selects zipf_prior
  double sink_gain = 1.5;        // gamma: attention score of output-token keys

  void validate(std::size_t n_classes) const;
  std::vector<double> resolved_prior(std::size_t n_classes) const;
};

// Remaining knobs of the construction; defaults are the documented scenario.
struct GroundedParams {
  double system_score = 0.5;    // attention score of the leading system token
  double repeat_penalty = 1.0;  // value pull away from already emitted objects
  double eos_level = 0.04;      // eos logit, in units of attention mass
  double logit_scale = 40.0;
};

std::vector<double> zipf_prior(std::size_t n);

// Hand-built model: visual values point at their class logits, output-token
// values point at the prior and away from themselves, and output keys score
// `sink_gain` so their attention share grows with the number emitted.
// Layers past the first share the attention pattern but carry no values.
// Position encoding is switched off.
model::ModelWeights build_grounded_model(std::uint64_t seed, const metrics::ObjectLexicon& lexicon,
                                         model::ModelConfig config, const BiasSpec& bias,
                                         const GroundedParams& params = {});

// Eight common object classes; "person" and "chair" form the target subset.
metrics::ObjectLexicon default_lexicon();

std::vector<std::string> caption_words(const std::vector<TokenId>& tokens, const metrics::ObjectLexicon& lexicon);

metrics::CaptionRecord caption_record(const Scene& scene, const std::vector<TokenId>& tokens,
                                      const metrics::ObjectLexicon& lexicon);

// Corpus: JSON lines {schema_version, id, prompt_tokens, type_ranges:{s_end,v_end,i_end},
// gt:[class names], visual_embeddings:[[...]]}.
nlohmann::json scene_to_json(const Scene& scene, const metrics::ObjectLexicon& lexicon);
Scene scene_from_json(const nlohmann::json& j, const metrics::ObjectLexicon& lexicon);
void save_corpus(const std::vector<Scene>& scenes, const metrics::ObjectLexicon& lexicon,
                 const std::filesystem::path& path);
std::vector<Scene> load_corpus(const std::filesystem::path& path, const metrics::ObjectLexicon& lexicon);

}  // namespace atr::scenario
