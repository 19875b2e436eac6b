#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace atr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr int kSchemaVersion = 1;

struct SynthOptions {
  std::uint64_t seed = 0;
  std::string kind = "grounded";  // grounded | random
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 64;
  std::size_t vocab = 64;
  std::size_t max_seq_len = 1024;
  bool feedforward = true;
  std::string precision = "f64";
  std::size_t scenes = 10;
  std::size_t objects = 3;
  std::size_t visual_tokens = 8;
  double noise = 0.03;
  double prior_strength = 0.25;
  double sink_gain = 1.5;
  std::filesystem::path out;
};

struct DecodeOptions {
  double alpha = 1.0;
  double threshold = 1.0;
  std::vector<std::size_t> layers_applied;
  bool pooled_heads = false;
  std::string strategy = "greedy";
  std::size_t beams = 5;
  double top_p = 0.9;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_new_tokens = 512;
  std::uint64_t eos = 1;
  bool no_eos = false;
};

struct InputOptions {
  std::filesystem::path model;
  std::filesystem::path corpus;
  std::filesystem::path lexicon;  // default: lexicon.json beside the corpus
};

struct GenerateOptions {
  InputOptions in;
  DecodeOptions decode;
  std::filesystem::path out;
  std::optional<std::filesystem::path> trace_dir;
};

struct EvalOptions {
  std::filesystem::path generations;
  std::filesystem::path lexicon;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> csv;
};

struct SweepOptions {
  InputOptions in;
  DecodeOptions decode;
  std::vector<double> alphas;
  std::vector<double> thresholds;
  std::size_t flops_context = 512;
  std::filesystem::path out;
};

struct StatsOptions {
  InputOptions in;
  DecodeOptions decode;
  std::string scene;  // id or index; default first scene
  std::size_t steps = 64;
  bool stop_at_eos = false;  // by default every traced step is generated
  std::vector<double> sweep_alphas{1.0, 0.7, 0.4};
  std::vector<std::uint64_t> watch;  // default: ground-truth object tokens
  std::size_t sweep_prefix = 2;
  std::size_t flops_context = 512;
  bool pca = true;
  std::filesystem::path out;
};

int cmd_synth(const SynthOptions& o, std::ostream& out);
int cmd_generate(const GenerateOptions& o, std::ostream& out);
int cmd_eval(const EvalOptions& o, std::ostream& out);
int cmd_sweep(const SweepOptions& o, std::ostream& out);
int cmd_stats(const StatsOptions& o, std::ostream& out);

// Parses argv, dispatches, and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace atr::cli
