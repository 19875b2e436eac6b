#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "atr/decoding/decoding.hpp"
#include "atr/errors.hpp"
#include "atr/instrument/instrument.hpp"
#include "atr/metrics/metrics.hpp"
#include "atr/model/weight_file.hpp"
#include "atr/scenario/scenario.hpp"

namespace atr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FileError("cannot create directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write '" + path.string() + "'");
  return out;
}

struct Inputs {
  model::ModelWeights weights;
  metrics::ObjectLexicon lexicon;
  std::vector<scenario::Scene> scenes;
};

fs::path lexicon_path(const fs::path& explicit_path, const fs::path& corpus) {
  if (!explicit_path.empty()) return explicit_path;
  return corpus.parent_path() / "lexicon.json";
}

Inputs load_inputs(const InputOptions& o) {
  Inputs in{model::load_weights(o.model), metrics::load_lexicon(lexicon_path(o.lexicon, o.corpus)), {}};
  in.scenes = scenario::load_corpus(o.corpus, in.lexicon);
  if (in.scenes.empty()) throw InvalidRecordError("corpus '" + o.corpus.string() + "' holds no scenes");
  const auto& cfg = in.weights.config;
  for (const auto& s : in.scenes) {
    for (auto t : s.prompt_tokens) {
      if (t >= cfg.vocab_size) throw InvalidRecordError("scene '" + s.id + "': prompt token out of vocabulary");
    }
    if (s.visual_embeddings.rows() != 0 && s.visual_embeddings.cols() != cfg.d_model) {
      throw InvalidRecordError("scene '" + s.id + "': visual embeddings do not match d_model");
    }
  }
  return in;
}

decoding::DecodeConfig decode_config(const DecodeOptions& o) {
  decoding::DecodeConfig dc;
  dc.strategy = decoding::parse_strategy(o.strategy);
  dc.max_new_tokens = o.max_new_tokens;
  dc.beam_width = o.beams;
  dc.top_p = o.top_p;
  dc.temperature = o.temperature;
  dc.seed = o.seed;
  if (!o.no_eos) dc.eos_token = o.eos;
  dc.validate();
  return dc;
}

attnreal::AttnRealConfig attn_config(const DecodeOptions& o, double alpha, double threshold, std::size_t n_layers) {
  attnreal::AttnRealConfig ac;
  ac.alpha = alpha;
  ac.threshold = threshold;
  ac.layers = o.layers_applied;
  ac.per_head = !o.pooled_heads;
  ac.validate(n_layers);
  return ac;
}

decoding::GenerationResult run_scene(const Inputs& in, std::size_t index, decoding::DecodeConfig dc,
                                     const attnreal::AttnRealConfig& ac) {
  const auto& scene = in.scenes[index];
  if (dc.eos_token && *dc.eos_token >= in.weights.config.vocab_size) throw InvalidParameterError("eos token out of vocabulary");
  dc.stream_id = index;
  return decoding::generate(in.weights, scene.prompt(), scene.map, ac, dc);
}

std::vector<std::string> token_words(const std::vector<model::TokenId>& tokens, const metrics::ObjectLexicon& lex) {
  return scenario::caption_words(tokens, lex);
}

json generation_to_json(const scenario::Scene& scene, const decoding::GenerationResult& r,
                        const metrics::ObjectLexicon& lex) {
  std::vector<std::size_t> sinks;
  sinks.reserve(r.traces.size());
  for (const auto& t : r.traces) sinks.push_back(t.sink_count());
  return {{"schema_version", kSchemaVersion},
          {"id", scene.id},
          {"tokens", r.tokens},
          {"caption", token_words(r.tokens, lex)},
          {"finish", std::string(decoding::finish_reason_name(r.finish))},
          {"log_prob", r.log_prob},
          {"sink_counts", sinks}};
}

metrics::CaptionRecord scene_record(const scenario::Scene& scene, const decoding::GenerationResult& r,
                                    const metrics::ObjectLexicon& lex) {
  return scenario::caption_record(scene, r.tokens, lex);
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + instrument::format_real(v[i]);
  return s;
}

}  // namespace

// ---- synth ---------------------------------------------------------------

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  model::ModelConfig cfg;
  cfg.n_layers = o.layers;
  cfg.n_heads = o.heads;
  cfg.d_model = o.d_model;
  cfg.vocab_size = o.vocab;
  cfg.max_seq_len = o.max_seq_len;
  cfg.feedforward = o.feedforward;
  if (o.precision == "f64") {
    cfg.precision = model::Precision::kF64;
  } else if (o.precision == "f32") {
    cfg.precision = model::Precision::kF32;
  } else {
    throw InvalidParameterError("precision must be f64 or f32");
  }
  cfg.validate();

  const auto lexicon = scenario::default_lexicon();
  scenario::SceneOptions so;
  so.count = o.scenes;
  so.objects_per_scene = o.objects;
  so.visual_tokens = o.visual_tokens;
  so.noise = o.noise;
  if (!(o.noise >= 0.0)) throw InvalidParameterError("noise must be >= 0");

  model::ModelWeights weights;
  if (o.kind == "grounded") {
    scenario::BiasSpec bias;
    bias.prior_strength = o.prior_strength;
    bias.sink_gain = o.sink_gain;
    weights = scenario::build_grounded_model(o.seed, lexicon, cfg, bias);
  } else if (o.kind == "random") {
    weights = model::synthesize_model(o.seed, cfg);
  } else {
    throw InvalidParameterError("kind must be grounded or random");
  }
  const auto scenes = scenario::build_scenes(o.seed, lexicon, so, cfg.d_model);
  if (scenario::VocabLayout{lexicon.size()}.min_vocab() > cfg.vocab_size) {
    throw InvalidParameterError("vocab too small for the scene prompts");
  }

  ensure_dir(o.out);
  model::save_weights(weights, o.out / "model.atrw");
  scenario::save_corpus(scenes, lexicon, o.out / "corpus.jsonl");
  metrics::save_lexicon(lexicon, o.out / "lexicon.json");
  out << "config_hash " << model::config_hash(weights.config) << '\n';
  return kExitOk;
}

// ---- generate ------------------------------------------------------------

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  const Inputs in = load_inputs(o.in);
  const auto dc = decode_config(o.decode);
  const auto ac = attn_config(o.decode, o.decode.alpha, o.decode.threshold, in.weights.config.n_layers);
  if (o.trace_dir) ensure_dir(*o.trace_dir);

  auto file = open_out(o.out);
  std::size_t total = 0;
  for (std::size_t i = 0; i < in.scenes.size(); ++i) {
    const auto& scene = in.scenes[i];
    const auto r = run_scene(in, i, dc, ac);
    file << generation_to_json(scene, r, in.lexicon).dump() << '\n';
    total += r.tokens.size();
    if (o.trace_dir && !r.traces.empty()) {
      auto trace = open_out(*o.trace_dir / (scene.id + "_mass.csv"));
      instrument::write_mass_csv(trace, instrument::attention_mass_series(r.traces, scene.map));
    }
  }
  out << "scenes " << in.scenes.size() << " tokens " << total << '\n';
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto lexicon = metrics::load_lexicon(o.lexicon);
  std::map<std::string, metrics::ClassSet> gt_by_id;
  if (o.corpus) {
    for (const auto& s : scenario::load_corpus(*o.corpus, lexicon))
      gt_by_id[s.id] = metrics::ClassSet(s.ground_truth.begin(), s.ground_truth.end());
  }

  std::ifstream in(o.generations);
  if (!in) throw FileError("cannot open generations '" + o.generations.string() + "'");
  std::vector<metrics::CaptionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = o.generations.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    try {
      json rec = j;
      if (!rec.contains("caption") && !rec.contains("mentioned")) {
        if (!rec.contains("tokens")) throw ParseError(where + ": needs caption, mentioned or tokens");
        rec["caption"] = token_words(rec.at("tokens").get<std::vector<model::TokenId>>(), lexicon);
      }
      const std::string id = rec.at("id").get<std::string>();
      if (o.corpus) {
        auto it = gt_by_id.find(id);
        if (it == gt_by_id.end()) throw InvalidRecordError(where + ": id '" + id + "' is not in the corpus");
        json gt = json::array();
        for (std::size_t c : it->second) gt.push_back(lexicon.name(c));
        rec["gt"] = gt;
      }
      records.push_back(metrics::record_from_json(rec, lexicon));
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }

  const auto summary = metrics::evaluate(records, lexicon);
  const json j = metrics::summary_to_json(summary);
  if (o.out) open_out(*o.out) << j.dump(2) << '\n';
  if (o.csv) open_out(*o.csv) << metrics::summary_csv_header() << '\n' << metrics::summary_csv_row(summary) << '\n';
  out << j.dump() << '\n';
  return kExitOk;
}

// ---- sweep ---------------------------------------------------------------

int cmd_sweep(const SweepOptions& o, std::ostream& out) {
  if (o.alphas.empty() || o.thresholds.empty()) throw InvalidParameterError("sweep grid is empty");
  const Inputs in = load_inputs(o.in);
  const auto dc = decode_config(o.decode);
  const auto& cfg = in.weights.config;

  instrument::FlopQuery q;
  q.mode = dc.strategy == decoding::Strategy::kBeam ? instrument::FlopMode::kBeam
                                                     : instrument::FlopMode::kGreedy;
  q.beam_width = dc.beam_width;
  q.context_len = o.flops_context;
  const double base_flops = static_cast<double>(instrument::flops_estimate(cfg, q));

  std::ostringstream rows;
  rows << "alpha,threshold,chair_s,chair_i,f1,cover,hal,cog,flops_ratio\n";
  for (double alpha : o.alphas) {
    for (double threshold : o.thresholds) {
      const auto ac = attn_config(o.decode, alpha, threshold, cfg.n_layers);
      std::vector<metrics::CaptionRecord> records;
      for (std::size_t i = 0; i < in.scenes.size(); ++i)
        records.push_back(scene_record(in.scenes[i], run_scene(in, i, dc, ac), in.lexicon));
      const auto s = metrics::evaluate(records, in.lexicon);
      auto aq = q;
      aq.attnreal = !ac.is_identity();
      if (!ac.layers.empty()) aq.attnreal_layers = ac.layers.size();
      const double ratio = static_cast<double>(instrument::flops_estimate(cfg, aq)) / base_flops;
      rows << join_reals({alpha, threshold, s.chair_s, s.chair_i, s.f1, s.cover, s.hal, s.cog, ratio}) << '\n';
    }
  }
  open_out(o.out) << rows.str();
  out << "rows " << o.alphas.size() * o.thresholds.size() << '\n';
  return kExitOk;
}

// ---- stats ---------------------------------------------------------------

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  const Inputs in = load_inputs(o.in);
  const auto& cfg = in.weights.config;

  std::size_t index = 0;
  if (!o.scene.empty()) {
    auto it = std::find_if(in.scenes.begin(), in.scenes.end(), [&](const auto& s) { return s.id == o.scene; });
    if (it != in.scenes.end()) {
      index = static_cast<std::size_t>(it - in.scenes.begin());
    } else {
      try {
        std::size_t used = 0;
        index = std::stoul(o.scene, &used);
        if (used != o.scene.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InvalidParameterError("unknown scene '" + o.scene + "'");
      }
      if (index >= in.scenes.size()) throw InvalidParameterError("scene index out of range");
    }
  }
  const auto& scene = in.scenes[index];

  auto dc = decode_config(o.decode);
  dc.max_new_tokens = o.steps;
  if (!o.stop_at_eos) dc.eos_token.reset();
  const auto ac = attn_config(o.decode, o.decode.alpha, o.decode.threshold, cfg.n_layers);
  const auto gen = run_scene(in, index, dc, ac);

  ensure_dir(o.out);
  {
    auto f = open_out(o.out / "mass_series.csv");
    instrument::write_mass_csv(f, instrument::attention_mass_series(gen.traces, scene.map));
  }

  model::Prompt full = scene.prompt();
  for (auto t : gen.tokens) full.emplace_back(t);
  {
    const attnreal::AttnRealHook hook(ac);
    const auto traces = model::trace_sequence(in.weights, full, scene.map, &hook);
    auto f = open_out(o.out / "features.csv");
    instrument::write_features_csv(f, instrument::export_features(traces, scene.map, o.pca, o.decode.seed));
  }
  {
    model::Prompt prefix = scene.prompt();
    for (std::size_t i = 0; i < std::min(o.sweep_prefix, gen.tokens.size()); ++i) prefix.emplace_back(gen.tokens[i]);
    std::vector<model::TokenId> watch(o.watch.begin(), o.watch.end());
    if (watch.empty()) {
      const scenario::VocabLayout vocab{in.lexicon.size()};
      for (std::size_t c : scene.ground_truth) {
        if (vocab.object_token(c) < cfg.vocab_size) watch.push_back(vocab.object_token(c));
      }
    }
    const auto sweep = instrument::logit_sweep(in.weights, prefix, scene.map, o.sweep_alphas, watch, o.decode.threshold);
    auto f = open_out(o.out / "logit_sweep.csv");
    instrument::write_logit_sweep_csv(f, sweep);
  }
  {
    std::vector<instrument::FlopEntry> entries;
    auto add = [&](std::string label, instrument::FlopMode mode, bool on, std::size_t width) {
      instrument::FlopQuery q;
      q.mode = mode;
      q.attnreal = on;
      q.beam_width = width;
      q.context_len = o.flops_context;
      entries.push_back({std::move(label), instrument::flops_estimate(cfg, q)});
    };
    const std::string beam = "beam" + std::to_string(o.decode.beams);
    add("greedy", instrument::FlopMode::kGreedy, false, 1);
    add("greedy+attnreal", instrument::FlopMode::kGreedy, true, 1);
    add("nucleus", instrument::FlopMode::kNucleus, false, 1);
    add("nucleus+attnreal", instrument::FlopMode::kNucleus, true, 1);
    add(beam, instrument::FlopMode::kBeam, false, o.decode.beams);
    add(beam + "+attnreal", instrument::FlopMode::kBeam, true, o.decode.beams);
    add("contrastive", instrument::FlopMode::kContrastive, false, 1);
    auto f = open_out(o.out / "flops.csv");
    instrument::write_flops_csv(f, model::config_hash(cfg), entries);
  }
  out << "scene " << scene.id << " steps " << gen.tokens.size() << '\n';
  return kExitOk;
}

// ---- argument parsing ----------------------------------------------------

namespace {

void add_input_flags(CLI::App* app, InputOptions& in) {
  app->add_option("--model", in.model, "Weight file")->required();
  app->add_option("--corpus", in.corpus, "Scene corpus (JSON lines)")->required();
  app->add_option("--lexicon", in.lexicon, "Lexicon JSON (default: lexicon.json next to the corpus)");
}

void add_decode_flags(CLI::App* app, DecodeOptions& d, bool with_alpha) {
  if (with_alpha) {
    app->add_option("--alpha", d.alpha, "Sink down-scaling factor in (0, 1]; 1 disables the intervention");
    app->add_option("--threshold", d.threshold, "Sink threshold T (a sink receives more than T/n)");
  }
  app->add_option("--layers-applied", d.layers_applied, "Layers the intervention runs on (default: all)")
      ->delimiter(',');
  app->add_flag("--pooled-heads", d.pooled_heads, "Find sinks on the head-averaged row");
  app->add_option("--strategy", d.strategy, "greedy | beam | nucleus");
  app->add_option("--beams", d.beams, "Beam width");
  app->add_option("--top-p", d.top_p, "Nucleus mass");
  app->add_option("--temperature", d.temperature, "Sampling temperature");
  app->add_option("--seed", d.seed, "Sampling seed");
  app->add_option("--max-new-tokens", d.max_new_tokens, "Generation length cap");
  app->add_option("--eos", d.eos, "End-of-sequence token id");
  app->add_flag("--no-eos", d.no_eos, "Generate until the length cap");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention reallocation engine: synthesize, generate, evaluate, sweep, inspect"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Write a model, a scene corpus and a lexicon");
  s->add_option("--seed", synth.seed, "Seed");
  s->add_option("--kind", synth.kind, "grounded | random");
  s->add_option("--layers", synth.layers, "Decoder layers");
  s->add_option("--heads", synth.heads, "Attention heads");
  s->add_option("--dmodel", synth.d_model, "Model width");
  s->add_option("--vocab", synth.vocab, "Vocabulary size");
  s->add_option("--max-seq-len", synth.max_seq_len, "Maximum sequence length");
  s->add_flag("!--no-feedforward", synth.feedforward, "Disable the feedforward sublayer");
  s->add_option("--precision", synth.precision, "f64 | f32");
  s->add_option("--scenes", synth.scenes, "Scenes in the corpus");
  s->add_option("--objects", synth.objects, "Objects per scene");
  s->add_option("--visual-tokens", synth.visual_tokens, "Visual tokens per scene");
  s->add_option("--noise", synth.noise, "Visual embedding noise");
  s->add_option("--prior-strength", synth.prior_strength, "Language-prior strength (grounded)");
  s->add_option("--sink-gain", synth.sink_gain, "Output-token key gain (grounded)");
  s->add_option("--out", synth.out, "Output directory")->required();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Decode every scene of a corpus");
  add_input_flags(g, gen.in);
  add_decode_flags(g, gen.decode, true);
  g->add_option("--out", gen.out, "Generations file (JSON lines)")->required();
  g->add_option("--trace-dir", gen.trace_dir, "Write per-scene attention mass series here");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score generations");
  e->add_option("--generations", ev.generations, "Generations or caption records (JSON lines)")->required();
  e->add_option("--lexicon", ev.lexicon, "Lexicon JSON")->required();
  e->add_option("--corpus", ev.corpus, "Scene corpus providing ground truth by id");
  e->add_option("--out", ev.out, "Summary JSON");
  e->add_option("--csv", ev.csv, "Summary CSV");

  SweepOptions sw;
  auto* w = app.add_subcommand("sweep", "Metrics over an alpha x threshold grid");
  add_input_flags(w, sw.in);
  add_decode_flags(w, sw.decode, false);
  w->add_option("--alphas", sw.alphas, "Alpha grid")->delimiter(',')->required();
  w->add_option("--thresholds", sw.thresholds, "Threshold grid")->delimiter(',')->required();
  w->add_option("--flops-context", sw.flops_context, "Context length for the FLOP ratio");
  w->add_option("--out", sw.out, "Sweep CSV")->required();

  StatsOptions st;
  auto* t = app.add_subcommand("stats", "Instrumentation CSVs for one scene");
  add_input_flags(t, st.in);
  add_decode_flags(t, st.decode, true);
  t->add_option("--scene", st.scene, "Scene id or index (default: first)");
  t->add_option("--steps", st.steps, "Generated steps to trace");
  t->add_flag("--stop-at-eos", st.stop_at_eos, "End the traced generation at the eos token");
  t->add_option("--sweep-alphas", st.sweep_alphas, "Alphas for the logit sweep")->delimiter(',');
  t->add_option("--watch", st.watch, "Tokens for the logit sweep (default: ground-truth objects)")->delimiter(',');
  t->add_option("--sweep-prefix", st.sweep_prefix, "Generated tokens kept in the logit-sweep prompt");
  t->add_option("--flops-context", st.flops_context, "Context length for the FLOP report");
  t->add_flag("!--no-pca", st.pca, "Skip the 2-D projection of features");
  t->add_option("--out", st.out, "Output directory")->required();

  std::vector<const char*> args(argv, argv + argc);
  try {
    app.parse(static_cast<int>(args.size()), const_cast<char**>(args.data()));
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*g) return cmd_generate(gen, out);
    if (*e) return cmd_eval(ev, out);
    if (*w) return cmd_sweep(sw, out);
    if (*t) return cmd_stats(st, out);
  } catch (const InvalidParameterError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const InputError& ex) {
    err << "input error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace atr::cli
