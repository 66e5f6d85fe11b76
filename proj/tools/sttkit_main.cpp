// tools/sttkit_main.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// sttkit command line: transcribe, evaluate, bench, diagnose, train-lm.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sttkit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sttkit;

namespace {

std::string single_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) fail(Err::FileNotFound, what + " not found: " + path.string());
}

std::string read_whole_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::FileNotFound, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Shared pipeline knobs attached to a subcommand. Config file values
/// apply first; explicitly passed flags win.
struct CommonFlags {
  std::string config_path;
  std::string decoder;
  int chunk_samples = 4000;
  double rms_threshold = 0.02;
  double hangover_ms = 200.0;
  double min_segment_ms = 100.0;
  double temperature = 1.0;

  CLI::Option* decoder_opt = nullptr;
  CLI::Option* chunk_opt = nullptr;
  CLI::Option* rms_opt = nullptr;
  CLI::Option* hangover_opt = nullptr;
  CLI::Option* min_seg_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file; flags override it");
    decoder_opt = cmd->add_option("--decoder", decoder,
                                  "external decoder command template with {in}/{out}");
    chunk_opt = cmd->add_option("--chunk-samples", chunk_samples,
                                "streaming chunk size in samples (default 4000)");
    rms_opt = cmd->add_option("--rms-threshold", rms_threshold, "endpoint RMS speech threshold");
    hangover_opt = cmd->add_option("--hangover-ms", hangover_ms, "endpoint merge hangover (ms)");
    min_seg_opt = cmd->add_option("--min-segment-ms", min_segment_ms, "minimum segment length (ms)");
    temperature_opt = cmd->add_option("--temperature", temperature, "confidence softmax temperature");
  }

  void fold_into(PipelineConfig& cfg) const {
    if (!config_path.empty()) apply_config_map(cfg, read_config_file(config_path));
    if (decoder_opt->count()) cfg.decoder_cmd = decoder;
    if (chunk_opt->count()) cfg.chunk_samples = chunk_samples;
    if (rms_opt->count()) cfg.endpoint.rms_threshold = rms_threshold;
    if (hangover_opt->count())
      cfg.endpoint.hangover_samples = static_cast<int>(hangover_ms * kPipelineRate / 1000.0);
    if (min_seg_opt->count())
      cfg.endpoint.min_segment_samples =
          static_cast<int>(min_segment_ms * kPipelineRate / 1000.0);
    if (temperature_opt->count()) cfg.temperature = temperature;
  }
};

struct PipelineSpec {
  std::string id;
  std::string model_dir;
  std::string lm_path;
};

/// Parse repeatable `--model ID=DIR` / `--lm ID=PATH` pairs. A bare DIR
/// gets its basename as id.
std::vector<PipelineSpec> pair_pipeline_specs(const std::vector<std::string>& models,
                                              const std::vector<std::string>& lms) {
  std::vector<PipelineSpec> specs;
  for (const auto& m : models) {
    PipelineSpec spec;
    const auto eq = m.find('=');
    if (eq == std::string::npos) {
      spec.model_dir = m;
      spec.id = fs::path(m).filename().string();
    } else {
      spec.id = m.substr(0, eq);
      spec.model_dir = m.substr(eq + 1);
    }
    if (spec.id.empty() || spec.model_dir.empty())
      fail(Err::InvalidParameter, "bad --model value: " + m);
    for (const auto& existing : specs)
      if (existing.id == spec.id)
        fail(Err::InvalidParameter, "duplicate pipeline id " + spec.id + "; use ID=DIR form");
    specs.push_back(std::move(spec));
  }
  for (const auto& l : lms) {
    const auto eq = l.find('=');
    if (eq == std::string::npos)
      fail(Err::InvalidParameter, "--lm must use ID=PATH form, got: " + l);
    const std::string id = l.substr(0, eq);
    bool matched = false;
    for (auto& spec : specs) {
      if (spec.id != id) continue;
      spec.lm_path = l.substr(eq + 1);
      matched = true;
    }
    if (!matched) fail(Err::InvalidParameter, "--lm id " + id + " matches no --model");
  }
  return specs;
}

int cmd_transcribe(const std::string& model_dir, const std::string& input,
                   const std::string& output, const std::string& lm_path, double lm_weight,
                   bool lm_weight_set, const std::string& format, bool format_set,
                   const std::string& diagnostics_dir, const std::string& engine_jsonl,
                   bool timestamps, const std::string& title, const CommonFlags& common) {
  PipelineConfig cfg;
  common.fold_into(cfg);
  if (!model_dir.empty()) cfg.model_dir = model_dir;
  if (!lm_path.empty()) cfg.lm_path = lm_path;
  if (lm_weight_set) cfg.lm_weight = lm_weight;
  if (format_set) cfg.format = parse_export_format(format);
  if (timestamps) cfg.include_timestamps = true;
  if (!title.empty()) cfg.title = title;

  require_file(input, "input audio file");

  std::optional<NGramModel> lm;
  if (!cfg.lm_path.empty()) lm = load_ngram_model(cfg.lm_path);

  Transcript transcript;
  std::optional<AudioClip> clip;
  std::optional<VocabularyModel> model;

  if (!engine_jsonl.empty()) {
    require_file(engine_jsonl, "engine JSONL file");
    std::ifstream stream(engine_jsonl, std::ios::binary);
    std::vector<std::string> warnings;
    transcript = parse_engine_jsonl(stream, input, "engine", &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << single_line(w) << "\n";
  } else {
    if (cfg.model_dir.empty())
      fail(Err::InvalidModel, "no model directory given (use --model or --engine-jsonl)");
    clip = load_audio(input, cfg);
    model = load_vocabulary_model(cfg.model_dir);
    transcript = transcribe_clip(*clip, *model, cfg, input);
  }
  if (lm) transcript = rescore_transcript(transcript, *lm, cfg.lm_weight);

  export_transcript(transcript, cfg, output);

  if (!diagnostics_dir.empty()) {
    if (!clip) clip = load_audio(input, cfg);
    emit_diagnostics(*clip, transcript, model ? &*model : nullptr, cfg, diagnostics_dir);
  }
  return 0;
}

int cmd_evaluate(const std::string& ref_path, const std::string& hyp_path) {
  require_file(ref_path, "reference file");
  require_file(hyp_path, "hypothesis file");
  const auto ref = normalize_tokens(read_whole_file(ref_path));
  const auto hyp = normalize_tokens(read_whole_file(hyp_path));
  const WerReport r = wer(ref, hyp);
  std::printf("WER %.6f S %" PRIu64 " D %" PRIu64 " I %" PRIu64 " N %" PRIu64 "\n", r.wer,
              r.substitutions, r.deletions, r.insertions, r.ref_len);
  return 0;
}

int cmd_bench(const std::string& manifest_path, const std::string& out_dir,
              const std::vector<std::string>& models, const std::vector<std::string>& lms,
              double lm_weight, bool lm_weight_set, const CommonFlags& common) {
  PipelineConfig cfg;
  common.fold_into(cfg);
  if (lm_weight_set) cfg.lm_weight = lm_weight;

  const auto entries = read_manifest(manifest_path);
  const auto specs = pair_pipeline_specs(models, lms);
  if (specs.empty()) fail(Err::InvalidParameter, "bench needs at least one --model");

  std::vector<BenchPipeline> pipelines;
  for (const auto& spec : specs) {
    auto model = std::make_shared<VocabularyModel>(load_vocabulary_model(spec.model_dir));
    std::shared_ptr<NGramModel> lm;
    if (!spec.lm_path.empty())
      lm = std::make_shared<NGramModel>(load_ngram_model(spec.lm_path));
    pipelines.push_back({spec.id, [model, lm, cfg](const std::string& path) {
                           return run_pipeline(path, *model, cfg, lm.get()).text();
                         }});
  }

  const DomainReport report = bench_run(entries, pipelines);
  write_bench_reports(report, out_dir);
  for (const auto& e : report.errors)
    std::cerr << "warning: sample " << e.sample_index << " (" << e.model_id
              << "): " << single_line(e.message) << "\n";
  return 0;
}

int cmd_diagnose(const std::string& model_dir, const std::string& input,
                 const std::string& out_dir, const CommonFlags& common) {
  PipelineConfig cfg;
  common.fold_into(cfg);
  if (!model_dir.empty()) cfg.model_dir = model_dir;
  if (cfg.model_dir.empty()) fail(Err::InvalidModel, "no model directory given");

  require_file(input, "input audio file");
  const AudioClip clip = load_audio(input, cfg);
  const auto model = load_vocabulary_model(cfg.model_dir);
  const Transcript transcript = transcribe_clip(clip, model, cfg, input);
  emit_diagnostics(clip, transcript, &model, cfg, out_dir);
  return 0;
}

int cmd_train_lm(const std::string& corpus_path, const std::string& out_path, int order,
                 int min_count, const std::string& model_id) {
  require_file(corpus_path, "corpus file");
  std::ifstream in(corpus_path, std::ios::binary);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = normalize_tokens(line);
    if (!tokens.empty()) corpus.push_back(std::move(tokens));
  }
  const auto model = train(corpus, order, min_count, model_id);
  save_ngram_model(model, fs::path(out_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline multi-format speech-to-text pipeline toolkit"};
  app.require_subcommand(1);

  std::function<int()> run;

  // transcribe
  auto* transcribe = app.add_subcommand("transcribe", "Transcribe one audio file");
  {
    static std::string model_dir, input, output, lm_path, format = "docx", diagnostics_dir,
                       engine_jsonl, title;
    static double lm_weight = 1.0;
    static bool timestamps = false;
    static CommonFlags common;
    transcribe->add_option("--model", model_dir, "vocabulary model directory");
    transcribe->add_option("--input", input, "input audio file")->required();
    transcribe->add_option("--output", output, "output transcript file")->required();
    transcribe->add_option("--lm", lm_path, "n-gram language model for rescoring");
    auto* weight_opt = transcribe->add_option("--lm-weight", lm_weight, "LM weight (default 1.0)");
    auto* format_opt =
        transcribe->add_option("--format", format, "docx|txt|json (default docx)");
    transcribe->add_option("--diagnostics", diagnostics_dir, "also emit diagnostics here");
    transcribe->add_option("--engine-jsonl", engine_jsonl,
                           "replay external engine word records instead of recognizing");
    transcribe->add_flag("--timestamps", timestamps, "prefix segments with [m:ss]");
    transcribe->add_option("--title", title, "optional DOCX title paragraph");
    common.attach(transcribe);
    transcribe->callback([&run, weight_opt, format_opt] {
      run = [=] {
        return cmd_transcribe(model_dir, input, output, lm_path, lm_weight,
                              weight_opt->count() > 0, format, format_opt->count() > 0,
                              diagnostics_dir, engine_jsonl, timestamps, title, common);
      };
    });
  }

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Compare a hypothesis transcript to a reference");
  {
    static std::string ref_path, hyp_path;
    evaluate->add_option("--ref", ref_path, "reference text file")->required();
    evaluate->add_option("--hyp", hyp_path, "hypothesis text file")->required();
    evaluate->callback([&run] {
      run = [=] { return cmd_evaluate(ref_path, hyp_path); };
    });
  }

  // bench
  auto* bench = app.add_subcommand("bench", "Run a benchmark manifest across pipelines");
  {
    static std::string manifest_path, out_dir;
    static std::vector<std::string> models, lms;
    static double lm_weight = 1.0;
    static CommonFlags common;
    bench->add_option("--manifest", manifest_path, "benchmark manifest CSV")->required();
    bench->add_option("--out", out_dir, "report output directory")->required();
    bench->add_option("--model", models, "pipeline model directory as ID=DIR (repeatable)");
    bench->add_option("--lm", lms, "language model for a pipeline as ID=PATH (repeatable)");
    auto* weight_opt = bench->add_option("--lm-weight", lm_weight, "LM weight for all pipelines");
    common.attach(bench);
    bench->callback([&run, weight_opt] {
      run = [=] {
        return cmd_bench(manifest_path, out_dir, models, lms, lm_weight, weight_opt->count() > 0,
                         common);
      };
    });
  }

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Emit spectrogram, posterior, and candle data");
  {
    static std::string model_dir, input, out_dir;
    static CommonFlags common;
    diagnose->add_option("--model", model_dir, "vocabulary model directory");
    diagnose->add_option("--input", input, "input audio file")->required();
    diagnose->add_option("--out", out_dir, "diagnostics output directory")->required();
    common.attach(diagnose);
    diagnose->callback([&run] {
      run = [=] { return cmd_diagnose(model_dir, input, out_dir, common); };
    });
  }

  // train-lm
  auto* train_lm = app.add_subcommand("train-lm", "Train an n-gram language model from text");
  {
    static std::string corpus_path, out_path, model_id = "custom";
    static int order = 2, min_count = 1;
    train_lm->add_option("--corpus", corpus_path, "one sentence per line")->required();
    train_lm->add_option("--out", out_path, "model output file")->required();
    train_lm->add_option("--order", order, "n-gram order (default 2)");
    train_lm->add_option("--min-count", min_count, "map rarer tokens to <unk> (default 1)");
    train_lm->add_option("--id", model_id, "model identifier");
    train_lm->callback([&run] {
      run = [=] { return cmd_train_lm(corpus_path, out_path, order, min_count, model_id); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return run();
  } catch (const SttError& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return 1;
  }
}
