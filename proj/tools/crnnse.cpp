// tools/crnnse.cpp

// Copyright 2026 The crnnse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crnnse/checkpoint.hpp"
#include "crnnse/config.hpp"
#include "crnnse/corpus.hpp"
#include "crnnse/errors.hpp"
#include "crnnse/inference.hpp"
#include "crnnse/log.hpp"
#include "crnnse/metrics.hpp"
#include "crnnse/training.hpp"
#include "crnnse/wav.hpp"
#include "json.hpp"

#ifndef CRNNSE_VERSION
#define CRNNSE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace crnnse;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kNumeric = 4, kCheckpoint = 5 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run record written next to the outputs once a command finishes.
class RunManifest {
 public:
  RunManifest(std::string command, int argc, char** argv) : command_(std::move(command)), started_(utc_now()) {
    for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
  }

  void set_config(const KeyValueConfig& kv) { config_ = kv; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write(const fs::path& path) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["argv"] = argv_;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_.values()) cfg[k] = v;
    j["config"] = cfg;
    if (seed_) {
      j["seed"] = *seed_;
    } else {
      j["seed"] = nullptr;
    }
    j["version"] = CRNNSE_VERSION;
    j["started"] = started_;
    j["finished"] = utc_now();
    j["outputs"] = outputs_;
    write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  KeyValueConfig config_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  std::string started_;
};

bool parse_switch(const std::string& flag, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError("flag '" + flag + "': expected on or off, got '" + v + "'");
}

KeyValueConfig load_optional(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw IoError("config file not found: " + path);
  return KeyValueConfig::load(path);
}

int corpus_vocabulary(const fs::path& corpus) {
  const fs::path cfg = corpus_config_path(corpus);
  if (!fs::exists(cfg)) throw IoError("not a corpus directory (no corpus.cfg): " + corpus.string());
  return CorpusConfig::from_kv(KeyValueConfig::load(cfg)).vocab_size;
}

// Model and optimizer settings for a corpus: preset, then the config file,
// then the corpus vocabulary unless the file pins one.
std::pair<ModelConfig, TrainConfig> resolve_configs(const std::string& preset, const std::string& config_path,
                                                    const fs::path& corpus) {
  KeyValueConfig kv = load_optional(config_path);
  std::set<std::string> known = model_config_keys();
  for (const auto& k : train_config_keys()) known.insert(k);
  kv.require_known(known);
  if (!kv.has("model.vocab_size")) kv.set("model.vocab_size", std::to_string(corpus_vocabulary(corpus)));
  return {ModelConfig::from_kv(kv, preset), TrainConfig::from_kv(kv, preset)};
}

KeyValueConfig snapshot(const ModelConfig& m, const TrainConfig& t) {
  KeyValueConfig kv = m.to_kv();
  kv.merge(t.to_kv());
  return kv;
}

std::vector<Utterance> load_nonempty(const fs::path& corpus, Split split) {
  std::vector<Utterance> u = load_split(corpus, split);
  if (u.empty()) throw ConfigError("split '" + to_string(split) + "' of " + corpus.string() + " is empty");
  return u;
}

void check_vocabulary(const ModelConfig& model, const fs::path& corpus) {
  const int v = corpus_vocabulary(corpus);
  if (v > model.lm.vocab_size) {
    throw CheckpointError("checkpoint vocabulary of " + std::to_string(model.lm.vocab_size) +
                          " words is smaller than the corpus vocabulary of " + std::to_string(v));
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, RunManifest& run) {
  KeyValueConfig kv = KeyValueConfig::load(a.config);
  const CorpusConfig cfg = CorpusConfig::from_kv(kv);
  const std::uint64_t seed = a.seed ? *a.seed : static_cast<std::uint64_t>(kv.get_int("seed", 1));
  const auto rows = build_corpus(cfg, seed, a.out);
  log_message(1, "wrote " + std::to_string(rows.size()) + " utterances to " + a.out);
  KeyValueConfig snap = cfg.to_kv();
  snap.set("seed", std::to_string(seed));
  run.set_config(snap);
  run.set_seed(seed);
  run.add_output(manifest_path(a.out));
  run.add_output(corpus_config_path(a.out));
  run.write(fs::path(a.out) / "synth.run.json");
  return kOk;
}

struct TrainArgs {
  std::string corpus;
  std::string preset = "desk";
  std::string lm = "on";
  std::string curriculum = "on";
  std::string out;
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, RunManifest& run) {
  auto [model, cfg] = resolve_configs(a.preset, a.config, a.corpus);
  cfg.lm = parse_switch("--lm", a.lm);
  cfg.curriculum = parse_switch("--curriculum", a.curriculum);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const auto train_set = make_examples(load_nonempty(a.corpus, Split::Train));
  const auto val_set = make_examples(load_nonempty(a.corpus, Split::Val));
  TrainOptions options;
  options.out_dir = a.out;
  if (!a.resume.empty()) {
    options.resume = a.resume;
    const fs::path log = run_files(a.out, cfg.variant()).log;
    if (fs::exists(log)) {
      const int start = load_checkpoint(a.resume).epoch;
      for (const auto& r : read_training_log(log)) {
        if (r.epoch <= start) options.prior_log.push_back(r);
      }
    }
  }
  log_message(1, cfg.variant() + ": " + std::to_string(train_set.size()) + " training and " +
                     std::to_string(val_set.size()) + " validation utterances");
  const TrainResult r = train(train_set, val_set, cfg, model, options);

  run.set_config(snapshot(model, cfg));
  run.set_seed(cfg.seed);
  for (const auto& p : {r.files.log, r.files.best, r.files.last, r.files.phase1}) {
    if (fs::exists(p)) run.add_output(p);
  }
  run.write(fs::path(a.out) / (cfg.variant() + ".run.json"));
  return kOk;
}

struct EvalArgs {
  std::string corpus;
  std::string split = "test";
  std::string checkpoint;
  std::string out;
  std::string estimate = "model";
  unsigned threads = 0;
};

int cmd_eval(const EvalArgs& a, RunManifest& run) {
  const Split split = parse_split(a.split);
  const EstimateSource source = parse_estimate_source(a.estimate);
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  check_vocabulary(ckpt.model, a.corpus);
  const auto utts = load_nonempty(a.corpus, split);
  const MetricReport report = evaluate(utts, ckpt.params, ckpt.model, source, a.threads);

  fs::create_directories(a.out);
  const fs::path csv = fs::path(a.out) / "report.csv";
  const fs::path json = fs::path(a.out) / "summary.json";
  write_file_atomic(csv, report.csv());
  write_file_atomic(json, report.json());
  std::cout << report.json();

  KeyValueConfig snap = ckpt.model.to_kv();
  snap.set("eval.split", to_string(split));
  snap.set("eval.estimate", to_string(source));
  snap.set("eval.checkpoint", a.checkpoint);
  run.set_config(snap);
  run.add_output(csv);
  run.add_output(json);
  run.write(fs::path(a.out) / "eval.run.json");
  return kOk;
}

struct EnhanceArgs {
  std::string in;
  std::string checkpoint;
  std::string out;
};

int cmd_enhance(const EnhanceArgs& a, RunManifest& run) {
  Waveform noisy;
  try {
    noisy = read_wav(a.in);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("unsupported input: ") + e.what());
  }
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Enhanced e = enhance(noisy, ckpt.params, ckpt.model);
  write_wav(a.out, e.waveform);

  KeyValueConfig snap = ckpt.model.to_kv();
  snap.set("enhance.checkpoint", a.checkpoint);
  snap.set("enhance.input", a.in);
  run.set_config(snap);
  run.add_output(a.out);
  run.write(a.out + ".run.json");
  return kOk;
}

struct AblateArgs {
  std::string corpus;
  std::string preset = "desk";
  std::string out;
  std::string config;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

int cmd_ablate(const AblateArgs& a, RunManifest& run) {
  auto [model, cfg] = resolve_configs(a.preset, a.config, a.corpus);
  const auto train_split = load_nonempty(a.corpus, Split::Train);
  const auto val_split = load_nonempty(a.corpus, Split::Val);
  const auto test_split = load_nonempty(a.corpus, Split::Test);
  const AblationResult r = run_ablation(train_split, val_split, test_split, cfg, model, a.seeds, a.out);

  std::cout << "variant,median_wer,median_ser,median_snr,median_sdr,median_lsd\n";
  std::cout << "noisy," << format_double(r.noisy.wer) << ',' << format_double(r.noisy.ser) << ','
            << format_double(r.noisy.snr) << ',' << format_double(r.noisy.sdr) << ',' << format_double(r.noisy.lsd)
            << '\n';
  for (const std::string v : {"CRNN", "CRNN+LM", "CRNN+LM+CL"}) {
    std::cout << v << ',' << format_double(r.median(v, &MetricSummary::wer)) << ','
              << format_double(r.median(v, &MetricSummary::ser)) << ','
              << format_double(r.median(v, &MetricSummary::snr)) << ','
              << format_double(r.median(v, &MetricSummary::sdr)) << ','
              << format_double(r.median(v, &MetricSummary::lsd)) << '\n';
  }

  KeyValueConfig snap = snapshot(model, cfg);
  std::string seeds;
  for (auto s : a.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  snap.set("ablate.seeds", seeds);
  run.set_config(snap);
  run.add_output(fs::path(a.out) / "ablation.csv");
  run.write(fs::path(a.out) / "ablate.run.json");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech denoising with a convolutional-recurrent network and a language-model regularizer"};
  app.set_version_flag("--version", CRNNSE_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize a corpus");
  s->add_option("--config", synth.config, "Corpus config file")->required();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Corpus seed (defaults to the config's seed, else 1)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model variant");
  t->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  t->add_option("--preset", tr.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper", "tiny"}));
  t->add_option("--lm", tr.lm, "on or off");
  t->add_option("--curriculum", tr.curriculum, "on or off");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--config", tr.config, "Extra model.* and train.* settings");
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_option("--seed", tr.seed, "Training seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on one split");
  e->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  e->add_option("--split", ev.split, "train, val or test");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--estimate", ev.estimate, "model, noisy or clean");
  e->add_option("--threads", ev.threads, "Worker threads (0 = all cores)");

  EnhanceArgs en;
  auto* n = app.add_subcommand("enhance", "Enhance one WAV file");
  n->add_option("--in", en.in, "16 kHz mono 16-bit WAV")->required();
  n->add_option("--checkpoint", en.checkpoint, "Checkpoint file")->required();
  n->add_option("--out", en.out, "Output WAV")->required();

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Train and score CRNN, CRNN+LM and CRNN+LM+CL for several seeds");
  b->add_option("--corpus", ab.corpus, "Corpus directory")->required();
  b->add_option("--preset", ab.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper", "tiny"}));
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--config", ab.config, "Extra model.* and train.* settings");
  b->add_option("--seeds", ab.seeds, "Training seeds")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  RunManifest run(name, argc, argv);
  try {
    if (name == "synth") return cmd_synth(synth, run);
    if (name == "train") return cmd_train(tr, run);
    if (name == "eval") return cmd_eval(ev, run);
    if (name == "enhance") return cmd_enhance(en, run);
    if (name == "ablate") return cmd_ablate(ab, run);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kConfig;
  } catch (const CheckpointError& err) {
    std::cerr << "checkpoint error: " << err.what() << '\n';
    return kCheckpoint;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
