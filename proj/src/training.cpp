// src/training.cpp

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

#include "crnnse/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "crnnse/adam.hpp"
#include "crnnse/log.hpp"

namespace crnnse {

std::string to_string(Phase p) { return p == Phase::Joint ? "Joint" : "DenoiseOnly"; }

Phase parse_phase(const std::string& s) {
  if (s == "DenoiseOnly") return Phase::DenoiseOnly;
  if (s == "Joint") return Phase::Joint;
  throw ConfigError("field 'phase': expected DenoiseOnly or Joint, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Configuration

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;
  if (name == "paper") {
    c.lr = 6.4710e-5;
    c.plateau_patience = 25;
    c.epochs_max = 500;
  } else if (name != "desk" && name != "tiny") {
    throw ConfigError("field 'preset': unknown preset '" + name + "' (expected desk, paper or tiny)");
  }
  return c;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv, const std::string& base_preset) {
  TrainConfig c = preset(kv.get_string("train.preset", base_preset));
  c.lr = kv.get_double("train.lr", c.lr);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.epsilon = kv.get_double("train.epsilon", c.epsilon);
  c.weight_decay_crnn = kv.get_double("train.weight_decay_crnn", c.weight_decay_crnn);
  c.weight_decay_lm = kv.get_double("train.weight_decay_lm", c.weight_decay_lm);
  c.lambda1 = kv.get_double("train.lambda1", c.lambda1);
  c.epochs_max = static_cast<int>(kv.get_int("train.epochs_max", c.epochs_max));
  c.plateau_patience = static_cast<int>(kv.get_int("train.plateau_patience", c.plateau_patience));
  c.plateau_min_delta = kv.get_double("train.plateau_min_delta", c.plateau_min_delta);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
  c.curriculum = kv.get_bool("train.curriculum", c.curriculum);
  c.lm = kv.get_bool("train.lm", c.lm);
  c.clip_norm = kv.get_double("train.clip_norm", c.clip_norm);
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("train.lr", format_double(lr));
  kv.set("train.beta1", format_double(beta1));
  kv.set("train.beta2", format_double(beta2));
  kv.set("train.epsilon", format_double(epsilon));
  kv.set("train.weight_decay_crnn", format_double(weight_decay_crnn));
  kv.set("train.weight_decay_lm", format_double(weight_decay_lm));
  kv.set("train.lambda1", format_double(lambda1));
  kv.set("train.epochs_max", std::to_string(epochs_max));
  kv.set("train.plateau_patience", std::to_string(plateau_patience));
  kv.set("train.plateau_min_delta", format_double(plateau_min_delta));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.curriculum", curriculum ? "on" : "off");
  kv.set("train.lm", lm ? "on" : "off");
  kv.set("train.clip_norm", format_double(clip_norm));
  return kv;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("field 'train.lr': must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("field 'train.beta1': expected [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("field 'train.beta2': expected [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("field 'train.epsilon': must be positive");
  if (!(weight_decay_crnn >= 0.0)) throw ConfigError("field 'train.weight_decay_crnn': must be non-negative");
  if (!(weight_decay_lm >= 0.0)) throw ConfigError("field 'train.weight_decay_lm': must be non-negative");
  if (!(lambda1 >= 0.0)) throw ConfigError("field 'train.lambda1': must be non-negative");
  if (epochs_max < 1) throw ConfigError("field 'train.epochs_max': must be at least 1");
  if (plateau_patience < 1) throw ConfigError("field 'train.plateau_patience': must be at least 1");
  if (!(plateau_min_delta >= 0.0)) throw ConfigError("field 'train.plateau_min_delta': must be non-negative");
  if (!(clip_norm >= 0.0)) throw ConfigError("field 'train.clip_norm': must be non-negative");
  if (curriculum && !lm) {
    throw ConfigError("field 'train.curriculum': curriculum on requires lm on (nothing to switch to)");
  }
}

std::string TrainConfig::variant() const {
  if (!lm) return "CRNN";
  return curriculum ? "CRNN+LM+CL" : "CRNN+LM";
}

std::set<std::string> train_config_keys() {
  return {"train.preset",   "train.lr",         "train.beta1",
          "train.beta2",    "train.epsilon",    "train.weight_decay_crnn",
          "train.weight_decay_lm", "train.lambda1", "train.epochs_max",
          "train.plateau_patience", "train.plateau_min_delta", "train.seed",
          "train.curriculum", "train.lm",       "train.clip_norm"};
}

CurriculumState curriculum_update(CurriculumState state, double val_loss, const TrainConfig& cfg, int epoch) {
  if (!std::isfinite(val_loss)) throw NumericError("curriculum_update: validation loss is not finite");
  if (state.best_val_loss - val_loss > cfg.plateau_min_delta) {
    state.best_val_loss = val_loss;
    state.epochs_since_improvement = 0;
  } else {
    state.epochs_since_improvement += 1;
  }
  if (state.phase == Phase::DenoiseOnly && state.epochs_since_improvement >= cfg.plateau_patience) {
    state.phase = Phase::Joint;
    state.epochs_since_improvement = 0;
    state.switch_epoch = epoch;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Data

TrainingExample make_example(const Utterance& u) {
  TrainingExample e;
  e.id = u.id;
  e.noisy = analyze(u.noisy).magnitudes.cast<float>();
  e.clean = analyze(u.clean).magnitudes.cast<float>();
  e.transcript = u.transcript;
  return e;
}

std::vector<TrainingExample> make_examples(const std::vector<Utterance>& utterances) {
  std::vector<TrainingExample> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(make_example(u));
  return out;
}

// ---------------------------------------------------------------------------
// Log

namespace {

std::string field(double v) { return std::isnan(v) ? std::string() : format_double(v); }

double parse_field(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError("training log: bad number '" + s + "'");
  }
}

}  // namespace

std::string training_log_header() { return "epoch,phase,train_L_re,train_L_lm,val_L_re,val_L_lm,wall_seconds\n"; }

std::string training_log_row(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << to_string(r.phase) << ',' << field(r.train_re) << ',' << field(r.train_lm) << ','
     << field(r.val_re) << ',' << field(r.val_lm) << ',' << format_double(r.wall_seconds) << '\n';
  return os.str();
}

std::vector<EpochRecord> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read training log " + path.string());
  std::string line;
  std::getline(in, line);
  if (line + "\n" != training_log_header()) throw IoError(path.string() + ": unexpected log header");
  std::vector<EpochRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    while (cols.size() < 7) cols.emplace_back();
    EpochRecord r;
    r.epoch = static_cast<int>(parse_field(cols[0]));
    try {
      r.phase = parse_phase(cols[1]);
    } catch (const ConfigError& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    r.train_re = parse_field(cols[2]);
    r.train_lm = parse_field(cols[3]);
    r.val_re = parse_field(cols[4]);
    r.val_lm = parse_field(cols[5]);
    r.wall_seconds = parse_field(cols[6]);
    rows.push_back(r);
  }
  return rows;
}

RunFiles run_files(const std::filesystem::path& out_dir, const std::string& variant) {
  return {out_dir / (variant + ".log.csv"), out_dir / (variant + ".best.ckpt"), out_dir / (variant + ".last.ckpt"),
          out_dir / (variant + ".phase1.ckpt")};
}

// ---------------------------------------------------------------------------
// Loop

namespace {

struct StepLosses {
  double re = 0.0;
  double lm = std::numeric_limits<double>::quiet_NaN();
};

Tensor<float> frames_tensor(const RowMatrix<float>& m) { return Tensor<float>::from_matrix(m); }

StepLosses train_step(const TrainingExample& ex, ModelParams<float>& params, const ModelConfig& model,
                      const TrainConfig& cfg, Phase phase, AdamState<float>& adam_crnn, AdamState<float>& adam_lm,
                      const std::vector<Tensor<float>*>& crnn_tensors, const std::vector<Tensor<float>*>& lm_tensors,
                      const std::vector<Tensor<float>*>& all_tensors) {
  Graph<float> g;
  const CrnnOutput<float> out = crnn_forward(g, ex.noisy, params.crnn, model.crnn);
  const Var<float> clean = g.constant(frames_tensor(ex.clean));
  StepLosses losses;
  Var<float> loss = loss_re(out.denoised, clean);
  losses.re = loss.item();
  if (phase == Phase::Joint) {
    const Var<float> lm = loss_lm(lm_decode(out.final, ex.transcript, params.lm, model.lm), ex.transcript, model.lm);
    losses.lm = lm.item();
    loss = add(loss, scale(lm, static_cast<float>(cfg.lambda1)));
  }
  if (!std::isfinite(loss.item())) {
    throw NumericError("non-finite training loss on utterance " + ex.id);
  }
  for (auto* t : all_tensors) t->zero_grad();
  g.backward(loss);
  const double norm = clip_grad_norm(std::span<Tensor<float>* const>(all_tensors), cfg.clip_norm);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient on utterance " + ex.id);
  adam_step(crnn_tensors, adam_crnn);
  adam_step(lm_tensors, adam_lm);
  return losses;
}

StepLosses validate_one(const TrainingExample& ex, ModelParams<float>& params, const ModelConfig& model, bool lm) {
  Graph<float> g(false);
  const CrnnOutput<float> out = crnn_forward(g, ex.noisy, params.crnn, model.crnn);
  StepLosses losses;
  losses.re = loss_re(out.denoised, g.constant(frames_tensor(ex.clean))).item();
  if (lm) losses.lm = loss_lm(lm_decode(out.final, ex.transcript, params.lm, model.lm), ex.transcript, model.lm).item();
  return losses;
}

void configure_adam(AdamState<float>& s, const TrainConfig& cfg, double weight_decay) {
  s.lr = cfg.lr;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.epsilon = cfg.epsilon;
  s.weight_decay = weight_decay;
}

}  // namespace

TrainResult train(const std::vector<TrainingExample>& train_set, const std::vector<TrainingExample>& val_set,
                  const TrainConfig& cfg, const ModelConfig& model, const TrainOptions& options) {
  cfg.validate();
  model.validate();
  if (train_set.empty()) throw PreconditionError("train: empty training split");
  if (val_set.empty()) throw PreconditionError("train: empty validation split");
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& ex : *set) {
      if (ex.noisy.cols() != model.crnn.feature_dim || ex.clean.rows() != ex.noisy.rows()) {
        throw DimensionError("train: utterance " + ex.id + " has inconsistent feature shapes");
      }
      for (int id : ex.transcript) {
        if (id < 0 || id >= model.lm.vocab_size) {
          throw PreconditionError("train: utterance " + ex.id + " uses word id " + std::to_string(id) +
                                  " outside the model vocabulary of " + std::to_string(model.lm.vocab_size));
        }
      }
    }
  }

  const std::string variant = cfg.variant();
  const bool write = !options.out_dir.empty();
  TrainResult result;
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    result.files = run_files(options.out_dir, variant);
  }

  Checkpoint state;
  state.model = model;
  double best_objective = std::numeric_limits<double>::infinity();
  if (options.resume) {
    state = load_checkpoint(*options.resume);
    require_compatible(state, model);
    state.model = model;
    best_objective = state.metadata.get_double("train.best_objective", best_objective);
    state.metadata = {};
  } else {
    state.params = init_params<float>(model, cfg.seed);
    if (cfg.lm && !cfg.curriculum) state.curriculum.phase = Phase::Joint;
  }
  configure_adam(state.adam_crnn, cfg, cfg.weight_decay_crnn);
  configure_adam(state.adam_lm, cfg, cfg.weight_decay_lm);
  result.log = options.prior_log;

  auto crnn_tensors = state.params.crnn_tensors();
  auto lm_tensors = state.params.lm_tensors();
  auto all_tensors = state.params.all_tensors();

  auto snapshot = [&](int epoch, double best) {
    Checkpoint c = state;
    c.epoch = epoch;
    c.metadata = cfg.to_kv();
    c.metadata.set("train.variant", variant);
    // Absent means no best yet; config values must be finite.
    if (std::isfinite(best)) c.metadata.set("train.best_objective", format_double(best));
    for (auto* t : c.params.all_tensors()) t->clear_grad();
    return c;
  };

  std::string log_text = training_log_header();
  for (const auto& r : result.log) log_text += training_log_row(r);

  bool have_best = false;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = state.epoch + 1; epoch <= cfg.epochs_max; ++epoch) {
    // The decoder only trains in Joint; with lm off the tracked phase merely
    // records whether the plateau has been reached.
    const Phase phase = cfg.lm ? state.curriculum.phase : Phase::DenoiseOnly;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    double sum_re = 0.0, sum_lm = 0.0;
    for (std::size_t idx : order) {
      const StepLosses l = train_step(train_set[idx], state.params, model, cfg, phase, state.adam_crnn,
                                      state.adam_lm, crnn_tensors, lm_tensors, all_tensors);
      sum_re += l.re;
      sum_lm += l.lm;
    }
    rec.train_re = sum_re / static_cast<double>(train_set.size());
    if (phase == Phase::Joint) rec.train_lm = sum_lm / static_cast<double>(train_set.size());

    double val_re = 0.0, val_lm = 0.0;
    for (const auto& ex : val_set) {
      const StepLosses l = validate_one(ex, state.params, model, cfg.lm);
      val_re += l.re;
      val_lm += l.lm;
    }
    rec.val_re = val_re / static_cast<double>(val_set.size());
    if (cfg.lm) rec.val_lm = val_lm / static_cast<double>(val_set.size());
    if (!std::isfinite(rec.val_re) || (cfg.lm && !std::isfinite(rec.val_lm))) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }

    bool plateau_now = false;
    if (cfg.curriculum || !cfg.lm) {
      const Phase before = state.curriculum.phase;
      state.curriculum = curriculum_update(state.curriculum, rec.val_re, cfg, epoch);
      plateau_now = before == Phase::DenoiseOnly && state.curriculum.phase == Phase::Joint;
    }
    if (plateau_now) {
      result.plateau_epoch = epoch;
      // A new objective starts for the curriculum run; the denoiser-only run keeps its own.
      if (cfg.lm) best_objective = std::numeric_limits<double>::infinity();
      // Whoever continues from here starts a fresh best-checkpoint search.
      if (write) save_checkpoint(result.files.phase1, snapshot(epoch, std::numeric_limits<double>::infinity()));
    }

    const double objective = phase == Phase::Joint ? rec.val_re + cfg.lambda1 * rec.val_lm : rec.val_re;
    const bool improved = objective < best_objective;
    if (improved) best_objective = objective;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    state.epoch = epoch;
    Checkpoint current = snapshot(epoch, best_objective);
    if (improved || !have_best) {
      result.best = current;
      have_best = true;
      if (write) save_checkpoint(result.files.best, current);
    }
    if (write) save_checkpoint(result.files.last, current);
    result.log.push_back(rec);
    log_text += training_log_row(rec);
    if (write) write_file_atomic(result.files.log, log_text);

    std::ostringstream msg;
    msg << variant << " epoch " << epoch << " " << to_string(phase) << " train_re " << rec.train_re << " val_re "
        << rec.val_re;
    if (cfg.lm) msg << " val_lm " << rec.val_lm;
    log_message(2, msg.str());
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.last = snapshot(state.epoch, best_objective);
  if (!have_best) result.best = result.last;
  return result;
}

// ---------------------------------------------------------------------------
// Ablation

double AblationResult::median(const std::string& variant, double MetricSummary::*field) const {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (r.variant == variant) v.push_back(r.test.*field);
  }
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string AblationResult::csv() const {
  std::ostringstream os;
  os << "variant,seed,plateau_epoch,snr,lsd,mse,sir,sdr,sar,wer,ser\n";
  auto row = [&](const std::string& name, const std::string& seed, int plateau, const MetricSummary& m) {
    os << name << ',' << seed << ',' << plateau << ',' << format_double(m.snr) << ',' << format_double(m.lsd) << ','
       << format_double(m.mse) << ',' << format_double(m.sir) << ',' << format_double(m.sdr) << ','
       << format_double(m.sar) << ',' << format_double(m.wer) << ',' << format_double(m.ser) << '\n';
  };
  row("noisy", "", 0, noisy);
  for (const auto& r : runs) row(r.variant, std::to_string(r.seed), r.plateau_epoch, r.test);
  return os.str();
}

AblationResult run_ablation(const std::vector<Utterance>& train_split, const std::vector<Utterance>& val_split,
                            const std::vector<Utterance>& test_split, const TrainConfig& base,
                            const ModelConfig& model, const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw PreconditionError("run_ablation: no seeds");
  const auto train_set = make_examples(train_split);
  const auto val_set = make_examples(val_split);
  AblationResult result;
  bool have_noisy = false;

  for (std::uint64_t seed : seeds) {
    const std::filesystem::path dir = out_dir / ("seed" + std::to_string(seed));
    auto score = [&](const std::string& variant, const TrainResult& r) {
      Checkpoint best = r.best;
      AblationRun run;
      run.variant = variant;
      run.seed = seed;
      run.plateau_epoch = r.plateau_epoch;
      run.test = evaluate(test_split, best.params, model).summary;
      if (!have_noisy) {
        result.noisy = evaluate(test_split, best.params, model, EstimateSource::Noisy).summary;
        have_noisy = true;
      }
      log_message(1, variant + " seed " + std::to_string(seed) + ": test SNR " + format_double(run.test.snr) +
                         " dB, WER " + format_double(run.test.wer));
      result.runs.push_back(run);
    };

    TrainConfig crnn = base;
    crnn.seed = seed;
    crnn.lm = false;
    crnn.curriculum = false;
    TrainOptions crnn_options;
    crnn_options.out_dir = dir;
    const TrainResult r_crnn = train(train_set, val_set, crnn, model, crnn_options);
    score(crnn.variant(), r_crnn);

    TrainConfig cl = base;
    cl.seed = seed;
    cl.lm = true;
    cl.curriculum = true;
    TrainOptions cl_options;
    cl_options.out_dir = dir;
    const RunFiles crnn_files = run_files(dir, crnn.variant());
    if (r_crnn.plateau_epoch > 0) {
      cl_options.resume = crnn_files.phase1;
      for (const auto& rec : r_crnn.log) {
        if (rec.epoch <= r_crnn.plateau_epoch) cl_options.prior_log.push_back(rec);
      }
    }
    TrainResult r_cl = train(train_set, val_set, cl, model, cl_options);
    if (r_cl.plateau_epoch == 0) r_cl.plateau_epoch = r_crnn.plateau_epoch;
    score(cl.variant(), r_cl);

    TrainConfig joint = base;
    joint.seed = seed;
    joint.lm = true;
    joint.curriculum = false;
    TrainOptions joint_options;
    joint_options.out_dir = dir;
    score(joint.variant(), train(train_set, val_set, joint, model, joint_options));
  }
  if (!out_dir.empty()) write_file_atomic(out_dir / "ablation.csv", result.csv());
  return result;
}

}  // namespace crnnse
