// src/metrics.cpp

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

#include "crnnse/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "crnnse/inference.hpp"
#include "crnnse/wav.hpp"
#include "json.hpp"

namespace crnnse {

double capped_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kDbCap : -kDbCap;
  if (num <= 0.0) return -kDbCap;
  return std::clamp(10.0 * std::log10(num / den), -kDbCap, kDbCap);
}

double snr_db(const Eigen::VectorXd& clean, const Eigen::VectorXd& estimate) {
  if (clean.size() != estimate.size()) {
    throw DimensionError("snr: clean has " + std::to_string(clean.size()) + " samples, estimate " +
                         std::to_string(estimate.size()));
  }
  const double power = clean.squaredNorm();
  if (power == 0.0) throw PreconditionError("snr: clean signal has zero power");
  return capped_db(power, (clean - estimate).squaredNorm());
}

double lsd_db(const Eigen::MatrixXd& clean_mag, const Eigen::MatrixXd& est_mag, double eps) {
  if (clean_mag.rows() != est_mag.rows() || clean_mag.cols() != est_mag.cols()) {
    throw DimensionError("lsd: magnitude shapes differ");
  }
  if (clean_mag.size() == 0) throw PreconditionError("lsd: no frames");
  if (clean_mag.minCoeff() < 0.0 || est_mag.minCoeff() < 0.0) throw PreconditionError("lsd: negative magnitude");
  double total = 0.0;
  for (Eigen::Index t = 0; t < clean_mag.rows(); ++t) {
    const Eigen::ArrayXd ratio =
        20.0 * ((est_mag.row(t).array() + eps) / (clean_mag.row(t).array() + eps)).log10().transpose();
    total += std::sqrt(ratio.square().mean());
  }
  return total / static_cast<double>(clean_mag.rows());
}

double frame_mse(const Eigen::MatrixXd& clean_mag, const Eigen::MatrixXd& est_mag) {
  if (clean_mag.rows() != est_mag.rows() || clean_mag.cols() != est_mag.cols()) {
    throw DimensionError("mse: magnitude shapes differ");
  }
  if (clean_mag.rows() == 0) throw PreconditionError("mse: no frames");
  return (clean_mag - est_mag).squaredNorm() / static_cast<double>(clean_mag.rows());
}

BssComponents bss_decompose(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise,
                            const Eigen::VectorXd& estimate) {
  if (clean.size() != noise.size() || clean.size() != estimate.size()) {
    throw DimensionError("bss_eval: clean, noise and estimate lengths differ");
  }
  const double cn = clean.norm();
  if (cn == 0.0) throw PreconditionError("bss_eval: clean reference is zero");
  if (noise.norm() == 0.0) throw PreconditionError("bss_eval: noise reference is zero");
  const Eigen::VectorXd u1 = clean / cn;
  Eigen::VectorXd n_perp = noise - noise.dot(u1) * u1;
  const double np = n_perp.norm();
  if (np <= 1e-12 * noise.norm()) throw PreconditionError("bss_eval: clean and noise references are collinear");
  const Eigen::VectorXd u2 = n_perp / np;

  BssComponents c;
  c.s_target = estimate.dot(u1) * u1;
  c.e_interf = estimate.dot(u2) * u2;
  c.e_artif = estimate - c.s_target - c.e_interf;
  return c;
}

BssResult bss_eval(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise, const Eigen::VectorXd& estimate) {
  const BssComponents c = bss_decompose(clean, noise, estimate);
  const double target = c.s_target.squaredNorm();
  BssResult r;
  r.sdr = capped_db(target, (c.e_interf + c.e_artif).squaredNorm());
  r.sir = capped_db(target, c.e_interf.squaredNorm());
  r.sar = capped_db((c.s_target + c.e_interf).squaredNorm(), c.e_artif.squaredNorm());
  return r;
}

int edit_distance(std::span<const int> ref, std::span<const int> hyp) {
  std::vector<int> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double word_error_rate(std::span<const int> ref, std::span<const int> hyp) {
  if (ref.empty()) return static_cast<double>(hyp.size());
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

void MetricReport::aggregate() {
  summary = {};
  if (rows.empty()) return;
  long long edits = 0, words = 0, wrong = 0;
  for (const auto& r : rows) {
    summary.snr += r.snr_db;
    summary.lsd += r.lsd;
    summary.mse += r.mse;
    summary.sir += r.sir_db;
    summary.sdr += r.sdr_db;
    summary.sar += r.sar_db;
    edits += r.edits;
    words += r.ref_words;
    wrong += r.correct ? 0 : 1;
  }
  const double n = static_cast<double>(rows.size());
  summary.snr /= n;
  summary.lsd /= n;
  summary.mse /= n;
  summary.sir /= n;
  summary.sdr /= n;
  summary.sar /= n;
  summary.wer = words > 0 ? static_cast<double>(edits) / static_cast<double>(words) : static_cast<double>(edits);
  summary.ser = static_cast<double>(wrong) / n;
}

std::string MetricReport::csv() const {
  std::ostringstream os;
  os << "id,snr_db,lsd,mse,sir_db,sdr_db,sar_db,wer,correct\n";
  for (const auto& r : rows) {
    os << r.id << ',' << format_double(r.snr_db) << ',' << format_double(r.lsd) << ',' << format_double(r.mse) << ','
       << format_double(r.sir_db) << ',' << format_double(r.sdr_db) << ',' << format_double(r.sar_db) << ','
       << format_double(r.wer) << ',' << (r.correct ? "true" : "false") << '\n';
  }
  return os.str();
}

std::string MetricReport::json() const {
  nlohmann::ordered_json j;
  j["snr"] = summary.snr;
  j["lsd"] = summary.lsd;
  j["mse"] = summary.mse;
  j["sir"] = summary.sir;
  j["sdr"] = summary.sdr;
  j["sar"] = summary.sar;
  j["wer"] = summary.wer;
  j["ser"] = summary.ser;
  return j.dump(2) + "\n";
}

std::string to_string(EstimateSource s) {
  switch (s) {
    case EstimateSource::Model: return "model";
    case EstimateSource::Noisy: return "noisy";
    case EstimateSource::Clean: return "clean";
  }
  return "model";
}

EstimateSource parse_estimate_source(const std::string& s) {
  if (s == "model") return EstimateSource::Model;
  if (s == "noisy") return EstimateSource::Noisy;
  if (s == "clean") return EstimateSource::Clean;
  throw ConfigError("field 'estimate': expected model, noisy or clean, got '" + s + "'");
}

UtteranceMetrics evaluate_utterance(const Utterance& utt, ModelParams<float>& params, const ModelConfig& cfg,
                                    EstimateSource source) {
  if (utt.clean.size() != utt.noisy.size()) {
    throw DimensionError("evaluate: " + utt.id + ": clean and noisy lengths differ");
  }
  const Eigen::Index n = utt.clean.size();
  const FeatureSequence noisy_fs = analyze(utt.noisy);
  const FeatureSequence clean_fs = analyze(utt.clean);

  Eigen::MatrixXd est_mag;
  Eigen::VectorXd est_wave;
  std::vector<int> hypothesis;
  switch (source) {
    case EstimateSource::Model: {
      ForwardResult r = run_model(noisy_fs.magnitudes, params, cfg, true);
      est_wave = resynthesize(noisy_fs, r.magnitudes, n, utt.noisy.sample_rate).samples;
      est_mag = std::move(r.magnitudes);
      hypothesis = std::move(r.hypothesis);
      break;
    }
    case EstimateSource::Noisy:
      est_mag = noisy_fs.magnitudes;
      est_wave = quantize_pcm16(utt.noisy.samples);
      hypothesis = run_model(noisy_fs.magnitudes, params, cfg, true).hypothesis;
      break;
    case EstimateSource::Clean:
      est_mag = clean_fs.magnitudes;
      est_wave = utt.clean.samples;
      hypothesis = run_model(clean_fs.magnitudes, params, cfg, true).hypothesis;
      break;
  }

  const SampleRange ir = interior_range(n);
  if (ir.size() < 1) throw PreconditionError("evaluate: " + utt.id + " is shorter than two frames");
  const Eigen::VectorXd clean = utt.clean.samples.segment(ir.begin, ir.size());
  const Eigen::VectorXd noise = utt.noisy.samples.segment(ir.begin, ir.size()) - clean;
  const Eigen::VectorXd estimate = est_wave.segment(ir.begin, ir.size());

  UtteranceMetrics m;
  m.id = utt.id;
  m.snr_db = snr_db(clean, estimate);
  const BssResult bss = bss_eval(clean, noise, estimate);
  m.sdr_db = bss.sdr;
  m.sir_db = bss.sir;
  m.sar_db = bss.sar;
  m.lsd = lsd_db(clean_fs.magnitudes, est_mag);
  m.mse = frame_mse(clean_fs.magnitudes, est_mag);
  m.edits = edit_distance(utt.transcript, hypothesis);
  m.ref_words = static_cast<int>(utt.transcript.size());
  m.wer = word_error_rate(utt.transcript, hypothesis);
  m.correct = m.edits == 0;
  return m;
}

MetricReport evaluate(const std::vector<Utterance>& utterances, ModelParams<float>& params, const ModelConfig& cfg,
                      EstimateSource source, unsigned threads) {
  if (utterances.empty()) throw PreconditionError("evaluate: no utterances");
  MetricReport report;
  report.rows.resize(utterances.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(utterances.size()));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < utterances.size(); i = next++) {
      try {
        report.rows[i] = evaluate_utterance(utterances[i], params, cfg, source);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = utterances.size();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  report.aggregate();
  return report;
}

}  // namespace crnnse
