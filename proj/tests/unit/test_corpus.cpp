// tests/unit/test_corpus.cpp

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

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crnnse/corpus.hpp"
#include "crnnse/errors.hpp"
#include "doctest.h"

using namespace crnnse;

namespace {

Waveform random_wave(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Waveform w;
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) w.samples(i) = u(rng);
  return w;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

constexpr int kFft = 16384;

// Magnitude spectrum of a Hann-tapered excerpt, zero-padded to kFft points.
Eigen::VectorXd spectrum(const Eigen::VectorXd& x) {
  std::vector<double> buf(kFft, 0.0);
  const auto n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    buf[static_cast<std::size_t>(i)] = x(i) * (0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / n));
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> out;
  fft.fwd(out, buf);
  Eigen::VectorXd mag(kFft / 2);
  for (int k = 0; k < kFft / 2; ++k) mag(k) = std::abs(out[static_cast<std::size_t>(k)]);
  return mag;
}

// Bins of the three strongest local maxima.
std::set<int> dominant_bins(const Eigen::VectorXd& mag) {
  std::vector<std::pair<double, int>> peaks;
  for (int k = 1; k + 1 < mag.size(); ++k) {
    if (mag(k) > mag(k - 1) && mag(k) >= mag(k + 1)) peaks.emplace_back(mag(k), k);
  }
  std::partial_sort(peaks.begin(), peaks.begin() + 3, peaks.end(), std::greater<>());
  return {peaks[0].second, peaks[1].second, peaks[2].second};
}

}  // namespace

TEST_CASE("split counts") {
  const SplitCounts c = split_5_1_1(750);
  CHECK(c.train == 535);
  CHECK(c.val == 107);
  CHECK(c.test == 108);
  for (int total = 0; total < 200; ++total) {
    const SplitCounts s = split_5_1_1(total);
    CHECK(s.total() == total);
    CHECK(s.train >= 5 * s.val);
    CHECK(s.test >= s.val);
  }
  CHECK_THROWS_AS(split_5_1_1(-1), ConfigError);
}

TEST_CASE("corpus config validation") {
  CorpusConfig c;
  CHECK(c.vocab_size == 857);
  CHECK(c.mix_then_rir);
  CHECK_NOTHROW(c.validate());
  c.snr_max_db = 31.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = CorpusConfig{};
  c.transcript_max = 61;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  KeyValueConfig kv;
  kv.set("snr_max_db", "31");
  CHECK_THROWS_AS(CorpusConfig::from_kv(kv), ConfigError);
  KeyValueConfig unknown;
  unknown.set("vocab", "10");
  CHECK_THROWS_AS(CorpusConfig::from_kv(unknown), ConfigError);

  CorpusConfig d;
  d.total = 21;
  d.vocab_size = 30;
  const CorpusConfig back = CorpusConfig::from_kv(d.to_kv());
  CHECK(back.to_kv().dump() == d.to_kv().dump());
}

TEST_CASE("vocabulary ids and reserved tokens") {
  const Vocabulary v(857, 5);
  CHECK(v.size() == 857);
  CHECK(v.eos() == 857);
  CHECK(v.bos() == 858);
  CHECK(v.pad() == 859);
  CHECK_THROWS_AS(v.signature(857), PreconditionError);
  CHECK_THROWS_AS(v.signature(-1), PreconditionError);
  const Vocabulary w(857, 5);
  std::set<std::string> names;
  for (int id = 0; id < v.size(); ++id) {
    CHECK(v.signature(id).f0 == w.signature(id).f0);
    CHECK(v.signature(id).weights == w.signature(id).weights);
    names.insert(v.word(id));
  }
  CHECK(names.size() == 857u);

  std::mt19937_64 rng(1);
  const std::vector<int> t = v.sample_transcript(40, rng);
  CHECK(t.size() == 40u);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const auto& next = v.successors(t[i - 1]);
    CHECK(std::binary_search(next.begin(), next.end(), t[i]));
  }
}

TEST_CASE("generate_clean is deterministic and validates its input") {
  const Vocabulary v(857, 11);
  const std::vector<int> t{4, 800, 17, 17, 3};
  const Waveform a = generate_clean(t, v, 99);
  const Waveform b = generate_clean(t, v, 99);
  CHECK(a.samples == b.samples);
  const CorpusConfig cfg;
  CHECK(a.size() == 5 * (word_samples(cfg) - crossfade_samples(cfg)) + crossfade_samples(cfg));
  CHECK(word_samples(cfg) == 1920);

  CHECK_THROWS_AS(generate_clean(std::vector<int>{}, v, 1), PreconditionError);
  CHECK_THROWS_AS(generate_clean(std::vector<int>{1, 857}, v, 1), PreconditionError);
  CHECK_THROWS_AS(generate_clean(std::vector<int>(61, 2), v, 1), PreconditionError);
  CHECK_NOTHROW(generate_clean(std::vector<int>(60, 2), v, 1));
}

TEST_CASE("distinct words have distinct dominant frequencies") {
  const Vocabulary v(857, 7);
  std::set<std::set<int>> seen;
  for (int id = 0; id < v.size(); ++id) {
    const std::vector<int> one{id};
    seen.insert(dominant_bins(spectrum(generate_clean(one, v, 3).samples)));
  }
  CHECK(seen.size() == 857u);
}

TEST_CASE("nearest spectral template recovers clean transcripts") {
  CorpusConfig cfg;
  cfg.total = 14;
  cfg.transcript_min = 8;
  cfg.transcript_max = 20;
  const std::uint64_t seed = 21;
  const Vocabulary v(cfg.vocab_size, seed, cfg.grammar_successors);
  const Eigen::Index L = word_samples(cfg), C = crossfade_samples(cfg), step = L - C;

  // Templates from isolated words, compared on the cross-fade-free core.
  std::vector<Eigen::VectorXd> templates;
  for (int id = 0; id < v.size(); ++id) {
    const std::vector<int> one{id};
    templates.push_back(spectrum(generate_clean(one, v, 1234).samples.segment(C, L - 2 * C)).normalized());
  }
  int total = 0, correct = 0;
  for (int i = 0; i < cfg.total; ++i) {
    const Utterance u = synthesize_utterance(i, cfg, seed, v);
    for (std::size_t k = 0; k < u.transcript.size(); ++k) {
      const Eigen::VectorXd s =
          spectrum(u.clean.samples.segment(static_cast<Eigen::Index>(k) * step + C, L - 2 * C)).normalized();
      int best = -1;
      double best_score = -1.0;
      for (int id = 0; id < v.size(); ++id) {
        const double score = templates[static_cast<std::size_t>(id)].dot(s);
        if (score > best_score) {
          best_score = score;
          best = id;
        }
      }
      ++total;
      correct += best == u.transcript[k];
    }
  }
  CHECK(total > 100);
  CHECK(correct == total);
}

TEST_CASE("convolve_rir") {
  std::mt19937_64 rng(2);
  const Waveform x = random_wave(500, rng);
  Waveform delta;
  delta.samples = Eigen::VectorXd::Zero(7);
  delta.samples(0) = 2.5;
  CHECK((convolve_rir(x, delta).samples - x.samples).cwiseAbs().maxCoeff() < 1e-12);

  delta.samples.setZero();
  delta.samples(5) = 1.0;
  const Waveform shifted = convolve_rir(x, delta);
  CHECK(shifted.size() == x.size());
  CHECK(shifted.samples.head(5).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((shifted.samples.tail(495) - x.samples.head(495)).cwiseAbs().maxCoeff() < 1e-12);

  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> nx(1, 900), nh(1, 300);
    const Waveform a = random_wave(nx(rng), rng), h = random_wave(nh(rng), rng);
    const double norm = 1.0 / h.samples.norm();
    const Waveform y = convolve_rir(a, h);
    REQUIRE(y.size() == a.size());
    double err = 0.0;
    for (Eigen::Index n = 0; n < a.size(); ++n) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < h.size() && m <= n; ++m) acc += h.samples(m) * norm * a.samples(n - m);
      err = std::max(err, std::abs(acc - y.samples(n)));
    }
    CHECK(err < 1e-6);
  }

  Waveform other = delta;
  other.sample_rate = 8000;
  CHECK_THROWS_AS(convolve_rir(x, other), PreconditionError);
  CHECK_THROWS_AS(convolve_rir(x, Waveform{}), PreconditionError);
}

TEST_CASE("mix_at_snr hits the requested ratio") {
  std::mt19937_64 rng(3);
  const Waveform clean = random_wave(4000, rng);
  const Waveform noise = generate_noise(7, 3000, 5);
  const Waveform m0 = mix_at_snr(clean, noise, 0.0);
  const Eigen::VectorXd scaled0 = m0.samples - clean.samples;
  CHECK(scaled0.squaredNorm() == doctest::Approx(clean.samples.squaredNorm()).epsilon(1e-9));

  std::uniform_real_distribution<double> snr(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double want = snr(rng);
    const Waveform n = generate_noise(trial % 25, 2000 + 97 * trial, 100 + trial);
    const Waveform m = mix_at_snr(clean, n, want);
    CHECK(std::abs(power_snr_db(clean.samples, m.samples - clean.samples) - want) < 1e-6);
  }

  Waveform silent;
  silent.samples = Eigen::VectorXd::Zero(100);
  CHECK_THROWS_AS(mix_at_snr(silent, noise, 5.0), PreconditionError);
  CHECK_THROWS_AS(mix_at_snr(clean, silent, 5.0), PreconditionError);
}

TEST_CASE("noise generators") {
  for (int type = 0; type < 25; ++type) {
    const Waveform a = generate_noise(type, 3000, 9);
    CHECK(a.size() == 3000);
    CHECK(a.samples.allFinite());
    CHECK(a.samples.squaredNorm() > 0.0);
    CHECK(generate_noise(type, 3000, 9).samples == a.samples);
  }
  CHECK_THROWS_AS(generate_noise(25, 10, 1), PreconditionError);
  CHECK_THROWS_AS(generate_noise(0, 0, 1), PreconditionError);
}

TEST_CASE("utterance invariants") {
  CorpusConfig cfg;
  cfg.total = 21;
  cfg.vocab_size = 40;
  const Corpus c = synthesize_corpus(cfg, 17);
  std::set<std::string> ids;
  int counts[3] = {0, 0, 0};
  for (const Utterance& u : c.utterances) {
    ids.insert(u.id);
    ++counts[static_cast<int>(u.split)];
    CHECK(u.transcript.size() >= 8u);
    CHECK(u.transcript.size() <= 60u);
    CHECK(u.clean.size() == u.noisy.size());
    CHECK(u.snr_db >= 0.0);
    CHECK(u.snr_db <= 30.0);
    CHECK(std::abs(u.measured_snr_db - u.snr_db) < 1e-6);
    for (int id : u.transcript) CHECK((id >= 0 && id < 40));
  }
  CHECK(ids.size() == 21u);
  CHECK(counts[0] == 15);
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 3);

  cfg.mix_then_rir = false;
  for (const Utterance& u : synthesize_corpus(cfg, 17).utterances) {
    CHECK(std::abs(u.measured_snr_db - u.snr_db) < 1e-6);
  }
}

TEST_CASE("build_corpus is reproducible on disk") {
  CorpusConfig cfg;
  cfg.total = 7;
  cfg.vocab_size = 25;
  cfg.transcript_max = 12;
  const auto a = scratch("crnnse_corpus_a"), b = scratch("crnnse_corpus_b");
  const auto rows = build_corpus(cfg, 42, a);
  build_corpus(cfg, 42, b);
  CHECK(rows.size() == 7u);
  CHECK(slurp(manifest_path(a)) == slurp(manifest_path(b)));
  CHECK(slurp(a / rows[3].noisy_path) == slurp(b / rows[3].noisy_path));
  CHECK(std::filesystem::exists(corpus_config_path(a)));

  const auto back = read_manifest(manifest_path(a));
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].transcript == rows[i].transcript);
    CHECK(back[i].words.size() == rows[i].transcript.size());
    CHECK(manifest_line(back[i]) == manifest_line(rows[i]));
  }
  const auto train = load_split(a, Split::Train);
  CHECK(train.size() == 5u);
  for (const Utterance& u : train) CHECK(u.clean.size() == u.noisy.size());
  CHECK(load_split(a, Split::Test).size() == 1u);

  const auto other = scratch("crnnse_corpus_c");
  build_corpus(cfg, 43, other);
  CHECK(slurp(manifest_path(a)) != slurp(manifest_path(other)));

  CorpusConfig bad = cfg;
  bad.snr_min_db = -1.0;
  CHECK_THROWS_AS(build_corpus(bad, 1, scratch("crnnse_corpus_bad")), ConfigError);
  CHECK_THROWS_AS(parse_manifest_line("{not json"), IoError);
}
