// src/corpus.cpp

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

#include "crnnse/corpus.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "crnnse/wav.hpp"
#include "json.hpp"

namespace crnnse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::array<int, 3>> harmonic_subsets() {
  std::vector<std::array<int, 3>> out;
  for (int a = 1; a <= WordSignature::kHarmonics; ++a)
    for (int b = a + 1; b <= WordSignature::kHarmonics; ++b)
      for (int c = b + 1; c <= WordSignature::kHarmonics; ++c) out.push_back({a, b, c});
  return out;
}

double mean_power(const Eigen::VectorXd& x) { return x.size() ? x.squaredNorm() / double(x.size()) : 0.0; }

void normalize_rms(Eigen::VectorXd& x) {
  const double p = mean_power(x);
  if (p > 0.0) x /= std::sqrt(p);
}

Eigen::VectorXd gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = nd(rng);
  return x;
}

Eigen::VectorXd white_noise(Eigen::Index n, int variant, std::mt19937_64& rng) {
  Eigen::VectorXd x = gaussian(n, rng);
  const double a = 0.15 * variant;
  for (Eigen::Index i = 1; i < n; ++i) x(i) += a * x(i - 1);
  return x;
}

Eigen::VectorXd pink_noise(Eigen::Index n, int variant, std::mt19937_64& rng) {
  const Eigen::VectorXd w = gaussian(n, rng);
  Eigen::VectorXd x(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double white = w(i);
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    x(i) = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  const double leak = 0.2 * variant;
  for (Eigen::Index i = 1; i < n; ++i) x(i) += leak * x(i - 1);
  return x;
}

Eigen::VectorXd babble_noise(Eigen::Index n, int variant, int sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f0d(90.0, 300.0), segd(0.08, 0.2), ampd(0.3, 1.0), phd(0.0, kTwoPi);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const int talkers = 3 + variant;
  for (int k = 0; k < talkers; ++k) {
    double phase = phd(rng);
    double f0 = f0d(rng), amp = ampd(rng);
    Eigen::Index next_change = static_cast<Eigen::Index>(segd(rng) * sample_rate);
    double smooth_amp = amp;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == next_change) {
        f0 = f0d(rng);
        amp = ampd(rng);
        next_change += static_cast<Eigen::Index>(segd(rng) * sample_rate);
      }
      smooth_amp += 0.002 * (amp - smooth_amp);
      phase += kTwoPi * f0 / sample_rate;
      if (phase > kTwoPi) phase -= kTwoPi;
      double v = 0.0;
      for (int h = 1; h <= 6; ++h) v += std::sin(h * phase) / h;
      x(i) += smooth_amp * v;
    }
  }
  return x;
}

Eigen::VectorXd am_tones(Eigen::Index n, int variant, int sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> fd(150.0, 3000.0), phd(0.0, kTwoPi), depthd(0.5, 1.0);
  std::uniform_real_distribution<double> rated(1.0 + variant, 4.0 + 2.0 * variant);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const int tones = 2 + variant % 3;
  for (int k = 0; k < tones; ++k) {
    const double f = fd(rng), rate = rated(rng), depth = depthd(rng), p0 = phd(rng), p1 = phd(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = double(i) / sample_rate;
      x(i) += (1.0 - depth * 0.5 * (1.0 + std::sin(kTwoPi * rate * t + p1))) * std::sin(kTwoPi * f * t + p0);
    }
  }
  return x;
}

Eigen::VectorXd band_noise(Eigen::Index n, int variant, int sample_rate, std::mt19937_64& rng) {
  const Eigen::VectorXd w = gaussian(n, rng);
  const double fc = 300.0 + 600.0 * variant;
  const double bw = 200.0 + 100.0 * variant;
  const double r = std::exp(-std::numbers::pi * bw / sample_rate);
  const double a1 = 2.0 * r * std::cos(kTwoPi * fc / sample_rate), a2 = -r * r;
  Eigen::VectorXd x(n);
  double y1 = 0, y2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = w(i) + a1 * y1 + a2 * y2;
    x(i) = y;
    y2 = y1;
    y1 = y;
  }
  return x;
}

Eigen::FFT<double>& half_fft() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return engine;
}

std::string syllable(int k) {
  static const char* consonants = "bdfgklmnprstvz";
  static const char* vowels = "aeiou";
  return {consonants[k / 5], vowels[k % 5]};
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined state
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

SplitCounts split_5_1_1(int total) {
  if (total < 0) throw ConfigError("field 'total': must be non-negative");
  SplitCounts c;
  c.train = total * 5 / 7;
  c.val = total / 7;
  c.test = total - c.train - c.val;
  return c;
}

// ---------------------------------------------------------------------------
// CorpusConfig

SplitCounts CorpusConfig::split_counts() const {
  if (train > 0 || val > 0 || test > 0) return {train, val, test};
  return split_5_1_1(total);
}

void CorpusConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& what) { throw ConfigError("field '" + field + "': " + what); };
  if (total < 0 || train < 0 || val < 0 || test < 0) bad("total", "utterance counts must be non-negative");
  if (split_counts().total() < 1) bad("total", "corpus must contain at least one utterance");
  if (vocab_size < 1 || vocab_size > kMaxVocabulary) bad("vocab_size", "must be in [1, " + std::to_string(kMaxVocabulary) + "]");
  if (snr_min_db < 0.0 || snr_max_db > 30.0 || snr_min_db > snr_max_db) bad("snr_min_db", "SNR range must lie within [0, 30] dB");
  if (noise_types < 1 || noise_types > 25) bad("noise_types", "must be in [1, 25]");
  if (rir_count < 1) bad("rir_count", "must be positive");
  if (transcript_min < 1 || transcript_max > kMaxTranscript || transcript_min > transcript_max) {
    bad("transcript_max", "transcript lengths must satisfy 1 <= min <= max <= 60");
  }
  if (!(word_ms > 0.0)) bad("word_ms", "must be positive");
  if (crossfade_ms < 0.0 || crossfade_ms * 2.0 > word_ms) bad("crossfade_ms", "must be in [0, word_ms / 2]");
  if (!(speech_rms > 0.0) || speech_rms > 0.3) bad("speech_rms", "must be in (0, 0.3]");
  if (grammar_successors < 0) bad("grammar_successors", "must be non-negative");
}

CorpusConfig CorpusConfig::from_kv(const KeyValueConfig& kv) {
  kv.require_known({"total", "train", "val", "test", "vocab_size", "snr_min_db", "snr_max_db", "noise_types",
                    "rir_count", "transcript_min", "transcript_max", "word_ms", "crossfade_ms", "speech_rms",
                    "grammar_successors", "mix_then_rir", "seed"});
  CorpusConfig c;
  c.total = static_cast<int>(kv.get_int("total", c.total));
  c.train = static_cast<int>(kv.get_int("train", 0));
  c.val = static_cast<int>(kv.get_int("val", 0));
  c.test = static_cast<int>(kv.get_int("test", 0));
  c.vocab_size = static_cast<int>(kv.get_int("vocab_size", c.vocab_size));
  c.snr_min_db = kv.get_double("snr_min_db", c.snr_min_db);
  c.snr_max_db = kv.get_double("snr_max_db", c.snr_max_db);
  c.noise_types = static_cast<int>(kv.get_int("noise_types", c.noise_types));
  c.rir_count = static_cast<int>(kv.get_int("rir_count", c.rir_count));
  c.transcript_min = static_cast<int>(kv.get_int("transcript_min", c.transcript_min));
  c.transcript_max = static_cast<int>(kv.get_int("transcript_max", c.transcript_max));
  c.word_ms = kv.get_double("word_ms", c.word_ms);
  c.crossfade_ms = kv.get_double("crossfade_ms", c.crossfade_ms);
  c.speech_rms = kv.get_double("speech_rms", c.speech_rms);
  c.grammar_successors = static_cast<int>(kv.get_int("grammar_successors", c.grammar_successors));
  c.mix_then_rir = kv.get_bool("mix_then_rir", c.mix_then_rir);
  c.validate();
  return c;
}

KeyValueConfig CorpusConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("total", std::to_string(total));
  kv.set("train", std::to_string(train));
  kv.set("val", std::to_string(val));
  kv.set("test", std::to_string(test));
  kv.set("vocab_size", std::to_string(vocab_size));
  kv.set("snr_min_db", format_double(snr_min_db));
  kv.set("snr_max_db", format_double(snr_max_db));
  kv.set("noise_types", std::to_string(noise_types));
  kv.set("rir_count", std::to_string(rir_count));
  kv.set("transcript_min", std::to_string(transcript_min));
  kv.set("transcript_max", std::to_string(transcript_max));
  kv.set("word_ms", format_double(word_ms));
  kv.set("crossfade_ms", format_double(crossfade_ms));
  kv.set("speech_rms", format_double(speech_rms));
  kv.set("grammar_successors", std::to_string(grammar_successors));
  kv.set("mix_then_rir", mix_then_rir ? "on" : "off");
  return kv;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(int size, std::uint64_t seed, int successors) : size_(size), seed_(seed) {
  if (size < 1 || size > CorpusConfig::kMaxVocabulary) {
    throw ConfigError("field 'vocab_size': must be in [1, " + std::to_string(CorpusConfig::kMaxVocabulary) + "]");
  }
  const auto subsets = harmonic_subsets();
  const int pitches = (size + static_cast<int>(subsets.size()) - 1) / static_cast<int>(subsets.size());
  std::mt19937_64 rng(mix_seed(seed, 0x766f636162ULL));
  std::vector<int> order(subsets.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  signatures_.resize(static_cast<std::size_t>(size));
  for (int id = 0; id < size; ++id) {
    WordSignature& s = signatures_[static_cast<std::size_t>(id)];
    s.f0 = 120.0 * std::pow(2.0, double(id % pitches) / pitches);
    s.emphasized = subsets[static_cast<std::size_t>(order[static_cast<std::size_t>(id / pitches)])];
    s.weights.fill(0.12);
    std::array<double, 3> levels{1.0, 0.75, 0.55};
    std::shuffle(levels.begin(), levels.end(), rng);
    for (int k = 0; k < 3; ++k) s.weights[static_cast<std::size_t>(s.emphasized[static_cast<std::size_t>(k)] - 1)] = levels[static_cast<std::size_t>(k)];
  }

  successors_.resize(static_cast<std::size_t>(size));
  if (successors > 0 && successors < size) {
    std::vector<int> all(static_cast<std::size_t>(size));
    std::iota(all.begin(), all.end(), 0);
    for (int id = 0; id < size; ++id) {
      std::shuffle(all.begin(), all.end(), rng);
      successors_[static_cast<std::size_t>(id)].assign(all.begin(), all.begin() + successors);
      std::sort(successors_[static_cast<std::size_t>(id)].begin(), successors_[static_cast<std::size_t>(id)].end());
    }
  }
}

void Vocabulary::check(int id) const {
  if (id < 0 || id >= size_) {
    throw PreconditionError("word id " + std::to_string(id) + " outside [0, " + std::to_string(size_) + ")");
  }
}

const WordSignature& Vocabulary::signature(int id) const {
  check(id);
  return signatures_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::word(int id) const {
  check(id);
  return syllable(id / 70 % 70) + syllable(id % 70);
}

const std::vector<int>& Vocabulary::successors(int id) const {
  check(id);
  return successors_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::sample_transcript(int length, std::mt19937_64& rng) const {
  if (length < 1) throw PreconditionError("sample_transcript: length must be positive");
  std::uniform_int_distribution<int> any(0, size_ - 1);
  std::vector<int> out{any(rng)};
  while (static_cast<int>(out.size()) < length) {
    const auto& next = successors(out.back());
    if (next.empty()) {
      out.push_back(any(rng));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, next.size() - 1);
      out.push_back(next[pick(rng)]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Signals

Eigen::Index word_samples(const CorpusConfig& config, int sample_rate) {
  return static_cast<Eigen::Index>(std::lround(config.word_ms * sample_rate / 1000.0));
}

Eigen::Index crossfade_samples(const CorpusConfig& config, int sample_rate) {
  return static_cast<Eigen::Index>(std::lround(config.crossfade_ms * sample_rate / 1000.0));
}

Waveform generate_clean(std::span<const int> transcript, const Vocabulary& vocab, std::uint64_t seed,
                        const CorpusConfig& config) {
  if (transcript.empty()) throw PreconditionError("generate_clean: empty transcript");
  if (static_cast<int>(transcript.size()) > CorpusConfig::kMaxTranscript) {
    throw PreconditionError("generate_clean: transcript of " + std::to_string(transcript.size()) +
                            " words exceeds the 60-word cap");
  }
  for (int id : transcript) vocab.signature(id);

  Waveform w;
  const int fs = w.sample_rate;
  const Eigen::Index L = word_samples(config, fs);
  const Eigen::Index C = crossfade_samples(config, fs);
  const Eigen::Index step = L - C;
  const auto n = static_cast<Eigen::Index>(transcript.size());
  w.samples = Eigen::VectorXd::Zero(n * step + C);

  Eigen::VectorXd envelope = Eigen::VectorXd::Ones(L);
  for (Eigen::Index i = 0; i < C; ++i) {
    const double r = 0.5 - 0.5 * std::cos(std::numbers::pi * (i + 0.5) / C);
    envelope(i) = r;
    envelope(L - 1 - i) = r;
  }

  std::mt19937_64 rng(mix_seed(seed, 0x636c65616eULL));
  std::uniform_real_distribution<double> phd(0.0, kTwoPi), jitter(0.9, 1.1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const WordSignature& sig = vocab.signature(transcript[static_cast<std::size_t>(k)]);
    std::array<double, WordSignature::kHarmonics> phase{};
    for (auto& p : phase) p = phd(rng);
    const double gain = jitter(rng);
    Eigen::VectorXd seg(L);
    for (Eigen::Index i = 0; i < L; ++i) {
      double v = 0.0;
      for (int h = 1; h <= WordSignature::kHarmonics; ++h) {
        v += sig.weights[static_cast<std::size_t>(h - 1)] *
             std::sin(kTwoPi * h * sig.f0 * double(i) / fs + phase[static_cast<std::size_t>(h - 1)]);
      }
      seg(i) = v;
    }
    normalize_rms(seg);
    w.samples.segment(k * step, L) += (config.speech_rms * gain) * seg.cwiseProduct(envelope);
  }
  return w;
}

Waveform generate_noise(int noise_type, Eigen::Index length, std::uint64_t seed, int sample_rate) {
  if (noise_type < 0 || noise_type >= 25) throw PreconditionError("generate_noise: type must be in [0, 25)");
  if (length < 1) throw PreconditionError("generate_noise: length must be positive");
  std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365ULL + static_cast<std::uint64_t>(noise_type)));
  const int family = noise_type % 5, variant = noise_type / 5;
  Waveform w;
  w.sample_rate = sample_rate;
  switch (family) {
    case 0: w.samples = white_noise(length, variant, rng); break;
    case 1: w.samples = pink_noise(length, variant, rng); break;
    case 2: w.samples = babble_noise(length, variant, sample_rate, rng); break;
    case 3: w.samples = am_tones(length, variant, sample_rate, rng); break;
    default: w.samples = band_noise(length, variant, sample_rate, rng); break;
  }
  normalize_rms(w.samples);
  return w;
}

Waveform generate_rir(int rir_id, std::uint64_t seed, int sample_rate) {
  std::mt19937_64 rng(mix_seed(seed, 0x726972ULL + static_cast<std::uint64_t>(rir_id)));
  std::uniform_real_distribution<double> t60d(0.08, 0.25), ampd(0.15, 0.4), signd(-1.0, 1.0);
  std::uniform_int_distribution<int> delayd(16, 160);
  const double t60 = t60d(rng);
  const auto len = static_cast<Eigen::Index>(t60 * sample_rate);
  Waveform h;
  h.sample_rate = sample_rate;
  h.samples = Eigen::VectorXd::Zero(len);
  h.samples(0) = 1.0;
  for (int k = 0; k < 4; ++k) {
    const double a = ampd(rng);
    h.samples(delayd(rng)) += signd(rng) < 0.0 ? -a : a;
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index n = 160; n < len; ++n) {
    h.samples(n) += 0.05 * nd(rng) * std::exp(-6.908 * double(n) / (t60 * sample_rate));
  }
  return h;
}

Waveform convolve_rir(const Waveform& x, const Waveform& rir) {
  if (x.size() == 0 || rir.size() == 0) throw PreconditionError("convolve_rir: empty signal or impulse response");
  if (x.sample_rate != rir.sample_rate) {
    throw PreconditionError("convolve_rir: sample rate mismatch (" + std::to_string(x.sample_rate) + " vs " +
                            std::to_string(rir.sample_rate) + ")");
  }
  const double energy = rir.samples.squaredNorm();
  if (!(energy > 0.0)) throw PreconditionError("convolve_rir: impulse response has zero energy");

  const Eigen::Index full = x.size() + rir.size() - 1;
  Eigen::Index nfft = 1;
  while (nfft < full) nfft <<= 1;
  std::vector<double> a(static_cast<std::size_t>(nfft), 0.0), b(static_cast<std::size_t>(nfft), 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) a[static_cast<std::size_t>(i)] = x.samples(i);
  const double norm = 1.0 / std::sqrt(energy);
  for (Eigen::Index i = 0; i < rir.size(); ++i) b[static_cast<std::size_t>(i)] = rir.samples(i) * norm;
  std::vector<std::complex<double>> A, B;
  half_fft().fwd(A, a);
  half_fft().fwd(B, b);
  for (std::size_t k = 0; k < A.size(); ++k) A[k] *= B[k];
  std::vector<double> y;
  half_fft().inv(y, A, nfft);

  Waveform out;
  out.sample_rate = x.sample_rate;
  out.samples.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.samples(i) = y[static_cast<std::size_t>(i)];
  return out;
}

double power_snr_db(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise) {
  return 10.0 * std::log10(clean.squaredNorm() / noise.squaredNorm());
}

Eigen::VectorXd fit_length(const Eigen::VectorXd& noise, Eigen::Index length) {
  if (noise.size() == 0) throw PreconditionError("fit_length: empty noise");
  Eigen::VectorXd out(length);
  for (Eigen::Index i = 0; i < length; ++i) out(i) = noise(i % noise.size());
  return out;
}

double snr_gain(const Waveform& clean, const Eigen::VectorXd& noise, double snr_db) {
  const double pc = mean_power(clean.samples);
  const double pn = mean_power(noise);
  if (!(pc > 0.0)) throw PreconditionError("mix_at_snr: clean signal has zero power");
  if (!(pn > 0.0)) throw PreconditionError("mix_at_snr: noise has zero power");
  return std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.sample_rate != noise.sample_rate) throw PreconditionError("mix_at_snr: sample rate mismatch");
  const Eigen::VectorXd n = fit_length(noise.samples, clean.size());
  const double a = snr_gain(clean, n, snr_db);
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples = clean.samples + a * n;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus assembly

Utterance synthesize_utterance(int index, const CorpusConfig& config, std::uint64_t seed, const Vocabulary& vocab) {
  const SplitCounts counts = config.split_counts();
  if (index < 0 || index >= counts.total()) throw PreconditionError("synthesize_utterance: index out of range");
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(index) + 1));

  Utterance u;
  char id[32];
  std::snprintf(id, sizeof(id), "utt%05d", index);
  u.id = id;
  u.split = index < counts.train ? Split::Train : index < counts.train + counts.val ? Split::Val : Split::Test;

  std::uniform_int_distribution<int> lend(config.transcript_min, config.transcript_max);
  u.transcript = vocab.sample_transcript(lend(rng), rng);
  u.clean = generate_clean(u.transcript, vocab, rng(), config);

  std::uniform_real_distribution<double> snrd(config.snr_min_db, config.snr_max_db);
  u.snr_db = snrd(rng);
  u.noise_type = std::uniform_int_distribution<int>(0, config.noise_types - 1)(rng);
  u.rir_id = std::uniform_int_distribution<int>(0, config.rir_count - 1)(rng);
  const Waveform noise = generate_noise(u.noise_type, u.clean.size(), rng(), u.clean.sample_rate);
  const Waveform rir = generate_rir(u.rir_id, seed, u.clean.sample_rate);

  if (config.mix_then_rir) {
    const double a = snr_gain(u.clean, noise.samples, u.snr_db);
    u.measured_snr_db = power_snr_db(u.clean.samples, a * noise.samples);
    u.noisy = convolve_rir(mix_at_snr(u.clean, noise, u.snr_db), rir);
  } else {
    const Waveform reverberant = convolve_rir(u.clean, rir);
    const double a = snr_gain(reverberant, noise.samples, u.snr_db);
    u.measured_snr_db = power_snr_db(reverberant.samples, a * noise.samples);
    u.noisy = mix_at_snr(reverberant, noise, u.snr_db);
  }
  return u;
}

Corpus synthesize_corpus(const CorpusConfig& config, std::uint64_t seed) {
  config.validate();
  Corpus c;
  c.config = config;
  c.seed = seed;
  const Vocabulary vocab(config.vocab_size, seed, config.grammar_successors);
  const int n = config.split_counts().total();
  c.utterances.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c.utterances.push_back(synthesize_utterance(i, config, seed, vocab));
  return c;
}

std::filesystem::path manifest_path(const std::filesystem::path& corpus_dir) { return corpus_dir / "manifest.jsonl"; }
std::filesystem::path corpus_config_path(const std::filesystem::path& corpus_dir) { return corpus_dir / "corpus.cfg"; }

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::vector<ManifestRow> build_corpus(const CorpusConfig& config, std::uint64_t seed,
                                      const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  for (const auto& dir : {out_dir, out_dir / "clean", out_dir / "noisy"}) {
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
  const Vocabulary vocab(config.vocab_size, seed, config.grammar_successors);
  const int n = config.split_counts().total();
  std::vector<ManifestRow> rows;
  std::string manifest;
  for (int i = 0; i < n; ++i) {
    const Utterance u = synthesize_utterance(i, config, seed, vocab);
    ManifestRow row;
    row.id = u.id;
    row.clean_path = "clean/" + u.id + ".wav";
    row.noisy_path = "noisy/" + u.id + ".wav";
    row.transcript = u.transcript;
    for (int w : u.transcript) row.words.push_back(vocab.word(w));
    row.snr_db = u.snr_db;
    row.rir_id = u.rir_id;
    row.split = u.split;
    write_wav(out_dir / row.clean_path, u.clean);
    write_wav(out_dir / row.noisy_path, u.noisy);
    manifest += manifest_line(row) + "\n";
    rows.push_back(std::move(row));
  }
  KeyValueConfig kv = config.to_kv();
  kv.set("seed", std::to_string(seed));
  write_file_atomic(corpus_config_path(out_dir), kv.dump());
  write_file_atomic(manifest_path(out_dir), manifest);
  return rows;
}

std::string manifest_line(const ManifestRow& row) {
  nlohmann::ordered_json j;
  j["id"] = row.id;
  j["clean_path"] = row.clean_path;
  j["noisy_path"] = row.noisy_path;
  j["transcript"] = row.transcript;
  j["words"] = row.words;
  j["snr_db"] = row.snr_db;
  j["rir_id"] = row.rir_id;
  j["split"] = to_string(row.split);
  return j.dump();
}

ManifestRow parse_manifest_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestRow row;
    row.id = j.at("id").get<std::string>();
    row.clean_path = j.at("clean_path").get<std::string>();
    row.noisy_path = j.at("noisy_path").get<std::string>();
    row.transcript = j.at("transcript").get<std::vector<int>>();
    row.words = j.at("words").get<std::vector<std::string>>();
    row.snr_db = j.at("snr_db").get<double>();
    row.rir_id = j.at("rir_id").get<int>();
    row.split = parse_split(j.at("split").get<std::string>());
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest line: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("malformed manifest line: ") + e.what());
  }
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) rows.push_back(parse_manifest_line(line));
  }
  return rows;
}

std::vector<Utterance> load_split(const std::filesystem::path& corpus_dir, Split split) {
  std::vector<Utterance> out;
  for (const ManifestRow& row : read_manifest(manifest_path(corpus_dir))) {
    if (row.split != split) continue;
    Utterance u;
    u.id = row.id;
    u.clean = read_wav(corpus_dir / row.clean_path);
    u.noisy = read_wav(corpus_dir / row.noisy_path);
    if (u.clean.size() != u.noisy.size()) {
      throw IoError(row.id + ": clean and noisy files have different lengths");
    }
    u.transcript = row.transcript;
    u.snr_db = row.snr_db;
    u.rir_id = row.rir_id;
    u.split = row.split;
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace crnnse
