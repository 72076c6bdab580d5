// include/crnnse/corpus.hpp

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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crnnse/config.hpp"
#include "crnnse/signal.hpp"

namespace crnnse {

enum class Split { Train, Val, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
  int total() const { return train + val + test; }
};

/// 5:1:1 split of `total` utterances: train and val take the floor of their
/// share and test takes what is left (750 -> 535/107/108).
SplitCounts split_5_1_1(int total);

/// Synthetic corpus parameters. Either `total` (split 5:1:1) or explicit
/// train/val/test counts may be given; explicit counts win when any is set.
struct CorpusConfig {
  int total = 70;
  int train = 0;
  int val = 0;
  int test = 0;
  int vocab_size = 857;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  int noise_types = 25;
  int rir_count = 8;
  int transcript_min = 8;
  int transcript_max = 60;
  double word_ms = 120.0;
  double crossfade_ms = 10.0;
  double speech_rms = 0.05;
  int grammar_successors = 4;
  bool mix_then_rir = true;

  static constexpr int kMaxTranscript = 60;
  static constexpr int kMaxVocabulary = 896;

  SplitCounts split_counts() const;
  void validate() const;
  static CorpusConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

/// Harmonic pattern that stands in for a spoken word: a fundamental and
/// weights for harmonics 1..8, three of which are emphasized.
struct WordSignature {
  static constexpr int kHarmonics = 8;
  double f0 = 0.0;
  std::array<double, kHarmonics> weights{};
  std::array<int, 3> emphasized{};
};

/// Word inventory with deterministic signatures and a sparse bigram grammar.
///
/// Word ids are dense in [0, size). The sentence markers sit just above the
/// word range: eos() == size, bos() == size + 1, pad() == size + 2.
class Vocabulary {
 public:
  Vocabulary(int size, std::uint64_t seed, int successors = 4);

  int size() const { return size_; }
  int eos() const { return size_; }
  int bos() const { return size_ + 1; }
  int pad() const { return size_ + 2; }
  std::uint64_t seed() const { return seed_; }

  const WordSignature& signature(int id) const;
  std::string word(int id) const;
  /// Allowed next words after `id`; empty when the grammar is unconstrained.
  const std::vector<int>& successors(int id) const;

  std::vector<int> sample_transcript(int length, std::mt19937_64& rng) const;

 private:
  void check(int id) const;

  int size_;
  std::uint64_t seed_;
  std::vector<WordSignature> signatures_;
  std::vector<std::vector<int>> successors_;
};

/// Per-word harmonic segments joined with raised-cosine cross-fades.
/// Deterministic in (transcript, seed); the vocabulary fixes each word's pattern.
Waveform generate_clean(std::span<const int> transcript, const Vocabulary& vocab, std::uint64_t seed,
                        const CorpusConfig& config = {});

/// Samples occupied by one word segment and by the cross-fade between words.
Eigen::Index word_samples(const CorpusConfig& config, int sample_rate = 16000);
Eigen::Index crossfade_samples(const CorpusConfig& config, int sample_rate = 16000);

/// Noise generator `noise_type` in [0, 25): five families (white, pink,
/// babble-like harmonic mixtures, amplitude-modulated tones, band-limited
/// noise) with five parameter variants each.
Waveform generate_noise(int noise_type, Eigen::Index length, std::uint64_t seed, int sample_rate = 16000);

/// Synthetic room impulse response: direct path, sparse early reflections and
/// an exponentially decaying diffuse tail.
Waveform generate_rir(int rir_id, std::uint64_t seed, int sample_rate = 16000);

/// Linear convolution with the unit-energy-normalized RIR, truncated to len(x).
Waveform convolve_rir(const Waveform& x, const Waveform& rir);

/// Power ratio in dB of `clean` over `noise`.
double power_snr_db(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise);

/// Gain applied to `noise` (tiled or cropped to the clean length) by mix_at_snr.
double snr_gain(const Waveform& clean, const Eigen::VectorXd& noise, double snr_db);

/// Noise tiled or cropped to `length` samples.
Eigen::VectorXd fit_length(const Eigen::VectorXd& noise, Eigen::Index length);

/// clean + a * noise with a chosen so that the mixture has the requested SNR.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

struct Utterance {
  std::string id;
  Waveform clean;
  Waveform noisy;
  std::vector<int> transcript;
  double snr_db = 0.0;
  int rir_id = 0;
  int noise_type = 0;
  Split split = Split::Train;
  /// SNR measured between the clean signal and the scaled noise at mixing time.
  double measured_snr_db = 0.0;
};

struct ManifestRow {
  std::string id;
  std::string clean_path;
  std::string noisy_path;
  std::vector<int> transcript;
  std::vector<std::string> words;
  double snr_db = 0.0;
  int rir_id = 0;
  Split split = Split::Train;
};

/// Utterance number `index` of the corpus defined by (config, seed).
Utterance synthesize_utterance(int index, const CorpusConfig& config, std::uint64_t seed, const Vocabulary& vocab);

struct Corpus {
  CorpusConfig config;
  std::uint64_t seed = 0;
  std::vector<Utterance> utterances;
};

/// In-memory corpus; a pure function of (config, seed).
Corpus synthesize_corpus(const CorpusConfig& config, std::uint64_t seed);

/// Writes clean/ and noisy/ WAVs, manifest.jsonl and corpus.cfg under `out_dir`.
std::vector<ManifestRow> build_corpus(const CorpusConfig& config, std::uint64_t seed,
                                      const std::filesystem::path& out_dir);

std::string manifest_line(const ManifestRow& row);
ManifestRow parse_manifest_line(const std::string& line);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Utterances of one split, read back from a corpus directory's manifest and WAVs.
std::vector<Utterance> load_split(const std::filesystem::path& corpus_dir, Split split);

/// Corpus directory layout helpers.
std::filesystem::path manifest_path(const std::filesystem::path& corpus_dir);
std::filesystem::path corpus_config_path(const std::filesystem::path& corpus_dir);

/// Writes `text` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Deterministic 64-bit mixing used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace crnnse
