// tests/unit/test_metrics.cpp

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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crnnse/metrics.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace crnnse;

namespace {

Eigen::VectorXd gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Plain recursion over the last symbol of each side; exponential but exact
// for the short sequences used here.
int edit_reference(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j) {
  if (i == 0) return static_cast<int>(j);
  if (j == 0) return static_cast<int>(i);
  const int sub = edit_reference(a, i - 1, b, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
  const int del = edit_reference(a, i - 1, b, j) + 1;
  const int ins = edit_reference(a, i, b, j - 1) + 1;
  return std::min({sub, del, ins});
}

std::vector<int> random_words(std::mt19937_64& rng, int max_len, int alphabet) {
  std::uniform_int_distribution<int> len(0, max_len), sym(0, alphabet - 1);
  std::vector<int> v(static_cast<std::size_t>(len(rng)));
  for (int& x : v) x = sym(rng);
  return v;
}

double db(double num, double den) { return std::clamp(10.0 * std::log10(num / den), -100.0, 100.0); }

}  // namespace

TEST_CASE("snr") {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd c = gaussian(1000, rng);
  CHECK(snr_db(c, c) == 100.0);

  Eigen::VectorXd n = gaussian(1000, rng);
  n *= c.norm() / n.norm();
  CHECK(std::abs(snr_db(c, c + n)) < 1e-12);

  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd a = gaussian(500, rng), e = a + 0.3 * gaussian(500, rng);
    long double num = 0, den = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      num += (long double)a(i) * a(i);
      den += (long double)(a(i) - e(i)) * (a(i) - e(i));
    }
    const double want = static_cast<double>(10.0L * std::log10(num / den));
    CHECK(std::abs(snr_db(a, e) - want) < 1e-9);
    CHECK(std::abs(snr_db(3.5 * a, 3.5 * e) - snr_db(a, e)) < 1e-9);
  }
  CHECK_THROWS_AS(snr_db(c, c.head(10)), DimensionError);
  CHECK_THROWS_AS(snr_db(Eigen::VectorXd::Zero(5), c.head(5)), PreconditionError);
}

TEST_CASE("log-spectral distance") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::MatrixXd c(6, 256);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  CHECK(lsd_db(c, c) == 0.0);
  // The floor is negligible once magnitudes are far above it.
  const Eigen::MatrixXd loud = 1e4 * c;
  CHECK(lsd_db(loud, 10.0 * loud) == doctest::Approx(20.0).epsilon(1e-11));

  Eigen::MatrixXd e(6, 256);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = u(rng);
  double total = 0.0;
  for (Eigen::Index t = 0; t < 6; ++t) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < 256; ++k) {
      const double d = 20.0 * std::log10((e(t, k) + 1e-8) / (c(t, k) + 1e-8));
      acc += d * d;
    }
    total += std::sqrt(acc / 256.0);
  }
  CHECK(lsd_db(c, e) == doctest::Approx(total / 6.0).epsilon(1e-12));
  CHECK_THROWS_AS(lsd_db(c, e.topRows(3)), DimensionError);
  CHECK_THROWS_AS(lsd_db(c, -e), PreconditionError);

  CHECK(frame_mse(c, c) == 0.0);
  CHECK(frame_mse(c, c.array() + 1.0) == doctest::Approx(256.0));
}

TEST_CASE("bss decomposition") {
  std::mt19937_64 rng(3);
  const Eigen::VectorXd s = gaussian(400, rng), n = gaussian(400, rng);
  const BssResult same = bss_eval(s, n, s);
  CHECK(same.sdr == 100.0);
  CHECK(same.sir == 100.0);
  CHECK(same.sar == 100.0);

  // Noise orthogonalized against the clean reference gives no target component.
  const Eigen::VectorXd n_perp = n - (n.dot(s) / s.squaredNorm()) * s;
  CHECK(bss_eval(s, n_perp, n_perp).sdr == -100.0);

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd c = gaussian(300, rng), z = gaussian(300, rng);
    const Eigen::VectorXd e = 0.9 * c + 0.2 * z + 0.1 * gaussian(300, rng);
    // Least squares onto span{c, z} through the 2x2 normal equations.
    const double cc = c.dot(c), cz = c.dot(z), zz = z.dot(z), ce = c.dot(e), ze = z.dot(e);
    const double det = cc * zz - cz * cz;
    const double a = (ce * zz - ze * cz) / det, b = (ze * cc - ce * cz) / det;
    const Eigen::VectorXd target = (ce / cc) * c;
    const Eigen::VectorXd both = a * c + b * z;
    const Eigen::VectorXd interf = both - target, artif = e - both;
    const BssResult r = bss_eval(c, z, e);
    CHECK(std::abs(r.sdr - db(target.squaredNorm(), (interf + artif).squaredNorm())) < 1e-6);
    CHECK(std::abs(r.sir - db(target.squaredNorm(), interf.squaredNorm())) < 1e-6);
    CHECK(std::abs(r.sar - db((target + interf).squaredNorm(), artif.squaredNorm())) < 1e-6);

    const BssComponents parts = bss_decompose(c, z, e);
    CHECK((parts.s_target + parts.e_interf + parts.e_artif - e).norm() <= 1e-9 * e.norm());
  }

  CHECK_THROWS_AS(bss_eval(s, 2.0 * s, s), PreconditionError);
  CHECK_THROWS_AS(bss_eval(Eigen::VectorXd::Zero(400), n, s), PreconditionError);
  CHECK_THROWS_AS(bss_eval(s, n.head(10), s), DimensionError);
}

TEST_CASE("edit distance examples") {
  const std::vector<int> abc{1, 2, 3}, axcd{1, 9, 3, 4}, a{1}, none;
  CHECK(edit_distance(abc, abc) == 0);
  CHECK(edit_distance(abc, axcd) == 2);
  CHECK(word_error_rate(abc, axcd) == doctest::Approx(2.0 / 3.0));
  CHECK(word_error_rate(a, none) == 1.0);
  CHECK(word_error_rate(none, none) == 0.0);
  CHECK(word_error_rate(none, abc) == 3.0);
}

TEST_CASE("edit distance against a recursive reference and metric axioms") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_words(rng, 6, 3), y = random_words(rng, 6, 3), z = random_words(rng, 6, 3);
    const int d = edit_distance(x, y);
    CHECK(d == edit_reference(x, x.size(), y, y.size()));
    CHECK(d == edit_distance(y, x));
    CHECK(edit_distance(x, z) <= d + edit_distance(y, z));
    CHECK((d == 0) == (x == y));
  }
}

TEST_CASE("report aggregation and serialization") {
  MetricReport r;
  UtteranceMetrics a, b;
  a.id = "u1";
  a.snr_db = 10.0;
  a.lsd = 2.0;
  a.edits = 0;
  a.ref_words = 4;
  a.correct = true;
  b.id = "u2";
  b.snr_db = 20.0;
  b.lsd = 4.0;
  b.edits = 3;
  b.ref_words = 2;
  b.wer = 1.5;
  r.rows = {a, b};
  r.aggregate();
  CHECK(r.summary.snr == 15.0);
  CHECK(r.summary.lsd == 3.0);
  CHECK(r.summary.wer == 0.5);
  CHECK(r.summary.ser == 0.5);

  const auto j = nlohmann::json::parse(r.json());
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  CHECK(keys == std::set<std::string>{"snr", "lsd", "mse", "sir", "sdr", "sar", "wer", "ser"});
  CHECK(j["ser"].get<double>() == 0.5);

  const std::string csv = r.csv();
  CHECK(csv.rfind("id,snr_db,lsd,mse,sir_db,sdr_db,sar_db,wer,correct\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("evaluating the clean reference gives the upper bound row") {
  CorpusConfig c;
  c.total = 7;
  c.vocab_size = 8;
  c.transcript_min = 2;
  c.transcript_max = 4;
  const Corpus corpus = synthesize_corpus(c, 9);
  const ModelConfig m = ModelConfig::preset("tiny");
  auto params = init_params<float>(m, 2);

  const MetricReport clean = evaluate(corpus.utterances, params, m, EstimateSource::Clean, 1);
  REQUIRE(clean.rows.size() == 7u);
  int wrong = 0;
  for (const auto& row : clean.rows) {
    CHECK(row.snr_db == 100.0);
    CHECK(row.sdr_db == 100.0);
    CHECK(row.sir_db == 100.0);
    CHECK(row.sar_db == 100.0);
    CHECK(row.lsd == 0.0);
    CHECK(row.mse == 0.0);
    CHECK(row.wer >= 0.0);
    wrong += row.correct ? 0 : 1;
  }
  CHECK(clean.summary.ser == doctest::Approx(wrong / 7.0));

  const MetricReport noisy = evaluate(corpus.utterances, params, m, EstimateSource::Noisy, 1);
  const MetricReport noisy3 = evaluate(corpus.utterances, params, m, EstimateSource::Noisy, 3);
  CHECK(noisy.csv() == noisy3.csv());
  CHECK(noisy.json() == noisy3.json());
  CHECK(noisy.summary.snr < 100.0);
  CHECK(noisy.summary.lsd > 0.0);

  const MetricReport model = evaluate(corpus.utterances, params, m, EstimateSource::Model, 2);
  for (const auto& row : model.rows) {
    CHECK(std::isfinite(row.snr_db));
    CHECK(std::abs(row.snr_db) <= 100.0);
  }
  CHECK_THROWS_AS(evaluate({}, params, m), PreconditionError);
  CHECK(parse_estimate_source("noisy") == EstimateSource::Noisy);
  CHECK_THROWS_AS(parse_estimate_source("other"), ConfigError);
}
