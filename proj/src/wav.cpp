// src/wav.cpp

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

#include "crnnse/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace crnnse {

namespace {

constexpr int kSupportedRate = 16000;

std::int16_t to_pcm(double x) {
  const double scaled = std::nearbyint(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}

std::uint16_t get_u16(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

}  // namespace

Eigen::VectorXd quantize_pcm16(const Eigen::VectorXd& samples) {
  return samples.unaryExpr([](double x) { return to_pcm(x) / 32768.0; });
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.sample_rate != kSupportedRate) {
    throw IoError("write_wav: only " + std::to_string(kSupportedRate) + " Hz is supported");
  }
  const auto n = static_cast<std::uint32_t>(w.size());
  std::vector<char> bytes;
  bytes.reserve(44 + 2 * static_cast<std::size_t>(n));
  for (char c : std::string("RIFF")) bytes.push_back(c);
  put_u32(bytes, 36 + 2 * n);
  for (char c : std::string("WAVEfmt ")) bytes.push_back(c);
  put_u32(bytes, 16);
  put_u16(bytes, 1);  // PCM
  put_u16(bytes, 1);  // mono
  put_u32(bytes, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(bytes, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(bytes, 2);
  put_u16(bytes, 16);
  for (char c : std::string("data")) bytes.push_back(c);
  put_u32(bytes, 2 * n);
  for (Eigen::Index i = 0; i < w.size(); ++i) put_u16(bytes, static_cast<std::uint16_t>(to_pcm(w.samples(i))));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_wav: cannot open " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write_wav: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("write_wav: cannot move into place " + path.string() + ": " + ec.message());
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_wav: cannot open " + path.string());
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  auto tag = [&](std::size_t at, const char* s) { return at + 4 <= b.size() && std::equal(s, s + 4, b.begin() + at); };
  if (b.size() < 12 || !tag(0, "RIFF") || !tag(8, "WAVE")) throw FormatError("read_wav: not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t len = get_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + len > b.size()) throw IoError("read_wav: truncated chunk in " + path.string());
    if (tag(at, "fmt ")) {
      if (len < 16) throw IoError("read_wav: short fmt chunk in " + path.string());
      format = get_u16(b, body);
      channels = get_u16(b, body + 2);
      rate = get_u32(b, body + 4);
      bits = get_u16(b, body + 14);
      have_fmt = true;
    } else if (tag(at, "data")) {
      if (!have_fmt) throw IoError("read_wav: data chunk before fmt chunk in " + path.string());
      if (format != 1 || bits != 16) throw FormatError("read_wav: only 16-bit PCM is supported: " + path.string());
      if (channels != 1) throw FormatError("read_wav: only mono is supported: " + path.string());
      if (rate != kSupportedRate) {
        throw FormatError("read_wav: sample rate " + std::to_string(rate) + " Hz unsupported (need 16000): " +
                      path.string());
      }
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(len / 2);
      for (std::uint32_t i = 0; i < len / 2; ++i) {
        w.samples(i) = static_cast<std::int16_t>(get_u16(b, body + 2 * i)) / 32768.0;
      }
      return w;
    }
    at = body + len + (len & 1);
  }
  throw IoError("read_wav: no data chunk in " + path.string());
}

}  // namespace crnnse
