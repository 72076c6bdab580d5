// src/checkpoint.cpp

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

#include "crnnse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "crnnse/corpus.hpp"

namespace crnnse {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'R', 'N', 'N', 'S', 'E', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    buf_.append(p, sizeof(T));
  }
  void bytes(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  void text(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_ += s;
  }
  void floats(const Vector<float>& v) { bytes(v.data(), sizeof(float) * static_cast<std::size_t>(v.size())); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string source) : buf_(std::move(data)), source_(std::move(source)) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  std::string text(std::size_t max = 1u << 20) {
    const auto n = get<std::uint64_t>();
    if (n > max) fail("string field of " + std::to_string(n) + " bytes");
    return std::string(take(n), n);
  }
  void floats(Vector<float>& v) {
    const std::size_t n = sizeof(float) * static_cast<std::size_t>(v.size());
    std::memcpy(v.data(), take(n), n);
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  const char* take(std::size_t n) {
    if (n > buf_.size() - pos_) fail("unexpected end of file");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::string buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

void write_adam(Writer& w, const AdamState<float>& s) {
  w.put<std::int64_t>(s.step);
  for (double x : {s.lr, s.beta1, s.beta2, s.epsilon, s.weight_decay}) w.put<double>(x);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.m.size()));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    w.floats(s.m[i]);
    w.floats(s.v[i]);
  }
}

void read_adam(Reader& r, AdamState<float>& s, const std::vector<Tensor<float>*>& params) {
  s.step = r.get<std::int64_t>();
  s.lr = r.get<double>();
  s.beta1 = r.get<double>();
  s.beta2 = r.get<double>();
  s.epsilon = r.get<double>();
  s.weight_decay = r.get<double>();
  const auto slots = r.get<std::uint32_t>();
  if (slots != 0 && slots != params.size()) {
    r.fail("optimizer holds " + std::to_string(slots) + " slots for " + std::to_string(params.size()) +
           " parameters");
  }
  s.m.clear();
  s.v.clear();
  for (std::uint32_t i = 0; i < slots; ++i) {
    s.m.emplace_back(params[i]->size());
    s.v.emplace_back(params[i]->size());
    r.floats(s.m.back());
    r.floats(s.v.back());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto& params = const_cast<ModelParams<float>&>(ckpt.params);
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(Checkpoint::kVersion);
  KeyValueConfig meta = ckpt.metadata;
  meta.merge(ckpt.model.to_kv());
  w.text(meta.dump());

  const auto named = params.named();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->rank()));
    for (Index d : t->shape()) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.floats(t->data());
  }
  write_adam(w, ckpt.adam_crnn);
  write_adam(w, ckpt.adam_lm);
  w.put<std::uint8_t>(ckpt.curriculum.phase == Phase::Joint ? 1 : 0);
  w.put<double>(ckpt.curriculum.best_val_loss);
  w.put<std::int32_t>(ckpt.curriculum.epochs_since_improvement);
  w.put<std::int32_t>(ckpt.curriculum.switch_epoch);
  w.put<std::int32_t>(ckpt.epoch);
  write_file_atomic(path, w.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read checkpoint " + path.string());
  Reader r(std::move(data), path.string());

  char magic[sizeof(kMagic)];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  try {
    ckpt.metadata = KeyValueConfig::parse(r.text(), path.string() + " metadata");
    ckpt.model = ModelConfig::from_kv(ckpt.metadata, "desk");
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid metadata: ") + e.what());
  }
  ckpt.params = init_params<float>(ckpt.model, 0);

  auto named = ckpt.params.named();
  std::map<std::string, Tensor<float>*> by_name(named.begin(), named.end());
  const auto count = r.get<std::uint32_t>();
  if (count != named.size()) {
    r.fail("holds " + std::to_string(count) + " parameters, model layout expects " + std::to_string(named.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > 256) r.fail("parameter name too long");
    std::string name(len, '\0');
    for (char& c : name) c = r.get<char>();
    const auto it = by_name.find(name);
    if (it == by_name.end()) r.fail("unexpected parameter '" + name + "'");
    const auto rank = r.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t k = 0; k < rank && k < 8; ++k) shape.push_back(static_cast<Index>(r.get<std::uint64_t>()));
    if (shape != it->second->shape()) {
      r.fail("parameter '" + name + "' has shape " + shape_string(shape) + ", model layout expects " +
             shape_string(it->second->shape()));
    }
    r.floats(it->second->data());
    by_name.erase(it);
  }
  read_adam(r, ckpt.adam_crnn, ckpt.params.crnn_tensors());
  read_adam(r, ckpt.adam_lm, ckpt.params.lm_tensors());
  const auto phase = r.get<std::uint8_t>();
  if (phase > 1) r.fail("invalid curriculum phase");
  ckpt.curriculum.phase = phase == 1 ? Phase::Joint : Phase::DenoiseOnly;
  ckpt.curriculum.best_val_loss = r.get<double>();
  ckpt.curriculum.epochs_since_improvement = r.get<std::int32_t>();
  ckpt.curriculum.switch_epoch = r.get<std::int32_t>();
  ckpt.epoch = r.get<std::int32_t>();
  if (!r.done()) r.fail("trailing bytes");
  for (auto* t : ckpt.params.all_tensors()) {
    if (!t->all_finite()) r.fail("non-finite parameter values");
  }
  return ckpt;
}

void require_compatible(const Checkpoint& ckpt, const ModelConfig& expected) {
  const auto have = ckpt.model.to_kv().dump();
  const auto want = expected.to_kv().dump();
  if (have != want) {
    throw CheckpointError("checkpoint model layout differs from the requested configuration:\n  checkpoint: " +
                          have + "\n  requested:  " + want);
  }
}

}  // namespace crnnse
