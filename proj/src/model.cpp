// src/model.cpp

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

#include "crnnse/model.hpp"

#include <set>
#include <sstream>

namespace crnnse {

namespace {

std::vector<ConvSpec> conv_specs(Index f1, Index f2, Index f3) {
  return {{f1, 7, 5, 3, 1, 2, 1}, {f2, 5, 3, 3, 1, 2, 1}, {f3, 5, 1, 3, 1, 2, 1}};
}

std::string conv_key(std::size_t i) { return "model.conv" + std::to_string(i); }

std::string conv_value(const ConvSpec& s) {
  std::ostringstream os;
  os << s.filters << "," << s.kernel_h << "," << s.kernel_w << "," << s.stride_h << "," << s.stride_w << ","
     << s.dilation_h << "," << s.dilation_w;
  return os.str();
}

}  // namespace

std::vector<std::array<Index, 3>> CrnnConfig::conv_shapes() const {
  std::vector<std::array<Index, 3>> shapes;
  Index c = 1, h = feature_dim, w = context_frames;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const ConvSpec& s = conv[i];
    const Index hh = conv_output_extent(h, s.kernel_h, s.stride_h, s.dilation_h);
    const Index ww = conv_output_extent(w, s.kernel_w, s.stride_w, s.dilation_w);
    if (hh < 1 || ww < 1) {
      throw ConfigError("conv layer " + std::to_string(i) + ": kernel does not fit a " + std::to_string(c) + "x" +
                        std::to_string(h) + "x" + std::to_string(w) + " input along the " +
                        (hh < 1 ? "frequency" : "time") + " axis");
    }
    c = s.filters;
    h = hh;
    w = ww;
    shapes.push_back({c, h, w});
  }
  return shapes;
}

Index CrnnConfig::conv_output_size() const {
  const auto shapes = conv_shapes();
  if (shapes.empty()) return feature_dim * context_frames;
  const auto& s = shapes.back();
  return s[0] * s[1] * s[2];
}

void CrnnConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("field 'model.feature_dim': must be positive");
  if (context_frames < 1) throw ConfigError("field 'model.context_frames': must be positive");
  if (conv.empty()) throw ConfigError("field 'model.conv_layers': at least one conv layer is required");
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const ConvSpec& s = conv[i];
    if (s.filters < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.stride_h < 1 || s.stride_w < 1 || s.dilation_h < 1 ||
        s.dilation_w < 1) {
      throw ConfigError("field '" + conv_key(i) + "': every entry must be positive");
    }
  }
  conv_shapes();
  if (lstm_layers < 1) throw ConfigError("field 'model.lstm_layers': must be at least 1");
  if (hidden < 1) throw ConfigError("field 'model.hidden': must be positive");
  if (out_dim != feature_dim) throw ConfigError("field 'model.out_dim': must equal the feature dimension");
  if (conv_activation != "relu") throw ConfigError("field 'model.conv_activation': only 'relu' is supported");
  if (output_activation != "softplus") {
    throw ConfigError("field 'model.output_activation': only 'softplus' is supported");
  }
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig m;
  if (name == "paper") {
    m.crnn.conv = conv_specs(16, 32, 64);
    m.crnn.hidden = 1072;
    m.lm.vocab_size = 857;
    m.lm.embed_dim = 256;
  } else if (name == "desk") {
    m.crnn.conv = conv_specs(8, 16, 32);
    m.crnn.hidden = 64;
    m.lm.vocab_size = 64;
    m.lm.embed_dim = 32;
  } else if (name == "tiny") {
    m.crnn.conv = conv_specs(2, 4, 8);
    m.crnn.hidden = 8;
    m.lm.vocab_size = 8;
    m.lm.embed_dim = 4;
  } else {
    throw ConfigError("field 'preset': unknown preset '" + name + "' (expected desk, paper or tiny)");
  }
  return m;
}

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv, const std::string& base_preset) {
  ModelConfig m = preset(kv.get_string("model.preset", base_preset));
  auto& c = m.crnn;
  c.feature_dim = kv.get_int("model.feature_dim", c.feature_dim);
  c.context_frames = kv.get_int("model.context_frames", c.context_frames);
  const auto layers = kv.get_int("model.conv_layers", static_cast<long long>(c.conv.size()));
  if (layers < 1 || layers > 16) throw ConfigError(kv.source() + ": field 'model.conv_layers': expected 1..16");
  c.conv.resize(static_cast<std::size_t>(layers), c.conv.empty() ? ConvSpec{} : c.conv.back());
  for (std::size_t i = 0; i < c.conv.size(); ++i) {
    if (!kv.has(conv_key(i))) continue;
    const auto v = kv.get_int_list(conv_key(i), {});
    if (v.size() != 7) {
      throw ConfigError(kv.source() + ": field '" + conv_key(i) +
                        "': expected 7 integers (filters,kh,kw,sh,sw,dh,dw)");
    }
    c.conv[i] = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  c.lstm_layers = kv.get_int("model.lstm_layers", c.lstm_layers);
  c.hidden = kv.get_int("model.hidden", c.hidden);
  c.out_dim = kv.get_int("model.out_dim", c.out_dim);
  c.conv_activation = kv.get_string("model.conv_activation", c.conv_activation);
  c.output_activation = kv.get_string("model.output_activation", c.output_activation);
  m.lm.vocab_size = kv.get_int("model.vocab_size", m.lm.vocab_size);
  m.lm.embed_dim = kv.get_int("model.embed_dim", m.lm.embed_dim);
  m.lm.max_len = kv.get_int("model.max_len", m.lm.max_len);
  m.validate();
  return m;
}

KeyValueConfig ModelConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("model.feature_dim", std::to_string(crnn.feature_dim));
  kv.set("model.context_frames", std::to_string(crnn.context_frames));
  kv.set("model.conv_layers", std::to_string(crnn.conv.size()));
  for (std::size_t i = 0; i < crnn.conv.size(); ++i) kv.set(conv_key(i), conv_value(crnn.conv[i]));
  kv.set("model.lstm_layers", std::to_string(crnn.lstm_layers));
  kv.set("model.hidden", std::to_string(crnn.hidden));
  kv.set("model.out_dim", std::to_string(crnn.out_dim));
  kv.set("model.conv_activation", crnn.conv_activation);
  kv.set("model.output_activation", crnn.output_activation);
  kv.set("model.vocab_size", std::to_string(lm.vocab_size));
  kv.set("model.embed_dim", std::to_string(lm.embed_dim));
  kv.set("model.max_len", std::to_string(lm.max_len));
  return kv;
}

void ModelConfig::validate() const {
  crnn.validate();
  if (lm.vocab_size < 1) throw ConfigError("field 'model.vocab_size': must be positive");
  if (lm.embed_dim < 1) throw ConfigError("field 'model.embed_dim': must be positive");
  if (lm.max_len < 1 || lm.max_len > 60) throw ConfigError("field 'model.max_len': expected 1..60");
}

std::set<std::string> model_config_keys() {
  std::set<std::string> keys = {"model.preset",      "model.feature_dim",     "model.context_frames",
                                "model.conv_layers", "model.lstm_layers",     "model.hidden",
                                "model.out_dim",     "model.conv_activation", "model.output_activation",
                                "model.vocab_size",  "model.embed_dim",       "model.max_len"};
  for (std::size_t i = 0; i < 16; ++i) keys.insert(conv_key(i));
  return keys;
}

}  // namespace crnnse
