// Copyright 2026 The tsca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tsca/encoder.hpp"
#include "tsca/errors.hpp"
#include "tsca/mat.hpp"

namespace tsca {

// --- Little-endian primitives ----------------------------------------------------

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw IoError("truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline float get_f32(std::istream& is) {
  std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

// Write-temp-then-rename so partially written outputs never appear.
inline void atomic_write(const std::string& path,
                         const std::function<void(std::ostream&)>& fn) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    fn(os);
    if (!os) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename to " + path + " failed: " + ec.message());
}

// --- TSCW weight container --------------------------------------------------------

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline void write_tscw(const std::vector<NamedTensor>& tensors, std::ostream& os) {
  os.write("TSCW", 4);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.count() != t.data.size()) throw IoError("tensor " + t.name + " dims/data mismatch");
    detail::put_u16(os, static_cast<std::uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    os.put(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(os, d);
    for (float v : t.data) detail::put_f32(os, v);
  }
}

inline std::vector<NamedTensor> read_tscw(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TSCW", 4) != 0)
    throw IoError("not a TSCW weight file");
  std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw IoError("unsupported TSCW version " + std::to_string(version));
  std::uint32_t count = detail::get_u32(is);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    std::uint16_t name_len = detail::get_u16(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    int rank = is.get();
    if (rank < 0) throw IoError("truncated file");
    for (int rr = 0; rr < rank; ++rr) t.dims.push_back(detail::get_u32(is));
    t.data.resize(t.count());
    for (auto& v : t.data) v = detail::get_f32(is);
    if (!is) throw IoError("truncated tensor payload for " + t.name);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

// --- Encoder weights <-> tensors ----------------------------------------------------

namespace detail {

template <class S>
inline NamedTensor tensor_of(const std::string& name, const Mat<S>& m) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(m.data().size());
  for (const auto& v : m.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

template <class S>
inline NamedTensor tensor_of(const std::string& name, const std::vector<S>& v) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  for (const auto& x : v) t.data.push_back(static_cast<float>(x));
  return t;
}

template <class S>
inline Mat<S> mat_from(const NamedTensor& t) {
  if (t.dims.size() != 2) throw IoError("tensor " + t.name + " is not a matrix");
  Mat<S> m(static_cast<long>(t.dims[0]), static_cast<long>(t.dims[1]));
  for (std::size_t i = 0; i < t.data.size(); ++i)
    m.data()[i] = static_cast<S>(t.data[i]);
  return m;
}

template <class S>
inline std::vector<S> vec_from(const NamedTensor& t) {
  if (t.dims.size() != 1) throw IoError("tensor " + t.name + " is not a vector");
  std::vector<S> v(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) v[i] = static_cast<S>(t.data[i]);
  return v;
}

}  // namespace detail

template <class S>
inline std::vector<NamedTensor> weights_to_tensors(const EncoderWeights<S>& w) {
  using detail::tensor_of;
  std::vector<NamedTensor> out;
  if (w.cfg.use_subsample) {
    out.push_back(tensor_of("sub.s1.w", w.sub.stage1.w));
    out.push_back(tensor_of("sub.s1.b", w.sub.stage1.b));
    out.push_back(tensor_of("sub.s2.w", w.sub.stage2.w));
    out.push_back(tensor_of("sub.s2.b", w.sub.stage2.b));
  } else {
    out.push_back(tensor_of("in.w", w.w_in));
    out.push_back(tensor_of("in.b", w.b_in));
  }
  for (std::size_t i = 0; i < w.blocks.size(); ++i) {
    const auto& b = w.blocks[i];
    std::string p = "enc." + std::to_string(i) + ".";
    out.push_back(tensor_of(p + "ln1.g", b.ln1.gamma));
    out.push_back(tensor_of(p + "ln1.b", b.ln1.beta));
    out.push_back(tensor_of(p + "ffn1.w1", b.ffn1.w1));
    out.push_back(tensor_of(p + "ffn1.b1", b.ffn1.b1));
    out.push_back(tensor_of(p + "ffn1.w2", b.ffn1.w2));
    out.push_back(tensor_of(p + "ffn1.b2", b.ffn1.b2));
    out.push_back(tensor_of(p + "ln2.g", b.ln2.gamma));
    out.push_back(tensor_of(p + "ln2.b", b.ln2.beta));
    out.push_back(tensor_of(p + "attn.wq", b.attn.w_q));
    out.push_back(tensor_of(p + "attn.wk", b.attn.w_k));
    out.push_back(tensor_of(p + "attn.wv", b.attn.w_v));
    out.push_back(tensor_of(p + "attn.wr", b.attn.w_r));
    out.push_back(tensor_of(p + "attn.wo", b.attn.w_o));
    out.push_back(tensor_of(p + "attn.u", b.attn.u));
    out.push_back(tensor_of(p + "attn.v", b.attn.v));
    out.push_back(tensor_of(p + "ln3.g", b.ln3.gamma));
    out.push_back(tensor_of(p + "ln3.b", b.ln3.beta));
    out.push_back(tensor_of(p + "conv.pw1", b.conv.pw1));
    out.push_back(tensor_of(p + "conv.pb1", b.conv.pb1));
    out.push_back(tensor_of(p + "conv.dw", b.conv.dw));
    out.push_back(tensor_of(p + "conv.ln.g", b.conv.ln.gamma));
    out.push_back(tensor_of(p + "conv.ln.b", b.conv.ln.beta));
    out.push_back(tensor_of(p + "conv.pw2", b.conv.pw2));
    out.push_back(tensor_of(p + "conv.pb2", b.conv.pb2));
    out.push_back(tensor_of(p + "ln4.g", b.ln4.gamma));
    out.push_back(tensor_of(p + "ln4.b", b.ln4.beta));
    out.push_back(tensor_of(p + "ffn2.w1", b.ffn2.w1));
    out.push_back(tensor_of(p + "ffn2.b1", b.ffn2.b1));
    out.push_back(tensor_of(p + "ffn2.w2", b.ffn2.w2));
    out.push_back(tensor_of(p + "ffn2.b2", b.ffn2.b2));
    out.push_back(tensor_of(p + "ln_out.g", b.ln_out.gamma));
    out.push_back(tensor_of(p + "ln_out.b", b.ln_out.beta));
  }
  out.push_back(tensor_of("after_norm.g", w.after_norm.gamma));
  out.push_back(tensor_of("after_norm.b", w.after_norm.beta));
  out.push_back(tensor_of("ctc.w", w.w_ctc));
  out.push_back(tensor_of("ctc.b", w.b_ctc));
  return out;
}

template <class S>
inline EncoderWeights<S> weights_from_tensors(const EncoderConfig& cfg,
                                              const std::vector<NamedTensor>& tensors) {
  cfg.validate();
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  std::size_t used = 0;
  auto mat = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("missing tensor " + name);
    ++used;
    return detail::mat_from<S>(*it->second);
  };
  auto vec = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("missing tensor " + name);
    ++used;
    return detail::vec_from<S>(*it->second);
  };

  EncoderWeights<S> w;
  w.cfg = cfg;
  if (cfg.use_subsample) {
    w.sub.stage1.w = mat("sub.s1.w");
    w.sub.stage1.b = vec("sub.s1.b");
    w.sub.stage2.w = mat("sub.s2.w");
    w.sub.stage2.b = vec("sub.s2.b");
  } else {
    w.w_in = mat("in.w");
    w.b_in = vec("in.b");
  }
  for (long i = 0; i < cfg.layers; ++i) {
    std::string p = "enc." + std::to_string(i) + ".";
    BlockWeights<S> b;
    b.ln1 = {vec(p + "ln1.g"), vec(p + "ln1.b")};
    b.ffn1 = {mat(p + "ffn1.w1"), vec(p + "ffn1.b1"), mat(p + "ffn1.w2"),
              vec(p + "ffn1.b2")};
    b.ln2 = {vec(p + "ln2.g"), vec(p + "ln2.b")};
    b.attn.d_model = cfg.d_model;
    b.attn.heads = cfg.heads;
    b.attn.w_q = mat(p + "attn.wq");
    b.attn.w_k = mat(p + "attn.wk");
    b.attn.w_v = mat(p + "attn.wv");
    b.attn.w_r = mat(p + "attn.wr");
    b.attn.w_o = mat(p + "attn.wo");
    b.attn.u = vec(p + "attn.u");
    b.attn.v = vec(p + "attn.v");
    b.ln3 = {vec(p + "ln3.g"), vec(p + "ln3.b")};
    b.conv = {mat(p + "conv.pw1"), vec(p + "conv.pb1"), mat(p + "conv.dw"),
              LayerNormParams<S>{vec(p + "conv.ln.g"), vec(p + "conv.ln.b")},
              mat(p + "conv.pw2"), vec(p + "conv.pb2")};
    b.ln4 = {vec(p + "ln4.g"), vec(p + "ln4.b")};
    b.ffn2 = {mat(p + "ffn2.w1"), vec(p + "ffn2.b1"), mat(p + "ffn2.w2"),
              vec(p + "ffn2.b2")};
    b.ln_out = {vec(p + "ln_out.g"), vec(p + "ln_out.b")};
    w.blocks.push_back(std::move(b));
  }
  w.after_norm = {vec("after_norm.g"), vec("after_norm.b")};
  w.w_ctc = mat("ctc.w");
  w.b_ctc = vec("ctc.b");
  if (used != tensors.size())
    throw IoError("weight file holds tensors the config does not describe");
  return w;
}

template <class S>
inline void save_weights(const std::string& path, const EncoderWeights<S>& w) {
  auto tensors = weights_to_tensors(w);
  atomic_write(path, [&](std::ostream& os) { write_tscw(tensors, os); });
}

template <class S>
inline EncoderWeights<S> load_weights(const std::string& path,
                                      const EncoderConfig& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return weights_from_tensors<S>(cfg, read_tscw(is));
}

// --- TSCF feature container ----------------------------------------------------------

struct FeatureData {
  Mat<float> feats;
  float frame_ms = 10.0f;
};

inline void write_tscf(const FeatureData& fd, std::ostream& os) {
  os.write("TSCF", 4);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, static_cast<std::uint32_t>(fd.feats.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(fd.feats.cols()));
  detail::put_f32(os, fd.frame_ms);
  for (const auto& v : fd.feats.data()) detail::put_f32(os, v);
}

inline FeatureData read_tscf(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TSCF", 4) != 0)
    throw IoError("not a TSCF feature file");
  std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw IoError("unsupported TSCF version " + std::to_string(version));
  std::uint32_t t = detail::get_u32(is);
  std::uint32_t d = detail::get_u32(is);
  FeatureData fd;
  fd.frame_ms = detail::get_f32(is);
  fd.feats = Mat<float>(static_cast<long>(t), static_cast<long>(d));
  for (auto& v : fd.feats.data()) v = detail::get_f32(is);
  if (!is) throw IoError("truncated TSCF payload");
  return fd;
}

inline void save_features(const std::string& path, const FeatureData& fd) {
  atomic_write(path, [&](std::ostream& os) { write_tscf(fd, os); });
}

inline FeatureData load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_tscf(is);
}

template <class S>
inline Mat<S> features_as(const FeatureData& fd) {
  Mat<S> m(fd.feats.rows(), fd.feats.cols());
  for (std::size_t i = 0; i < fd.feats.data().size(); ++i)
    m.data()[i] = static_cast<S>(fd.feats.data()[i]);
  return m;
}

// --- Token table ------------------------------------------------------------------------

// One token per line, line number = id; line 0 must be "<blank>".
inline std::vector<std::string> read_token_table(std::istream& is) {
  std::vector<std::string> table;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.push_back(line);
  }
  if (table.empty() || table[0] != "<blank>")
    throw IoError("token table must start with <blank> at id 0");
  return table;
}

inline std::vector<std::string> load_token_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_token_table(is);
}

// --- Flat key=value config ----------------------------------------------------------------

// Lines of `key=value`; '#' starts a comment. Callers validate the key set.
inline std::map<std::string, std::string> parse_kv(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("config line " + std::to_string(lineno) +
                          " is not key=value");
    kv[strip(stripped.substr(0, eq))] = strip(stripped.substr(eq + 1));
  }
  return kv;
}

}  // namespace tsca
