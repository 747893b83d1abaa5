// Copyright 2026 The bnclone Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bnclone/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "bnclone/error.hpp"

namespace bnclone {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os_.write(reinterpret_cast<const char*>(b), 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void f32(double v) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> d, std::string where) : d_(std::move(d)), where_(std::move(where)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(d_[off_ + i]) << (8 * i);
    off_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(d_.data() + off_), n);
    off_ += n;
    return s;
  }
  double f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  bool done() const { return off_ == d_.size(); }

 private:
  void need(std::size_t n) const {
    if (off_ + n > d_.size()) throw DataError("truncated checkpoint: " + where_);
  }
  std::vector<unsigned char> d_;
  std::string where_;
  std::size_t off_ = 0;
};

}  // namespace

const Checkpoint::Entry* Checkpoint::find(std::string_view name) const {
  for (const Entry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

const Mat& Checkpoint::get(std::string_view name, Eigen::Index rows, Eigen::Index cols) const {
  const Entry* e = find(name);
  if (!e) throw DataError("checkpoint: missing entry '" + std::string(name) + "'");
  if (e->value.rows() != rows || e->value.cols() != cols)
    throw DataError("checkpoint: entry '" + std::string(name) + "' has shape " +
                    std::to_string(e->value.rows()) + "x" + std::to_string(e->value.cols()) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  return e->value;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

int Checkpoint::meta_int(const std::string& key) const {
  const std::string& v = meta_at(key);
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw DataError("checkpoint: metadata '" + key + "' is not an integer: '" + v + "'");
}

double Checkpoint::meta_double(const std::string& key) const {
  const std::string& v = meta_at(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw DataError("checkpoint: metadata '" + key + "' is not a number: '" + v + "'");
}

void Checkpoint::expect(const std::string& kind, std::uint64_t expect_fp) const {
  const auto it = meta.find("kind");
  const std::string have = it == meta.end() ? std::string("<none>") : it->second;
  if (have != kind) throw DataError("checkpoint holds a '" + have + "', expected '" + kind + "'");
  if (fingerprint != expect_fp)
    throw CompatibilityError("checkpoint fingerprint " + hex64(fingerprint) +
                             " does not match the current configuration " + hex64(expect_fp));
}

void Checkpoint::add_params(std::span<Parameter* const> params) {
  for (const Parameter* p : params) entries.push_back({p->name, p->value});
}

void Checkpoint::load_params(std::span<Parameter* const> params) const {
  for (Parameter* p : params) {
    p->value = get(p->name, p->value.rows(), p->value.cols());
    p->zero_grad();
  }
}

void Checkpoint::add_adam(std::span<Parameter* const> params, const AdamState& state) {
  meta["adam.steps"] = std::to_string(state.steps_taken);
  if (state.m.size() != params.size()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    entries.push_back({"adam.m/" + params[i]->name, state.m[i]});
    entries.push_back({"adam.v/" + params[i]->name, state.v[i]});
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create checkpoint: " + path.string());
  Writer w(os);
  os.write("BNCK", 4);
  w.u32(kVersion);
  w.u64(fingerprint);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    w.str(e.name);
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(e.value.rows()));
    w.u32(static_cast<std::uint32_t>(e.value.cols()));
    for (Eigen::Index i = 0; i < e.value.size(); ++i) w.f32(e.value.data()[i]);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> d((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (d.size() < 4 || std::memcmp(d.data(), "BNCK", 4) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  d.erase(d.begin(), d.begin() + 4);
  Reader r(std::move(d), path.string());
  if (r.u32() != kVersion) throw DataError("unsupported checkpoint version: " + path.string());
  Checkpoint ck;
  ck.fingerprint = r.u64();
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    Entry e;
    e.name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<std::uint32_t> dims(rank);
    for (auto& x : dims) x = r.u32();
    Eigen::Index rows = 1, cols = 1;
    if (rank == 1) cols = dims[0];
    else if (rank == 2) rows = dims[0], cols = dims[1];
    else if (rank != 0) throw DataError("checkpoint: unsupported rank for '" + e.name + "'");
    e.value.resize(rows, cols);
    for (Eigen::Index k = 0; k < e.value.size(); ++k) e.value.data()[k] = r.f32();
    ck.entries.push_back(std::move(e));
  }
  if (!r.done()) throw DataError("trailing bytes in checkpoint: " + path.string());
  return ck;
}

}  // namespace bnclone
