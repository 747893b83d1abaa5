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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bnclone/error.hpp"
#include "bnclone/io.hpp"

namespace bnclone {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t u32_at(const std::vector<unsigned char>& d, std::size_t off) {
  return static_cast<std::uint32_t>(d[off]) | (static_cast<std::uint32_t>(d[off + 1]) << 8) |
         (static_cast<std::uint32_t>(d[off + 2]) << 16) |
         (static_cast<std::uint32_t>(d[off + 3]) << 24);
}

std::uint16_t u16_at(const std::vector<unsigned char>& d, std::size_t off) {
  return static_cast<std::uint16_t>(d[off] | (d[off + 1] << 8));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> d((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (d.size() < 12 || std::memcmp(d.data(), "RIFF", 4) != 0 || std::memcmp(d.data() + 8, "WAVE", 4) != 0)
    throw InputError("not a RIFF/WAVE file: " + where);
  std::size_t off = 12;
  bool have_fmt = false;
  AudioBuffer audio;
  while (off + 8 <= d.size()) {
    const std::uint32_t size = u32_at(d, off + 4);
    const std::size_t body = off + 8;
    if (body + size > d.size()) throw InputError("truncated WAV chunk in " + where);
    if (std::memcmp(d.data() + off, "fmt ", 4) == 0) {
      if (size < 16) throw InputError("short fmt chunk in " + where);
      const std::uint16_t format = u16_at(d, body);
      const std::uint16_t channels = u16_at(d, body + 2);
      const std::uint16_t bits = u16_at(d, body + 14);
      if (format != 1 || channels != 1 || bits != 16)
        throw InputError("unsupported WAV encoding in " + where + " (need PCM16 mono)");
      audio.sample_rate = static_cast<int>(u32_at(d, body + 4));
      have_fmt = true;
    } else if (std::memcmp(d.data() + off, "data", 4) == 0) {
      if (!have_fmt) throw InputError("data chunk before fmt chunk in " + where);
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(u16_at(d, body + 2 * i));
        audio.samples[i] = std::max(-1.0, static_cast<double>(s) / 32767.0);
      }
      return audio;
    }
    off = body + size + (size & 1u);
  }
  throw InputError("no data chunk in " + where);
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create WAV file: " + path.string());
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  os.write("RIFF", 4);
  put_u32(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, 1);
  put_u16(os, 1);
  put_u32(os, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, 2 * n);
  for (double x : audio.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  if (!os) throw IoError("failed writing WAV file: " + path.string());
}

namespace {

void write_header(std::ostream& os, std::uint32_t version, std::uint32_t n, std::uint32_t dim) {
  os.write("BNCF", 4);
  put_u32(os, version);
  put_u32(os, n);
  put_u32(os, dim);
}

struct Container {
  std::uint32_t version = 0;
  std::uint32_t n = 0;
  std::uint32_t dim = 0;
  std::vector<unsigned char> payload;
};

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path.string());
  std::vector<unsigned char> d((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (d.size() < 16 || std::memcmp(d.data(), "BNCF", 4) != 0)
    throw InputError("not a BNCF file: " + path.string());
  Container c;
  c.version = u32_at(d, 4);
  c.n = u32_at(d, 8);
  c.dim = u32_at(d, 12);
  if ((c.version & ~kBncfIntPayload) != kBncfVersion)
    throw InputError("unsupported BNCF version in " + path.string());
  const std::size_t need = 16 + 4ull * c.n * c.dim;
  if (d.size() != need) throw InputError("BNCF payload size mismatch in " + path.string());
  c.payload.assign(d.begin() + 16, d.end());
  return c;
}

}  // namespace

void write_features(const std::filesystem::path& path, const Mat& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create feature file: " + path.string());
  write_header(os, kBncfVersion, static_cast<std::uint32_t>(frames.rows()),
               static_cast<std::uint32_t>(frames.cols()));
  for (Eigen::Index r = 0; r < frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      const auto f = static_cast<float>(frames(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(os, bits);
    }
  }
  if (!os) throw IoError("failed writing feature file: " + path.string());
}

Mat read_features(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.version & kBncfIntPayload) throw InputError("BNCF file holds integer payload: " + path.string());
  Mat m(c.n, c.dim);
  for (std::size_t i = 0; i < static_cast<std::size_t>(c.n) * c.dim; ++i) {
    const std::uint32_t bits = u32_at(c.payload, 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    m.data()[i] = f;
  }
  return m;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create label file: " + path.string());
  write_header(os, kBncfVersion | kBncfIntPayload, static_cast<std::uint32_t>(labels.size()), 1);
  for (int v : labels) put_u32(os, static_cast<std::uint32_t>(v));
  if (!os) throw IoError("failed writing label file: " + path.string());
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (!(c.version & kBncfIntPayload) || c.dim != 1)
    throw InputError("BNCF file is not a label file: " + path.string());
  std::vector<int> out(c.n);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<int>(static_cast<std::int32_t>(u32_at(c.payload, 4 * i)));
  return out;
}

}  // namespace bnclone
