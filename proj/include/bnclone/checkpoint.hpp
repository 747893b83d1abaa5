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

#pragma once

// Model checkpoints.
//
// Layout, little-endian, all counts u32, strings length-prefixed (u32 + bytes):
//   char[4] "BNCK" | u32 version | u64 fingerprint
//   u32 n_meta   { string key, string value }
//   u32 n_entry  { string name, u32 rank, u32 dims[rank], float32 data[prod] }

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bnclone/optim.hpp"
#include "bnclone/tensor.hpp"

namespace bnclone {

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);
// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

struct Checkpoint {
  struct Entry {
    std::string name;
    Mat value;
  };

  std::uint64_t fingerprint = 0;
  std::map<std::string, std::string> meta;
  std::vector<Entry> entries;

  const Entry* find(std::string_view name) const;
  // Throws DataError when absent or when the shape differs.
  const Mat& get(std::string_view name, Eigen::Index rows, Eigen::Index cols) const;
  const std::string& meta_at(const std::string& key) const;
  int meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;
  // Throws DataError when meta "kind" differs and CompatibilityError when the
  // fingerprint differs from `fingerprint`.
  void expect(const std::string& kind, std::uint64_t fingerprint) const;

  void add_params(std::span<Parameter* const> params);
  // Copies values into params by name, validating shapes.
  void load_params(std::span<Parameter* const> params) const;
  void add_adam(std::span<Parameter* const> params, const AdamState& state);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace bnclone
