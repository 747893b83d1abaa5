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

// 16-bit PCM mono WAV and the "BNCF" feature container.
//
// BNCF layout, little-endian:
//   char[4] "BNCF" | u32 version | u32 n_frames | u32 frame_dim | payload
// The payload is n_frames * frame_dim row-major values: float32 by default,
// int32 when the top bit of the version word is set (frame labels).

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bnclone/dsp.hpp"
#include "bnclone/tensor.hpp"

namespace bnclone {

// Throws IoError on open/read failures and InputError on malformed or
// unsupported content (anything other than PCM16 mono).
AudioBuffer read_wav(const std::filesystem::path& path);
// Samples are clipped to [-1, 1] and quantised to PCM16.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

inline constexpr std::uint32_t kBncfVersion = 1;
inline constexpr std::uint32_t kBncfIntPayload = 0x80000000u;

void write_features(const std::filesystem::path& path, const Mat& frames);
Mat read_features(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& path);

}  // namespace bnclone
