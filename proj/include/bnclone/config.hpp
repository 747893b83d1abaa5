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

// Pipeline configuration: every knob of every stage, the "toy" and "paper"
// presets, a human-readable `key = value` file format and the fingerprint
// stored in checkpoints.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bnclone/dsp.hpp"
#include "bnclone/layers.hpp"
#include "bnclone/optim.hpp"

namespace bnclone {

struct ModelConfig {
  // BN extractor: two LSTM layers, the second one is the BN tap.
  int bn_hidden = 32;
  int bn_dim = 16;
  // Prosody model (and the baseline, which shares its architecture).
  int embed_dim = 32;
  int enc_conv_layers = 2;
  int enc_conv_width = 5;
  int d_enc = 64;
  int d_dec = 64;
  int prenet_dim = 32;
  int attn_dim = 32;
  int loc_filters = 4;
  int loc_width = 7;
  // Acoustic model.
  int ac_prenet1 = 32;
  int ac_prenet2 = 32;
  CbhgConfig cbhg;
  double dropout = 0.5;
};

struct StageSchedule {
  int steps = 1000;
  int batch_size = 16;
};

struct TrainConfig {
  AdamConfig adam;
  double clip_norm = 1.0;
  StageSchedule bn{2000, 8};
  double bn_target_accuracy = 0.9;
  int bn_eval_every = 100;
  double bn_heldout_fraction = 0.1;
  StageSchedule prosody{3000, 16};
  double stop_weight = 0.1;
  StageSchedule acoustic{1500, 32};
  std::string acoustic_loss = "l1";
  StageSchedule adapt{400, 8};
  StageSchedule baseline{3000, 16};
  StageSchedule baseline_finetune{300, 8};
};

struct CorpusConfig {
  int n_speakers = 20;
  int utts_per_speaker = 30;
  int prosody_utts = 200;
  int n_targets = 5;
  int target_adapt_utts = 20;
  int target_heldout_utts = 3;
  int min_words = 2;
  int max_words = 3;
};

struct SynthConfig {
  int max_frames = 300;
  double stop_threshold = 0.5;
};

struct EvalConfig {
  int adapt_utts = 10;
  std::vector<int> sweep = {5, 10, 20};
  double probe_min_accuracy = 0.8;
  int probe_texts = 10;
  int monotonicity_sentences = 200;
  int baseline_speakers = 1;
};

struct PipelineConfig {
  std::string preset = "toy";
  std::uint64_t seed = 1;
  DspConfig dsp;
  ModelConfig model;
  TrainConfig train;
  CorpusConfig corpus;
  SynthConfig synth;
  EvalConfig eval;

  // Throws ConfigError for an unknown preset name.
  static PipelineConfig from_preset(const std::string& name);

  // Throws ConfigError for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  // Applies `key = value` lines; '#' starts a comment. Errors name the line.
  void apply_text(const std::string& text, const std::string& origin = "<config>");
  void apply_file(const std::filesystem::path& path);
  // Canonical text: one `key = value` line per key in sorted order.
  std::string serialize() const;

  void validate() const;
  // FNV-1a 64 of the canonical text restricted to dsp.* and model.* keys,
  // the settings that decide checkpoint compatibility.
  std::uint64_t fingerprint() const;
};

}  // namespace bnclone
