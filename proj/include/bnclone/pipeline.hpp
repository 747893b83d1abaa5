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

// End-to-end orchestration shared by the command-line tool and the acceptance
// harness. Every command reads and writes artifacts under one work directory:
//
//   <out>/config.txt                 canonical configuration of the run
//   <out>/corpus/{train,prosody,target}.tsv and audio
//   <out>/ckpt/*.bnck                checkpoints
//   <out>/logs/*.tsv                 "step<TAB>loss" traces
//   <out>/reports/*.txt              key=value reports
//   <out>/synth/                     synthesised audio, features, alignments

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bnclone/acoustic.hpp"
#include "bnclone/bn_extractor.hpp"
#include "bnclone/config.hpp"
#include "bnclone/corpus.hpp"
#include "bnclone/probe.hpp"
#include "bnclone/prosody.hpp"

namespace bnclone {

// Ordered key=value report. Reals are written in shortest round-trip form so
// a report read back reproduces the exact values.
class Report {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  void set(const std::string& key, std::size_t value);
  void set(const std::string& key, bool value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // DataError when absent
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string text() const;
  void write(const std::filesystem::path& path) const;
  static Report read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.txt"; }
  std::filesystem::path corpus(const std::string& name) const { return root / "corpus" / (name + ".tsv"); }
  std::filesystem::path speakers(const std::string& name) const {
    return root / "corpus" / (name + "_speakers.tsv");
  }
  std::filesystem::path ckpt(const std::string& name) const { return root / "ckpt" / (name + ".bnck"); }
  std::filesystem::path log(const std::string& name) const { return root / "logs" / (name + ".tsv"); }
  std::filesystem::path report(const std::string& name) const { return root / "reports" / (name + ".txt"); }
  std::filesystem::path synth() const { return root / "synth"; }
};

// Utterance-level split of a multi-speaker corpus: within each speaker every
// round(1 / fraction)-th utterance is held out.
bool is_heldout(std::size_t index_in_speaker, double fraction);

// Per-speaker partition of the target corpus: the first target_adapt_utts
// recordings of a speaker are adaptation material, the rest are held out.
struct TargetSplit {
  std::vector<std::string> speakers;
  std::map<std::string, std::vector<UtteranceRecord>> adapt;
  std::map<std::string, std::vector<UtteranceRecord>> heldout;
};
TargetSplit split_targets(const std::vector<UtteranceRecord>& records, const CorpusConfig& cfg);

std::vector<AudioBuffer> load_audio(const std::vector<UtteranceRecord>& records, std::size_t limit = SIZE_MAX);

// Mean L1 (and L2) distance between aligned frames of the first n_cols
// columns along the minimum-cost dynamic time warping path.
struct DtwDistance {
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t path_length = 0;
};
DtwDistance dtw_distance(const Mat& a, const Mat& b, Eigen::Index n_cols);

// Model factories bound to a pipeline configuration.
BnExtractorConfig bn_config(const PipelineConfig& cfg);
ProsodyConfig prosody_config(const PipelineConfig& cfg, int out_dim);
AcousticModelConfig acoustic_config(const PipelineConfig& cfg);
TrainOptions train_options(const PipelineConfig& cfg, const StageSchedule& s, const std::string& stream);

// Checkpoint loaders that enforce the configuration fingerprint.
BnExtractor load_bn(const PipelineConfig& cfg, const WorkDir& wd);
ProsodyModel load_prosody(const PipelineConfig& cfg, const WorkDir& wd);
AcousticModel load_acoustic(const PipelineConfig& cfg, const std::filesystem::path& path);
ProsodyModel load_baseline(const PipelineConfig& cfg, const std::filesystem::path& path);

std::string adapted_name(const std::string& speaker);
std::string baseline_name(const std::string& speaker, int n_utts);

// ---- commands. Each writes its artifacts and returns its report.

Report cmd_gen_corpus(const PipelineConfig& cfg, const WorkDir& wd);
Report cmd_train_bn(const PipelineConfig& cfg, const WorkDir& wd);
Report cmd_train_prosody(const PipelineConfig& cfg, const WorkDir& wd);
Report cmd_train_acoustic(const PipelineConfig& cfg, const WorkDir& wd);
// Text-free by construction: only target audio enters the adaptation. An
// empty `speaker` adapts every target speaker.
Report cmd_adapt(const PipelineConfig& cfg, const WorkDir& wd, const std::string& speaker = "");

struct SynthRequest {
  std::string text;
  std::string speaker;  // empty: unadapted acoustic model
  std::string name = "utt";
  std::filesystem::path prosody_ckpt;   // empty: <out>/ckpt/prosody.bnck
  std::filesystem::path acoustic_ckpt;  // empty: derived from `speaker`
};
Report cmd_synth(const PipelineConfig& cfg, const WorkDir& wd, const SynthRequest& req);
Report cmd_baseline(const PipelineConfig& cfg, const WorkDir& wd);

struct TrialResult {
  std::string speaker;
  double pre_l1 = 0.0;   // held-out reconstruction L1, unadapted
  double post_l1 = 0.0;  // same after adaptation
  double pre_bfcc_l1 = 0.0;
  double post_bfcc_l1 = 0.0;
  ProbeScore unadapted;
  ProbeScore adapted;
  bool probe_prefers_adapted = false;
  double unadapted_dtw_l1 = 0.0;  // text-synthesised vs real held-out, BFCC
  double adapted_dtw_l1 = 0.0;
};

struct SweepRow {
  std::string speaker;
  int n_utts = 0;
  double proposed_dtw_l1 = 0.0;
  double baseline_dtw_l1 = 0.0;
  double proposed_dtw_l2 = 0.0;
  double baseline_dtw_l2 = 0.0;
  ProbeScore proposed;
  ProbeScore baseline;
  double baseline_pre_finetune_loss = 0.0;
  double baseline_post_finetune_loss = 0.0;
};

struct EvalReport {
  double bn_heldout_accuracy = 0.0;
  double bn_nearest_centroid = 0.0;
  double acoustic_heldout_l1 = 0.0;
  double acoustic_mean_predictor_l1 = 0.0;
  int monotonicity_sentences = 0;
  double monotonic_fraction = 0.0;  // sentences scoring >= 0.9
  double mean_monotonicity = 0.0;
  double mean_coverage = 0.0;
  double stop_fraction = 0.0;  // sentences ending before max_frames
  double probe_validity = 0.0;
  bool probe_valid = false;
  std::vector<TrialResult> trials;
  std::vector<SweepRow> sweep;  // empty when no baseline checkpoints exist

  Report to_report() const;
};

EvalReport cmd_eval(const PipelineConfig& cfg, const WorkDir& wd);

}  // namespace bnclone
