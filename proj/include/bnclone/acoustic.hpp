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

// Frame-synchronous BN -> acoustic feature model: prenet, CBHG, linear
// projection. Also the text-free speaker adaptation entry point.

#include <cstdint>
#include <string>
#include <vector>

#include "bnclone/bn_extractor.hpp"
#include "bnclone/checkpoint.hpp"
#include "bnclone/dsp.hpp"
#include "bnclone/layers.hpp"
#include "bnclone/training.hpp"

namespace bnclone {

// Maps raw acoustic frames [bfcc..., period, correlation] to training targets:
// standardised BFCC, period / max_period and the correlation unchanged.
struct AcousticCodec {
  FeatureNorm bfcc;
  double max_period = 200.0;

  static AcousticCodec fit(const std::vector<Mat>& acoustic, double max_period);
  Eigen::Index dim() const { return bfcc.dim() + 2; }
  Mat encode(const Mat& raw) const;
  Mat decode(const Mat& z) const;
  void save(Checkpoint& ck, const std::string& prefix) const;
  static AcousticCodec load(const Checkpoint& ck, const std::string& prefix, Eigen::Index n_bfcc);
};

struct AcousticModelConfig {
  int bn_dim = 16;
  int out_dim = 20;
  int prenet1 = 32;
  int prenet2 = 32;
  CbhgConfig cbhg;  // in_dim is forced to prenet2
  double dropout = 0.5;
  bool l2 = false;  // L1 unless set
};

struct BnAcousticPair {
  Mat bn;        // N x bn_dim
  Mat acoustic;  // N x out_dim, raw
};

class AcousticModel {
 public:
  AcousticModel() = default;
  AcousticModel(const AcousticModelConfig& cfg, std::uint64_t seed);

  const AcousticModelConfig& config() const { return cfg_; }
  AcousticCodec& codec() { return codec_; }
  const AcousticCodec& codec() const { return codec_; }

  // Encoded-space prediction; dropout in the prenet when rng is non-null.
  Var forward(Graph& g, Var bn, Rng* rng) const;
  // Raw acoustic frames, N in and N out. Throws InputError on a width mismatch.
  Mat predict(const Mat& bn) const;
  // Per-frame norm of the encoded error (L1 by default), mean over frames.
  Var loss(Graph& g, const Mat& bn, const Mat& target_encoded, Rng* rng) const;
  // Frame-weighted mean per-frame L1 between encoded prediction and target.
  double l1(const std::vector<BnAcousticPair>& data) const;

  ParamList params();
  Checkpoint to_checkpoint(std::uint64_t fingerprint) const;
  static AcousticModel from_checkpoint(const Checkpoint& ck, std::uint64_t expect);

 private:
  void check(const Mat& bn) const;

  AcousticModelConfig cfg_;
  AcousticCodec codec_;
  Prenet prenet_;
  Cbhg cbhg_;
  Linear proj_;
};

// L1 of predicting the per-dimension mean of the encoded training targets.
double mean_predictor_l1(const AcousticCodec& codec, const std::vector<BnAcousticPair>& train,
                         const std::vector<BnAcousticPair>& test);

// Fits the codec on the training targets, then trains. Throws DataError on an
// empty set or a pair whose lengths differ.
std::vector<double> pretrain_acoustic(AcousticModel& model, const std::vector<BnAcousticPair>& train,
                                      const TrainOptions& opt, const StepCallback& after_step = {});

struct AdaptationReport {
  int steps = 0;
  double pre_l1 = 0.0;   // held-out L1 of the unadapted model
  double post_l1 = 0.0;  // held-out L1 after fine-tuning
  double param_change_norm = 0.0;
  std::size_t n_utterances = 0;
  std::vector<double> losses;
};

struct AdaptationResult {
  AcousticModel model;
  AdaptationReport report;
};

// Text-free adaptation: BN and acoustic targets are both derived from the
// audio, then every parameter is fine-tuned with the frame loss using a
// fresh optimiser state. Throws DataError when `audio` is empty.
AdaptationResult adapt_speaker(const AcousticModel& base, const std::vector<AudioBuffer>& audio,
                               const std::vector<AudioBuffer>& heldout, const BnExtractor& bn,
                               const DspConfig& dsp, const TrainOptions& opt);

// (BN, acoustic) pairs for a list of recordings.
std::vector<BnAcousticPair> bn_pairs(const std::vector<AudioBuffer>& audio, const BnExtractor& bn,
                                     const DspConfig& dsp);

}  // namespace bnclone
