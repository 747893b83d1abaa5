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

// Frame-level phone classifier whose last LSTM layer, the one feeding the
// softmax projection, is tapped as the bottleneck (BN) representation.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bnclone/checkpoint.hpp"
#include "bnclone/layers.hpp"
#include "bnclone/training.hpp"

namespace bnclone {

struct BnExtractorConfig {
  int in_dim = 20;
  int hidden = 32;
  int bn_dim = 16;
  int n_phones = 12;
};

struct LabeledFeatures {
  Mat features;             // N x in_dim acoustic frames (unnormalised)
  std::vector<int> labels;  // N phone ids
};

class BnExtractor {
 public:
  BnExtractor() = default;
  BnExtractor(const BnExtractorConfig& cfg, std::uint64_t seed);

  const BnExtractorConfig& config() const { return cfg_; }
  FeatureNorm& norm() { return norm_; }
  const FeatureNorm& norm() const { return norm_; }

  // N x bn_dim. Throws InputError when the feature width differs from in_dim.
  Mat extract(const Mat& features) const;
  // N x n_phones class posteriors.
  Mat posteriors(const Mat& features) const;
  // Mean frame cross-entropy of one utterance; `features` already normalised.
  Var loss(Graph& g, const Mat& normalized, const std::vector<int>& labels) const;
  double frame_accuracy(const std::vector<LabeledFeatures>& data) const;

  ParamList params();
  Checkpoint to_checkpoint(std::uint64_t fingerprint) const;
  // Throws CompatibilityError when the fingerprint differs from `expect`.
  static BnExtractor from_checkpoint(const Checkpoint& ck, std::uint64_t expect);

 private:
  struct Forward {
    Var bn;
    Var logits;
  };
  Forward forward(Graph& g, const Mat& normalized) const;
  void check_width(const Mat& features) const;

  BnExtractorConfig cfg_;
  FeatureNorm norm_;
  Lstm lstm1_;
  Lstm lstm2_;
  Linear out_;
};

struct BnTrainOptions {
  TrainOptions train;
  double target_accuracy = 0.9;
  int eval_every = 100;
};

struct BnTrainReport {
  int steps = 0;
  double initial_heldout_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  bool reached_target = false;
  std::vector<double> losses;
  std::vector<std::pair<int, double>> accuracy_trace;  // (steps done, held-out accuracy)
};

// Fits the input normalisation on `train`, then trains with cross-entropy,
// checking held-out frame accuracy every eval_every steps and stopping once
// it reaches target_accuracy. Throws DataError on an empty training set or a
// label/frame length mismatch.
BnTrainReport train_bn_extractor(BnExtractor& model, const std::vector<LabeledFeatures>& train,
                                 const std::vector<LabeledFeatures>& heldout, const BnTrainOptions& opt);

// Accuracy of nearest class centroids over standardised BFCC columns
// (the first n_bfcc feature columns), fitted on `train`.
double nearest_centroid_accuracy(const std::vector<LabeledFeatures>& train,
                                 const std::vector<LabeledFeatures>& test, int n_bfcc, int n_classes);

}  // namespace bnclone
