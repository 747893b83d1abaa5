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

// Latent prosody model: phoneme ids -> frame sequence through a convolutional
// + BiLSTM encoder, location-sensitive attention and a two-layer LSTM
// decoder with a stop token. With out_dim set to the acoustic width the same
// network is the text-to-acoustic baseline.

#include <cstdint>
#include <span>
#include <vector>

#include "bnclone/checkpoint.hpp"
#include "bnclone/layers.hpp"
#include "bnclone/training.hpp"

namespace bnclone {

struct ProsodyConfig {
  int n_symbols = 12;
  int embed_dim = 32;
  int enc_conv_layers = 2;
  int enc_conv_width = 5;
  int d_enc = 64;  // BiLSTM output width; each direction has d_enc / 2
  int d_dec = 64;
  int prenet_dim = 32;
  int attn_dim = 32;
  int loc_filters = 4;
  int loc_width = 7;
  int out_dim = 16;
  double dropout = 0.5;
  double stop_weight = 0.1;

  void validate() const;
};

struct DecoderState {
  LstmState lstm1;
  LstmState lstm2;
};

struct DecodeOutput {
  Var y;     // 1 x out_dim
  Var stop;  // 1 x 1 logit
  DecoderState next;
};

struct StepOutput {
  Var y;
  Var stop;
  Var alpha;  // 1 x L
  DecoderState decoder;
  AttentionState attention;
};

struct ProsodyLoss {
  Var total;
  Var l2;    // mean squared error over every element
  Var stop;  // mean stop-token cross-entropy
};

struct SynthesisResult {
  Mat frames;      // N x out_dim, de-normalised
  Mat alignment;   // N x L attention weights
  std::vector<double> stop_prob;
  bool truncated = false;
};

// A training pair: phone ids and the frame sequence (BN or acoustic) to emit.
struct SequencePair {
  std::vector<int> ids;
  Mat frames;
};

class ProsodyModel {
 public:
  ProsodyModel() = default;
  ProsodyModel(const ProsodyConfig& cfg, std::uint64_t seed);

  const ProsodyConfig& config() const { return cfg_; }
  FeatureNorm& norm() { return norm_; }
  const FeatureNorm& norm() const { return norm_; }

  // L x d_enc. Throws InputError naming the first out-of-inventory position.
  Var encode(Graph& g, std::span<const int> ids, Rng* rng) const;
  Mat encode(std::span<const int> ids) const;

  DecoderState initial_decoder(Graph& g) const;
  AttentionState initial_attention(Graph& g, Eigen::Index L) const;
  Var attention_keys(Graph& g, Var h) const { return attn_.keys(g, h); }

  // prenet(y_prev) ++ context -> LSTM1 -> LSTM2; y and the stop logit are a
  // linear projection of [LSTM2 output, context]. Throws ShapeError on a
  // context or frame width mismatch.
  DecodeOutput decode_step(Graph& g, const DecoderState& state, Var context, Var y_prev, Rng* rng) const;
  // Attend with the previous top-layer output as query, then decode.
  StepOutput step(Graph& g, const DecoderState& dec, const AttentionState& att, Var h, Var keys, Var y_prev,
                  Rng* rng) const;

  // Teacher-forced loss on normalised targets (rows of `target` are frames).
  ProsodyLoss loss(Graph& g, std::span<const int> ids, const Mat& target, Rng* rng) const;
  // Free-running synthesis in inference mode. The result is truncated when
  // max_frames is reached before the stop probability exceeds the threshold.
  SynthesisResult synthesize(std::span<const int> ids, int max_frames, double stop_threshold = 0.5) const;
  // Same teacher-forced loss value without dropout, on raw targets.
  double eval_loss(std::span<const int> ids, const Mat& frames) const;

  ParamList params();
  Checkpoint to_checkpoint(const std::string& kind, std::uint64_t fingerprint) const;
  static ProsodyModel from_checkpoint(const Checkpoint& ck, const std::string& kind, std::uint64_t expect);

 private:
  void check_ids(std::span<const int> ids) const;

  ProsodyConfig cfg_;
  FeatureNorm norm_;
  Embedding embed_;
  std::vector<Conv1d> convs_;
  BiLstm enc_rnn_;
  LocationAttention attn_;
  Prenet prenet_;
  Lstm lstm1_;
  Lstm lstm2_;
  Linear proj_;  // [s2, ctx] -> out_dim + 1 (last column is the stop logit)
};

// Fraction of consecutive steps whose argmax column does not move backwards.
// 1.0 for fewer than two rows.
double monotonicity(const Mat& alignment);

// Fraction of encoder positions that are the argmax of some step.
double coverage(const Mat& alignment);

// Fits the target normalisation when `fit_norm` is set, then trains with
// teacher forcing. Throws DataError on an empty set.
std::vector<double> train_sequence_model(ProsodyModel& model, const std::vector<SequencePair>& data,
                                         const TrainOptions& opt, bool fit_norm, AdamState& state,
                                         const StepCallback& after_step = {});

}  // namespace bnclone
