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

// Neural building blocks shared by the BN extractor, the prosody model and
// the acoustic model. Layers own their Parameters by value, so copying a
// model copies its weights. Forward passes are const; gradients land in the
// parameters' accumulators.
//
// Initialisation: Glorot-uniform projections, orthogonal recurrent kernels
// (one orthogonal block per gate), zero biases.

#include <optional>
#include <string>
#include <vector>

#include "bnclone/tensor.hpp"

namespace bnclone {

using ParamList = std::vector<Parameter*>;

Mat glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);
Mat orthogonal(Eigen::Index n, Rng& rng);
// [Q_1 | Q_2 | ... | Q_blocks], each n x n orthogonal.
Mat orthogonal_blocks(Eigen::Index n, int blocks, Rng& rng);

struct Linear {
  Parameter w;
  Parameter b;
  bool has_bias = true;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, bool bias = true);
  int in_dim() const { return static_cast<int>(w.value.rows()); }
  int out_dim() const { return static_cast<int>(w.value.cols()); }
  // x: rows x in -> rows x out.
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

struct Embedding {
  Parameter table;

  Embedding() = default;
  Embedding(const std::string& name, int n_symbols, int dim, Rng& rng);
  int n_symbols() const { return static_cast<int>(table.value.rows()); }
  Var forward(Graph& g, std::span<const int> ids) const;
  void collect(ParamList& out);
};

// Fully connected relu layers, each followed by dropout when an Rng is given
// (training); deterministic when rng is null.
struct Prenet {
  std::vector<Linear> layers;
  double dropout_p = 0.5;

  Prenet() = default;
  Prenet(const std::string& name, int in, const std::vector<int>& sizes, double p, Rng& rng);
  int out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  Var forward(Graph& g, Var x, Rng* rng) const;
  void collect(ParamList& out);
};

// Same-padded convolution along time with bias.
struct Conv1d {
  Parameter w;  // (width * in) x out
  Parameter b;  // 1 x out
  int width = 1;

  Conv1d() = default;
  Conv1d(const std::string& name, int in, int out, int width, Rng& rng);
  int in_dim() const { return static_cast<int>(w.value.rows()) / width; }
  int out_dim() const { return static_cast<int>(w.value.cols()); }
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

// Convolutions of widths 1..K, relu, concatenated along features:
// T x d -> T x (K * channels).
struct ConvBank {
  std::vector<Conv1d> convs;

  ConvBank() = default;
  // Throws ConfigError when K < 1.
  ConvBank(const std::string& name, int in, int K, int channels, Rng& rng);
  int K() const { return static_cast<int>(convs.size()); }
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

// y = T(x) * H(x) + (1 - T(x)) * x with H = relu(x Wh + bh), T = sigmoid(x Wt + bt).
struct Highway {
  Linear transform;
  Linear gate;

  Highway() = default;
  Highway(const std::string& name, int dim, Rng& rng);
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

// r = s(x Wr + h Ur + br), z = s(x Wz + h Uz + bz),
// n = tanh(x Wn + (r * h) Un + bn), h' = (1 - z) * n + z * h.
struct Gru {
  Parameter wx;    // in x 3h, gate order [r | z | n]
  Parameter u_rz;  // h x 2h
  Parameter u_n;   // h x h
  Parameter b;     // 1 x 3h

  Gru() = default;
  Gru(const std::string& name, int in, int hidden, Rng& rng);
  int hidden() const { return static_cast<int>(u_n.value.rows()); }
  // xw: 1 x 3h input projection including bias.
  Var step(Graph& g, Var xw, Var h) const;
  // T x in -> T x h; `reverse` runs from the last frame to the first but
  // returns rows in original time order.
  Var run(Graph& g, Var x, bool reverse) const;
  void collect(ParamList& out);
};

struct BiGru {
  Gru fwd;
  Gru bwd;

  BiGru() = default;
  BiGru(const std::string& name, int in, int hidden, Rng& rng);
  // T x in -> T x 2h, row t = [forward_t | backward_t].
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

struct LstmState {
  Var h;
  Var c;
};

// Gate order [i | f | g | o]; c' = f * c + i * g, h' = o * tanh(c').
struct Lstm {
  Parameter wx;  // in x 4h
  Parameter u;   // h x 4h
  Parameter b;   // 1 x 4h

  Lstm() = default;
  Lstm(const std::string& name, int in, int hidden, Rng& rng);
  int hidden() const { return static_cast<int>(u.value.rows()); }
  int in_dim() const { return static_cast<int>(wx.value.rows()); }
  LstmState zero_state(Graph& g) const;
  // x: 1 x in.
  LstmState step(Graph& g, Var x, const LstmState& s) const;
  // xw: 1 x 4h input projection including bias.
  LstmState step_projected(Graph& g, Var xw, const LstmState& s) const;
  Var run(Graph& g, Var x, bool reverse = false) const;
  void collect(ParamList& out);
};

struct BiLstm {
  Lstm fwd;
  Lstm bwd;

  BiLstm() = default;
  BiLstm(const std::string& name, int in, int hidden, Rng& rng);
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

// alpha_prev / alpha_cum are 1 x L rows, s_prev is 1 x d_dec.
struct AttentionState {
  Var alpha_prev;
  Var alpha_cum;
  Var s_prev;
};

struct AttentionOutput {
  Var alpha;    // 1 x L
  Var context;  // 1 x d_enc
  AttentionState next;
};

// Location-sensitive attention:
//   f = conv1d(alpha_cum, F)
//   e_j = v . tanh(W s_prev + V h_j + U f_j + b)
//   alpha = softmax(e), c = sum_j alpha_j h_j
struct LocationAttention {
  Parameter query;     // d_dec x a
  Parameter memory;    // d_enc x a
  Parameter loc_conv;  // width x n_filters
  Parameter loc_proj;  // n_filters x a
  Parameter bias;      // 1 x a
  Parameter v;         // a x 1
  int width = 7;

  LocationAttention() = default;
  LocationAttention(const std::string& name, int d_dec, int d_enc, int attn_dim, int n_filters,
                    int width, Rng& rng);
  int d_dec() const { return static_cast<int>(query.value.rows()); }
  int d_enc() const { return static_cast<int>(memory.value.rows()); }

  // One-hot alpha_prev at position 0, zero cumulative weights and decoder state.
  AttentionState initial_state(Graph& g, Eigen::Index L) const;
  // h V, computed once per utterance.
  Var keys(Graph& g, Var h) const;
  // Throws InputError when L == 0.
  AttentionOutput step(Graph& g, const AttentionState& state, Var h, Var keys) const;
  AttentionOutput step(Graph& g, const AttentionState& state, Var h) const {
    return step(g, state, h, keys(g, h));
  }
  void collect(ParamList& out);
};

struct CbhgConfig {
  int in_dim = 32;
  int bank_k = 4;
  int bank_channels = 16;
  int proj_channels = 32;
  int n_highway = 2;
  int gru_hidden = 32;
  int pool_width = 2;
};

// conv bank -> max-pool (stride 1) -> two width-3 projections (relu, linear)
// -> residual add -> highway stack -> bidirectional GRU. T x in -> T x 2h.
struct Cbhg {
  ConvBank bank;
  Conv1d proj1;
  Conv1d proj2;
  std::vector<Highway> highways;
  BiGru gru;
  int pool_width = 2;

  Cbhg() = default;
  Cbhg(const std::string& name, const CbhgConfig& cfg, Rng& rng);
  int out_dim() const { return 2 * gru.fwd.hidden(); }
  Var forward(Graph& g, Var x) const;
  void collect(ParamList& out);
};

}  // namespace bnclone
