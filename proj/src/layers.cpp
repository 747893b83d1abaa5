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

#include "bnclone/layers.hpp"

#include <algorithm>
#include <cmath>

#include "bnclone/error.hpp"

namespace bnclone {

Mat glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Mat orthogonal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes the draw uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

Mat orthogonal_blocks(Eigen::Index n, int blocks, Rng& rng) {
  Mat m(n, n * blocks);
  for (int k = 0; k < blocks; ++k) m.middleCols(k * n, n) = orthogonal(n, rng);
  return m;
}

// ---- Linear

Linear::Linear(const std::string& name, int in, int out, Rng& rng, bool bias)
    : w(name + ".w", glorot_uniform(in, out, rng)), b(name + ".b", Mat::Zero(1, out)), has_bias(bias) {}

Var Linear::forward(Graph& g, Var x) const {
  Var y = matmul(x, g.param(w));
  return has_bias ? add_row(y, g.param(b)) : y;
}

void Linear::collect(ParamList& out) {
  out.push_back(&w);
  if (has_bias) out.push_back(&b);
}

// ---- Embedding

Embedding::Embedding(const std::string& name, int n_symbols, int dim, Rng& rng)
    : table(name + ".table", glorot_uniform(n_symbols, dim, rng)) {}

Var Embedding::forward(Graph& g, std::span<const int> ids) const {
  return gather_rows(g.param(table), ids);
}

void Embedding::collect(ParamList& out) { out.push_back(&table); }

// ---- Prenet

Prenet::Prenet(const std::string& name, int in, const std::vector<int>& sizes, double p, Rng& rng)
    : dropout_p(p) {
  int prev = in;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    layers.emplace_back(name + ".fc" + std::to_string(i), prev, sizes[i], rng);
    prev = sizes[i];
  }
}

Var Prenet::forward(Graph& g, Var x, Rng* rng) const {
  for (const Linear& l : layers) {
    x = relu(l.forward(g, x));
    if (rng) x = dropout(x, dropout_p, *rng);
  }
  return x;
}

void Prenet::collect(ParamList& out) {
  for (Linear& l : layers) l.collect(out);
}

// ---- Conv1d and the conv bank

Conv1d::Conv1d(const std::string& name, int in, int out, int width_, Rng& rng)
    : w(name + ".w", glorot_uniform(static_cast<Eigen::Index>(width_) * in, out, rng)),
      b(name + ".b", Mat::Zero(1, out)),
      width(width_) {
  if (width_ < 1) throw ConfigError("conv1d: width must be positive");
}

Var Conv1d::forward(Graph& g, Var x) const {
  return add_row(conv1d(x, g.param(w), width), g.param(b));
}

void Conv1d::collect(ParamList& out) {
  out.push_back(&w);
  out.push_back(&b);
}

ConvBank::ConvBank(const std::string& name, int in, int K, int channels, Rng& rng) {
  if (K < 1) throw ConfigError("conv bank: K must be at least 1 (got " + std::to_string(K) + ")");
  for (int k = 1; k <= K; ++k) convs.emplace_back(name + ".k" + std::to_string(k), in, channels, k, rng);
}

Var ConvBank::forward(Graph& g, Var x) const {
  std::vector<Var> outs;
  outs.reserve(convs.size());
  for (const Conv1d& c : convs) outs.push_back(relu(c.forward(g, x)));
  return concat(outs, 1);
}

void ConvBank::collect(ParamList& out) {
  for (Conv1d& c : convs) c.collect(out);
}

// ---- Highway

Highway::Highway(const std::string& name, int dim, Rng& rng)
    : transform(name + ".h", dim, dim, rng), gate(name + ".t", dim, dim, rng) {}

Var Highway::forward(Graph& g, Var x) const {
  if (x.cols() != transform.in_dim())
    throw ShapeError("highway: input width " + std::to_string(x.cols()) + " vs layer width " +
                     std::to_string(transform.in_dim()));
  Var h = relu(transform.forward(g, x));
  Var t = sigmoid(gate.forward(g, x));
  // t*h + (1-t)*x = x + t*(h - x)
  return add(x, mul(t, sub(h, x)));
}

void Highway::collect(ParamList& out) {
  transform.collect(out);
  gate.collect(out);
}

// ---- GRU

Gru::Gru(const std::string& name, int in, int hidden, Rng& rng)
    : wx(name + ".wx", glorot_uniform(in, 3 * hidden, rng)),
      u_rz(name + ".u_rz", orthogonal_blocks(hidden, 2, rng)),
      u_n(name + ".u_n", orthogonal(hidden, rng)),
      b(name + ".b", Mat::Zero(1, 3 * hidden)) {}

Var Gru::step(Graph& g, Var xw, Var h) const {
  const Eigen::Index H = hidden();
  Var rz = sigmoid(add(slice_cols(xw, 0, 2 * H), matmul(h, g.param(u_rz))));
  Var r = slice_cols(rz, 0, H);
  Var z = slice_cols(rz, H, H);
  Var n = tanh(add(slice_cols(xw, 2 * H, H), matmul(mul(r, h), g.param(u_n))));
  return add(n, mul(z, sub(h, n)));
}

Var Gru::run(Graph& g, Var x, bool reverse) const {
  if (x.cols() != wx.value.rows())
    throw ShapeError("gru: input width " + std::to_string(x.cols()) + " vs " +
                     std::to_string(wx.value.rows()));
  const Eigen::Index T = x.rows();
  if (T == 0) return g.constant(Mat(0, hidden()));
  Var xw = add_row(matmul(x, g.param(wx)), g.param(b));
  Var h = g.constant(Mat::Zero(1, hidden()));
  std::vector<Var> outs(static_cast<std::size_t>(T));
  for (Eigen::Index i = 0; i < T; ++i) {
    const Eigen::Index t = reverse ? T - 1 - i : i;
    h = step(g, slice_rows(xw, t, 1), h);
    outs[static_cast<std::size_t>(t)] = h;
  }
  return concat(outs, 0);
}

void Gru::collect(ParamList& out) {
  out.push_back(&wx);
  out.push_back(&u_rz);
  out.push_back(&u_n);
  out.push_back(&b);
}

BiGru::BiGru(const std::string& name, int in, int hidden, Rng& rng)
    : fwd(name + ".fwd", in, hidden, rng), bwd(name + ".bwd", in, hidden, rng) {}

Var BiGru::forward(Graph& g, Var x) const {
  return concat({fwd.run(g, x, false), bwd.run(g, x, true)}, 1);
}

void BiGru::collect(ParamList& out) {
  fwd.collect(out);
  bwd.collect(out);
}

// ---- LSTM

Lstm::Lstm(const std::string& name, int in, int hidden, Rng& rng)
    : wx(name + ".wx", glorot_uniform(in, 4 * hidden, rng)),
      u(name + ".u", orthogonal_blocks(hidden, 4, rng)),
      b(name + ".b", Mat::Zero(1, 4 * hidden)) {}

LstmState Lstm::zero_state(Graph& g) const {
  return {g.constant(Mat::Zero(1, hidden())), g.constant(Mat::Zero(1, hidden()))};
}

LstmState Lstm::step_projected(Graph& g, Var xw, const LstmState& s) const {
  const Eigen::Index H = hidden();
  Var gates = add(xw, matmul(s.h, g.param(u)));
  Var ifo = sigmoid(gates);
  Var i = slice_cols(ifo, 0, H);
  Var f = slice_cols(ifo, H, H);
  Var o = slice_cols(ifo, 3 * H, H);
  Var cand = tanh(slice_cols(gates, 2 * H, H));
  Var c = add(mul(f, s.c), mul(i, cand));
  return {mul(o, tanh(c)), c};
}

LstmState Lstm::step(Graph& g, Var x, const LstmState& s) const {
  if (x.cols() != in_dim())
    throw ShapeError("lstm: input width " + std::to_string(x.cols()) + " vs " +
                     std::to_string(in_dim()));
  return step_projected(g, add_row(matmul(x, g.param(wx)), g.param(b)), s);
}

Var Lstm::run(Graph& g, Var x, bool reverse) const {
  if (x.cols() != in_dim())
    throw ShapeError("lstm: input width " + std::to_string(x.cols()) + " vs " +
                     std::to_string(in_dim()));
  const Eigen::Index T = x.rows();
  if (T == 0) return g.constant(Mat(0, hidden()));
  Var xw = add_row(matmul(x, g.param(wx)), g.param(b));
  LstmState s = zero_state(g);
  std::vector<Var> outs(static_cast<std::size_t>(T));
  for (Eigen::Index i = 0; i < T; ++i) {
    const Eigen::Index t = reverse ? T - 1 - i : i;
    s = step_projected(g, slice_rows(xw, t, 1), s);
    outs[static_cast<std::size_t>(t)] = s.h;
  }
  return concat(outs, 0);
}

void Lstm::collect(ParamList& out) {
  out.push_back(&wx);
  out.push_back(&u);
  out.push_back(&b);
}

BiLstm::BiLstm(const std::string& name, int in, int hidden, Rng& rng)
    : fwd(name + ".fwd", in, hidden, rng), bwd(name + ".bwd", in, hidden, rng) {}

Var BiLstm::forward(Graph& g, Var x) const {
  return concat({fwd.run(g, x, false), bwd.run(g, x, true)}, 1);
}

void BiLstm::collect(ParamList& out) {
  fwd.collect(out);
  bwd.collect(out);
}

// ---- Location-sensitive attention

LocationAttention::LocationAttention(const std::string& name, int d_dec, int d_enc, int attn_dim,
                                     int n_filters, int width_, Rng& rng)
    : query(name + ".query", glorot_uniform(d_dec, attn_dim, rng)),
      memory(name + ".memory", glorot_uniform(d_enc, attn_dim, rng)),
      loc_conv(name + ".loc_conv", glorot_uniform(width_, n_filters, rng)),
      loc_proj(name + ".loc_proj", glorot_uniform(n_filters, attn_dim, rng)),
      bias(name + ".bias", Mat::Zero(1, attn_dim)),
      v(name + ".v", glorot_uniform(attn_dim, 1, rng)),
      width(width_) {}

AttentionState LocationAttention::initial_state(Graph& g, Eigen::Index L) const {
  Mat first = Mat::Zero(1, L);
  if (L > 0) first(0, 0) = 1.0;
  return {g.constant(std::move(first)), g.constant(Mat::Zero(1, L)),
          g.constant(Mat::Zero(1, d_dec()))};
}

Var LocationAttention::keys(Graph& g, Var h) const { return matmul(h, g.param(memory)); }

AttentionOutput LocationAttention::step(Graph& g, const AttentionState& state, Var h, Var k) const {
  const Eigen::Index L = h.rows();
  if (L == 0) throw InputError("attention: empty encoder sequence");
  if (state.alpha_cum.cols() != L)
    throw ShapeError("attention: cumulative weights cover " + std::to_string(state.alpha_cum.cols()) +
                     " positions, encoder has " + std::to_string(L));
  Var q = add(matmul(state.s_prev, g.param(query)), g.param(bias));
  Var loc = matmul(conv1d(transpose(state.alpha_cum), g.param(loc_conv), width), g.param(loc_proj));
  Var energies = matmul(tanh(add_row(add(k, loc), q)), g.param(v));  // L x 1
  Var alpha = softmax(transpose(energies), 1);
  Var context = matmul(alpha, h);
  return {alpha, context, {alpha, add(state.alpha_cum, alpha), state.s_prev}};
}

void LocationAttention::collect(ParamList& out) {
  for (Parameter* p : {&query, &memory, &loc_conv, &loc_proj, &bias, &v}) out.push_back(p);
}

// ---- CBHG

Cbhg::Cbhg(const std::string& name, const CbhgConfig& cfg, Rng& rng)
    : bank(name + ".bank", cfg.in_dim, cfg.bank_k, cfg.bank_channels, rng),
      proj1(name + ".proj1", cfg.bank_k * cfg.bank_channels, cfg.proj_channels, 3, rng),
      proj2(name + ".proj2", cfg.proj_channels, cfg.in_dim, 3, rng),
      gru(name + ".gru", cfg.in_dim, cfg.gru_hidden, rng),
      pool_width(cfg.pool_width) {
  if (cfg.n_highway < 0) throw ConfigError("cbhg: n_highway must be nonnegative");
  for (int i = 0; i < cfg.n_highway; ++i)
    highways.emplace_back(name + ".hw" + std::to_string(i), cfg.in_dim, rng);
}

Var Cbhg::forward(Graph& g, Var x) const {
  Var y = maxpool_time(bank.forward(g, x), pool_width);
  y = relu(proj1.forward(g, y));
  y = proj2.forward(g, y);
  y = add(y, x);
  for (const Highway& hw : highways) y = hw.forward(g, y);
  return gru.forward(g, y);
}

void Cbhg::collect(ParamList& out) {
  bank.collect(out);
  proj1.collect(out);
  proj2.collect(out);
  for (Highway& h : highways) h.collect(out);
  gru.collect(out);
}

}  // namespace bnclone
