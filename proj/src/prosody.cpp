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

#include "bnclone/prosody.hpp"

#include <cmath>
#include <string>

#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"

namespace bnclone {

void ProsodyConfig::validate() const {
  if (n_symbols < 1) throw ConfigError("prosody: n_symbols must be positive");
  if (embed_dim < 1 || d_dec < 1 || prenet_dim < 1 || attn_dim < 1 || out_dim < 1)
    throw ConfigError("prosody: layer widths must be positive");
  if (d_enc < 2 || d_enc % 2 != 0) throw ConfigError("prosody: d_enc must be a positive even number");
  if (enc_conv_layers < 0 || enc_conv_width < 1) throw ConfigError("prosody: invalid encoder convolutions");
  if (loc_filters < 1 || loc_width < 1) throw ConfigError("prosody: invalid location features");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("prosody: dropout must lie in [0, 1)");
  if (!(stop_weight >= 0.0)) throw ConfigError("prosody: stop_weight must be nonnegative");
}

ProsodyModel::ProsodyModel(const ProsodyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, "prosody/init"));
  embed_ = Embedding("pr.embed", cfg.n_symbols, cfg.embed_dim, rng);
  int width = cfg.embed_dim;
  for (int i = 0; i < cfg.enc_conv_layers; ++i) {
    convs_.emplace_back("pr.conv" + std::to_string(i), width, cfg.embed_dim, cfg.enc_conv_width, rng);
    width = cfg.embed_dim;
  }
  enc_rnn_ = BiLstm("pr.enc", width, cfg.d_enc / 2, rng);
  attn_ = LocationAttention("pr.attn", cfg.d_dec, cfg.d_enc, cfg.attn_dim, cfg.loc_filters, cfg.loc_width, rng);
  prenet_ = Prenet("pr.prenet", cfg.out_dim, {cfg.prenet_dim, cfg.prenet_dim}, cfg.dropout, rng);
  lstm1_ = Lstm("pr.dec1", cfg.prenet_dim + cfg.d_enc, cfg.d_dec, rng);
  lstm2_ = Lstm("pr.dec2", cfg.d_dec, cfg.d_dec, rng);
  proj_ = Linear("pr.proj", cfg.d_dec + cfg.d_enc, cfg.out_dim + 1, rng);
  norm_.mean = Eigen::RowVectorXd::Zero(cfg.out_dim);
  norm_.std = Eigen::RowVectorXd::Ones(cfg.out_dim);
}

void ProsodyModel::check_ids(std::span<const int> ids) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || ids[i] >= cfg_.n_symbols)
      throw InputError("prosody: phone id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                       " is outside the inventory of " + std::to_string(cfg_.n_symbols));
}

Var ProsodyModel::encode(Graph& g, std::span<const int> ids, Rng* rng) const {
  check_ids(ids);
  if (ids.empty()) throw InputError("prosody: empty phone sequence");
  Var x = embed_.forward(g, ids);
  for (const Conv1d& c : convs_) {
    x = relu(c.forward(g, x));
    if (rng) x = dropout(x, cfg_.dropout, *rng);
  }
  return enc_rnn_.forward(g, x);
}

Mat ProsodyModel::encode(std::span<const int> ids) const {
  Graph g(false);
  return encode(g, ids, nullptr).value();
}

DecoderState ProsodyModel::initial_decoder(Graph& g) const { return {lstm1_.zero_state(g), lstm2_.zero_state(g)}; }

AttentionState ProsodyModel::initial_attention(Graph& g, Eigen::Index L) const { return attn_.initial_state(g, L); }

DecodeOutput ProsodyModel::decode_step(Graph& g, const DecoderState& state, Var context, Var y_prev,
                                       Rng* rng) const {
  if (context.rows() != 1 || context.cols() != cfg_.d_enc)
    throw ShapeError("prosody: context must be 1 x " + std::to_string(cfg_.d_enc));
  if (y_prev.rows() != 1 || y_prev.cols() != cfg_.out_dim)
    throw ShapeError("prosody: previous frame must be 1 x " + std::to_string(cfg_.out_dim));
  Var p = prenet_.forward(g, y_prev, rng);
  LstmState s1 = lstm1_.step(g, concat({p, context}, 1), state.lstm1);
  LstmState s2 = lstm2_.step(g, s1.h, state.lstm2);
  Var out = proj_.forward(g, concat({s2.h, context}, 1));
  return {slice_cols(out, 0, cfg_.out_dim), slice_cols(out, cfg_.out_dim, 1), {s1, s2}};
}

StepOutput ProsodyModel::step(Graph& g, const DecoderState& dec, const AttentionState& att, Var h, Var keys,
                              Var y_prev, Rng* rng) const {
  AttentionState query = att;
  query.s_prev = dec.lstm2.h;
  AttentionOutput a = attn_.step(g, query, h, keys);
  DecodeOutput d = decode_step(g, dec, a.context, y_prev, rng);
  return {d.y, d.stop, a.alpha, d.next, a.next};
}

ProsodyLoss ProsodyModel::loss(Graph& g, std::span<const int> ids, const Mat& target, Rng* rng) const {
  if (target.cols() != cfg_.out_dim)
    throw ShapeError("prosody: target frames must have " + std::to_string(cfg_.out_dim) + " columns, got " +
                     std::to_string(target.cols()));
  const Eigen::Index N = target.rows();
  if (N == 0) throw DataError("prosody: empty target sequence");
  Var h = encode(g, ids, rng);
  Var keys = attn_.keys(g, h);
  DecoderState dec = initial_decoder(g);
  AttentionState att = initial_attention(g, h.rows());
  Mat prev = Mat::Zero(1, cfg_.out_dim);
  std::vector<Var> ys, stops;
  ys.reserve(N);
  stops.reserve(N);
  for (Eigen::Index t = 0; t < N; ++t) {
    StepOutput s = step(g, dec, att, h, keys, g.constant(prev), rng);
    ys.push_back(s.y);
    stops.push_back(s.stop);
    dec = s.decoder;
    att = s.attention;
    prev = target.row(t);
  }
  Mat stop_target = Mat::Zero(N, 1);
  stop_target(N - 1, 0) = 1.0;
  Var l2 = mse(concat(ys, 0), g.constant(target));
  Var stop = bce_with_logits(concat(stops, 0), stop_target);
  Var total = cfg_.stop_weight > 0.0 ? add(l2, affine(stop, cfg_.stop_weight, 0.0)) : l2;
  return {total, l2, stop};
}

double ProsodyModel::eval_loss(std::span<const int> ids, const Mat& frames) const {
  Graph g(false);
  return loss(g, ids, norm_.apply(frames), nullptr).total.value()(0, 0);
}

SynthesisResult ProsodyModel::synthesize(std::span<const int> ids, int max_frames, double stop_threshold) const {
  check_ids(ids);
  if (ids.empty()) throw InputError("prosody: empty phone sequence");
  if (max_frames < 0) throw InputError("prosody: max_frames must be nonnegative");
  SynthesisResult res;
  const Eigen::Index L = static_cast<Eigen::Index>(ids.size());
  Mat frames(max_frames, cfg_.out_dim);
  Mat align(max_frames, L);
  res.truncated = true;
  Eigen::Index n = 0;
  if (max_frames > 0) {
    // One graph holds the encoder; each step is evaluated in its own graph so
    // memory stays flat for long outputs.
    const Mat h = encode(ids);
    Graph g0(false);
    const Mat keys = attn_.keys(g0, g0.constant(h)).value();
    Mat prev = Mat::Zero(1, cfg_.out_dim);
    Mat h1 = Mat::Zero(1, cfg_.d_dec), c1 = h1, h2 = h1, c2 = h1;
    Mat alpha_prev, alpha_cum;
    {
      Graph gi(false);
      AttentionState a0 = initial_attention(gi, L);
      alpha_prev = a0.alpha_prev.value();
      alpha_cum = a0.alpha_cum.value();
    }
    for (; n < max_frames;) {
      Graph g(false);
      DecoderState dec{{g.constant(h1), g.constant(c1)}, {g.constant(h2), g.constant(c2)}};
      AttentionState att{g.constant(alpha_prev), g.constant(alpha_cum), g.constant(h2)};
      StepOutput s = step(g, dec, att, g.constant(h), g.constant(keys), g.constant(prev), nullptr);
      prev = s.y.value();
      frames.row(n) = prev;
      align.row(n) = s.alpha.value();
      const double p = 1.0 / (1.0 + std::exp(-s.stop.value()(0, 0)));
      res.stop_prob.push_back(p);
      h1 = s.decoder.lstm1.h.value();
      c1 = s.decoder.lstm1.c.value();
      h2 = s.decoder.lstm2.h.value();
      c2 = s.decoder.lstm2.c.value();
      alpha_prev = s.attention.alpha_prev.value();
      alpha_cum = s.attention.alpha_cum.value();
      ++n;
      if (p > stop_threshold) {
        res.truncated = false;
        break;
      }
    }
  }
  res.frames = norm_.invert(frames.topRows(n));
  res.alignment = align.topRows(n);
  return res;
}

ParamList ProsodyModel::params() {
  ParamList ps;
  embed_.collect(ps);
  for (Conv1d& c : convs_) c.collect(ps);
  enc_rnn_.collect(ps);
  attn_.collect(ps);
  prenet_.collect(ps);
  lstm1_.collect(ps);
  lstm2_.collect(ps);
  proj_.collect(ps);
  return ps;
}

Checkpoint ProsodyModel::to_checkpoint(const std::string& kind, std::uint64_t fingerprint) const {
  Checkpoint ck;
  ck.fingerprint = fingerprint;
  ck.meta["kind"] = kind;
  ck.meta["n_symbols"] = std::to_string(cfg_.n_symbols);
  ck.meta["embed_dim"] = std::to_string(cfg_.embed_dim);
  ck.meta["enc_conv_layers"] = std::to_string(cfg_.enc_conv_layers);
  ck.meta["enc_conv_width"] = std::to_string(cfg_.enc_conv_width);
  ck.meta["d_enc"] = std::to_string(cfg_.d_enc);
  ck.meta["d_dec"] = std::to_string(cfg_.d_dec);
  ck.meta["prenet_dim"] = std::to_string(cfg_.prenet_dim);
  ck.meta["attn_dim"] = std::to_string(cfg_.attn_dim);
  ck.meta["loc_filters"] = std::to_string(cfg_.loc_filters);
  ck.meta["loc_width"] = std::to_string(cfg_.loc_width);
  ck.meta["out_dim"] = std::to_string(cfg_.out_dim);
  ck.meta["dropout"] = std::to_string(cfg_.dropout);
  ck.meta["stop_weight"] = std::to_string(cfg_.stop_weight);
  ck.add_params(const_cast<ProsodyModel*>(this)->params());
  norm_.save(ck, "pr.norm");
  return ck;
}

ProsodyModel ProsodyModel::from_checkpoint(const Checkpoint& ck, const std::string& kind, std::uint64_t expect) {
  ck.expect(kind, expect);
  ProsodyConfig cfg;
  cfg.n_symbols = ck.meta_int("n_symbols");
  cfg.embed_dim = ck.meta_int("embed_dim");
  cfg.enc_conv_layers = ck.meta_int("enc_conv_layers");
  cfg.enc_conv_width = ck.meta_int("enc_conv_width");
  cfg.d_enc = ck.meta_int("d_enc");
  cfg.d_dec = ck.meta_int("d_dec");
  cfg.prenet_dim = ck.meta_int("prenet_dim");
  cfg.attn_dim = ck.meta_int("attn_dim");
  cfg.loc_filters = ck.meta_int("loc_filters");
  cfg.loc_width = ck.meta_int("loc_width");
  cfg.out_dim = ck.meta_int("out_dim");
  cfg.dropout = ck.meta_double("dropout");
  cfg.stop_weight = ck.meta_double("stop_weight");
  ProsodyModel m(cfg, 0);
  ck.load_params(m.params());
  m.norm_ = FeatureNorm::load(ck, "pr.norm", cfg.out_dim);
  return m;
}

double monotonicity(const Mat& a) {
  if (a.rows() < 2) return 1.0;
  Eigen::Index prev = 0, cur = 0;
  a.row(0).maxCoeff(&prev);
  int ok = 0;
  for (Eigen::Index t = 1; t < a.rows(); ++t) {
    a.row(t).maxCoeff(&cur);
    if (cur >= prev) ++ok;
    prev = cur;
  }
  return static_cast<double>(ok) / static_cast<double>(a.rows() - 1);
}

double coverage(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  std::vector<bool> hit(static_cast<std::size_t>(a.cols()), false);
  for (Eigen::Index t = 0; t < a.rows(); ++t) {
    Eigen::Index j = 0;
    a.row(t).maxCoeff(&j);
    hit[static_cast<std::size_t>(j)] = true;
  }
  double n = 0;
  for (bool b : hit) n += b ? 1.0 : 0.0;
  return n / static_cast<double>(a.cols());
}

std::vector<double> train_sequence_model(ProsodyModel& model, const std::vector<SequencePair>& data,
                                         const TrainOptions& opt, bool fit_norm, AdamState& state,
                                         const StepCallback& after_step) {
  if (data.empty()) throw DataError("prosody training: empty corpus");
  if (fit_norm) {
    std::vector<Mat> frames;
    for (const auto& p : data) frames.push_back(p.frames);
    model.norm() = FeatureNorm::fit(frames);
  }
  std::vector<Mat> targets;
  targets.reserve(data.size());
  for (const auto& p : data) targets.push_back(model.norm().apply(p.frames));
  const ParamList ps = model.params();
  auto loss = [&](Graph& g, std::size_t i, Rng& rng) { return model.loss(g, data[i].ids, targets[i], &rng).total; };
  return run_training(ps, state, data.size(), opt, loss, after_step);
}

}  // namespace bnclone
