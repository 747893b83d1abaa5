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

#include "bnclone/acoustic.hpp"

#include <cmath>

#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"

namespace bnclone {

// ---- codec

AcousticCodec AcousticCodec::fit(const std::vector<Mat>& acoustic, double max_period) {
  if (acoustic.empty()) throw DataError("acoustic codec: no data");
  std::vector<Mat> b;
  for (const Mat& m : acoustic) {
    if (m.cols() < 3) throw ShapeError("acoustic codec: frames need at least 3 columns");
    b.push_back(m.leftCols(m.cols() - 2));
  }
  AcousticCodec c;
  c.bfcc = FeatureNorm::fit(b);
  c.max_period = max_period;
  return c;
}

Mat AcousticCodec::encode(const Mat& raw) const {
  if (raw.cols() != dim())
    throw InputError("acoustic codec: expected " + std::to_string(dim()) + " columns, got " + std::to_string(raw.cols()));
  Mat z(raw.rows(), raw.cols());
  const Eigen::Index d = bfcc.dim();
  z.leftCols(d) = bfcc.apply(raw.leftCols(d));
  z.col(d) = raw.col(d) / max_period;
  z.col(d + 1) = raw.col(d + 1);
  return z;
}

Mat AcousticCodec::decode(const Mat& z) const {
  if (z.cols() != dim())
    throw InputError("acoustic codec: expected " + std::to_string(dim()) + " columns, got " + std::to_string(z.cols()));
  Mat raw(z.rows(), z.cols());
  const Eigen::Index d = bfcc.dim();
  raw.leftCols(d) = bfcc.invert(z.leftCols(d));
  raw.col(d) = (z.col(d) * max_period).cwiseMax(0.0);
  raw.col(d + 1) = z.col(d + 1).cwiseMax(0.0).cwiseMin(1.0);
  return raw;
}

void AcousticCodec::save(Checkpoint& ck, const std::string& prefix) const {
  bfcc.save(ck, prefix + ".bfcc");
  Mat mp(1, 1);
  mp(0, 0) = max_period;
  ck.entries.push_back({prefix + ".max_period", mp});
}

AcousticCodec AcousticCodec::load(const Checkpoint& ck, const std::string& prefix, Eigen::Index n_bfcc) {
  AcousticCodec c;
  c.bfcc = FeatureNorm::load(ck, prefix + ".bfcc", n_bfcc);
  c.max_period = ck.get(prefix + ".max_period", 1, 1)(0, 0);
  return c;
}

// ---- model

AcousticModel::AcousticModel(const AcousticModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.bn_dim < 1 || cfg.out_dim < 3 || cfg.prenet1 < 1 || cfg.prenet2 < 1)
    throw ConfigError("acoustic model: invalid dimensions");
  cfg_.cbhg.in_dim = cfg.prenet2;
  Rng rng(derive_seed(seed, "acoustic/init"));
  prenet_ = Prenet("ac.prenet", cfg.bn_dim, {cfg.prenet1, cfg.prenet2}, cfg.dropout, rng);
  cbhg_ = Cbhg("ac.cbhg", cfg_.cbhg, rng);
  proj_ = Linear("ac.proj", cbhg_.out_dim(), cfg.out_dim, rng);
  codec_.bfcc.mean = Eigen::RowVectorXd::Zero(cfg.out_dim - 2);
  codec_.bfcc.std = Eigen::RowVectorXd::Ones(cfg.out_dim - 2);
}

void AcousticModel::check(const Mat& bn) const {
  if (bn.cols() != cfg_.bn_dim)
    throw InputError("acoustic model: expected BN width " + std::to_string(cfg_.bn_dim) + ", got " +
                     std::to_string(bn.cols()));
}

Var AcousticModel::forward(Graph& g, Var bn, Rng* rng) const {
  return proj_.forward(g, cbhg_.forward(g, prenet_.forward(g, bn, rng)));
}

Mat AcousticModel::predict(const Mat& bn) const {
  check(bn);
  if (bn.rows() == 0) return Mat(0, cfg_.out_dim);
  Graph g(false);
  return codec_.decode(forward(g, g.constant(bn), nullptr).value());
}

Var AcousticModel::loss(Graph& g, const Mat& bn, const Mat& target, Rng* rng) const {
  check(bn);
  if (bn.rows() != target.rows())
    throw DataError("acoustic model: " + std::to_string(bn.rows()) + " BN frames but " +
                    std::to_string(target.rows()) + " target frames");
  if (bn.rows() == 0) throw DataError("acoustic model: empty utterance");
  Var err = sub(forward(g, g.constant(bn), rng), g.constant(target));
  Var total = cfg_.l2 ? bnclone::l2(err) : bnclone::l1(err);
  return affine(total, 1.0 / static_cast<double>(bn.rows()), 0.0);
}

double AcousticModel::l1(const std::vector<BnAcousticPair>& data) const {
  double total = 0.0;
  double frames = 0.0;
  for (const auto& p : data) {
    check(p.bn);
    if (p.bn.rows() != p.acoustic.rows()) throw DataError("acoustic model: pair length mismatch");
    if (p.bn.rows() == 0) continue;
    Graph g(false);
    const Mat pred = forward(g, g.constant(p.bn), nullptr).value();
    total += (pred - codec_.encode(p.acoustic)).cwiseAbs().sum();
    frames += static_cast<double>(p.bn.rows());
  }
  return frames > 0 ? total / frames : 0.0;
}

ParamList AcousticModel::params() {
  ParamList ps;
  prenet_.collect(ps);
  cbhg_.collect(ps);
  proj_.collect(ps);
  return ps;
}

Checkpoint AcousticModel::to_checkpoint(std::uint64_t fingerprint) const {
  Checkpoint ck;
  ck.fingerprint = fingerprint;
  ck.meta["kind"] = "acoustic";
  ck.meta["bn_dim"] = std::to_string(cfg_.bn_dim);
  ck.meta["out_dim"] = std::to_string(cfg_.out_dim);
  ck.meta["prenet1"] = std::to_string(cfg_.prenet1);
  ck.meta["prenet2"] = std::to_string(cfg_.prenet2);
  ck.meta["cbhg.bank_k"] = std::to_string(cfg_.cbhg.bank_k);
  ck.meta["cbhg.bank_channels"] = std::to_string(cfg_.cbhg.bank_channels);
  ck.meta["cbhg.proj_channels"] = std::to_string(cfg_.cbhg.proj_channels);
  ck.meta["cbhg.n_highway"] = std::to_string(cfg_.cbhg.n_highway);
  ck.meta["cbhg.gru_hidden"] = std::to_string(cfg_.cbhg.gru_hidden);
  ck.meta["cbhg.pool_width"] = std::to_string(cfg_.cbhg.pool_width);
  ck.meta["dropout"] = std::to_string(cfg_.dropout);
  ck.meta["loss"] = cfg_.l2 ? "l2" : "l1";
  ck.add_params(const_cast<AcousticModel*>(this)->params());
  codec_.save(ck, "ac.codec");
  return ck;
}

AcousticModel AcousticModel::from_checkpoint(const Checkpoint& ck, std::uint64_t expect) {
  ck.expect("acoustic", expect);
  AcousticModelConfig cfg;
  cfg.bn_dim = ck.meta_int("bn_dim");
  cfg.out_dim = ck.meta_int("out_dim");
  cfg.prenet1 = ck.meta_int("prenet1");
  cfg.prenet2 = ck.meta_int("prenet2");
  cfg.cbhg.bank_k = ck.meta_int("cbhg.bank_k");
  cfg.cbhg.bank_channels = ck.meta_int("cbhg.bank_channels");
  cfg.cbhg.proj_channels = ck.meta_int("cbhg.proj_channels");
  cfg.cbhg.n_highway = ck.meta_int("cbhg.n_highway");
  cfg.cbhg.gru_hidden = ck.meta_int("cbhg.gru_hidden");
  cfg.cbhg.pool_width = ck.meta_int("cbhg.pool_width");
  cfg.dropout = ck.meta_double("dropout");
  cfg.l2 = ck.meta_at("loss") == "l2";
  AcousticModel m(cfg, 0);
  ck.load_params(m.params());
  m.codec_ = AcousticCodec::load(ck, "ac.codec", cfg.out_dim - 2);
  return m;
}

// ---- training

double mean_predictor_l1(const AcousticCodec& codec, const std::vector<BnAcousticPair>& train,
                         const std::vector<BnAcousticPair>& test) {
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(codec.dim());
  double n = 0.0;
  for (const auto& p : train) {
    if (p.acoustic.rows() == 0) continue;
    mean += codec.encode(p.acoustic).colwise().sum();
    n += static_cast<double>(p.acoustic.rows());
  }
  if (n == 0.0) throw DataError("mean predictor: no training frames");
  mean /= n;
  double total = 0.0, frames = 0.0;
  for (const auto& p : test) {
    if (p.acoustic.rows() == 0) continue;
    total += (codec.encode(p.acoustic).rowwise() - mean).cwiseAbs().sum();
    frames += static_cast<double>(p.acoustic.rows());
  }
  return frames > 0 ? total / frames : 0.0;
}

namespace {

std::vector<Mat> encode_all(const AcousticCodec& codec, const std::vector<BnAcousticPair>& data) {
  std::vector<Mat> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].bn.rows() != data[i].acoustic.rows())
      throw DataError("acoustic training: pair " + std::to_string(i) + " has " + std::to_string(data[i].bn.rows()) +
                      " BN frames but " + std::to_string(data[i].acoustic.rows()) + " acoustic frames");
    out.push_back(codec.encode(data[i].acoustic));
  }
  return out;
}

std::vector<double> fit_frames(AcousticModel& model, const std::vector<BnAcousticPair>& data,
                               const std::vector<Mat>& targets, AdamState& state, const TrainOptions& opt,
                               const StepCallback& after_step) {
  const ParamList ps = model.params();
  auto loss = [&](Graph& g, std::size_t i, Rng& rng) { return model.loss(g, data[i].bn, targets[i], &rng); };
  return run_training(ps, state, data.size(), opt, loss, after_step);
}

}  // namespace

std::vector<double> pretrain_acoustic(AcousticModel& model, const std::vector<BnAcousticPair>& train,
                                      const TrainOptions& opt, const StepCallback& after_step) {
  if (train.empty()) throw DataError("pretrain_acoustic: empty training set");
  std::vector<Mat> raw;
  for (const auto& p : train) raw.push_back(p.acoustic);
  model.codec() = AcousticCodec::fit(raw, model.codec().max_period);
  const std::vector<Mat> targets = encode_all(model.codec(), train);
  AdamState state;
  return fit_frames(model, train, targets, state, opt, after_step);
}

std::vector<BnAcousticPair> bn_pairs(const std::vector<AudioBuffer>& audio, const BnExtractor& bn,
                                     const DspConfig& dsp) {
  std::vector<BnAcousticPair> out;
  out.reserve(audio.size());
  for (const AudioBuffer& a : audio) {
    const Mat ac = analyze(a, dsp).to_matrix();
    out.push_back({bn.extract(ac), ac});
  }
  return out;
}

AdaptationResult adapt_speaker(const AcousticModel& base, const std::vector<AudioBuffer>& audio,
                               const std::vector<AudioBuffer>& heldout, const BnExtractor& bn,
                               const DspConfig& dsp, const TrainOptions& opt) {
  if (audio.empty()) throw DataError("adapt_speaker: no adaptation audio");
  const std::vector<BnAcousticPair> data = bn_pairs(audio, bn, dsp);
  const std::vector<BnAcousticPair> probe = bn_pairs(heldout, bn, dsp);
  AdaptationResult res{base, {}};
  res.report.n_utterances = audio.size();
  res.report.pre_l1 = base.l1(probe);
  const std::vector<Mat> targets = encode_all(base.codec(), data);
  AdamState state;
  res.report.losses = fit_frames(res.model, data, targets, state, opt, {});
  res.report.steps = static_cast<int>(res.report.losses.size());
  res.report.post_l1 = res.model.l1(probe);
  double sq = 0.0;
  const ParamList after = res.model.params();
  const ParamList before = const_cast<AcousticModel&>(base).params();
  for (std::size_t i = 0; i < after.size(); ++i) sq += (after[i]->value - before[i]->value).squaredNorm();
  res.report.param_change_norm = std::sqrt(sq);
  return res;
}

}  // namespace bnclone
