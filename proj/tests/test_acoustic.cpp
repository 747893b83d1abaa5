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

#include <gtest/gtest.h>

#include "bnclone/acoustic.hpp"
#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"
#include "bnclone/gradcheck.hpp"
#include "test_util.hpp"

namespace bnclone {
namespace {

using testing::project;
using testing::rand_mat;

AcousticModelConfig small_config() {
  AcousticModelConfig c;
  c.bn_dim = 4;
  c.out_dim = 5;
  c.prenet1 = 6;
  c.prenet2 = 5;
  c.cbhg.bank_k = 3;
  c.cbhg.bank_channels = 3;
  c.cbhg.proj_channels = 4;
  c.cbhg.n_highway = 1;
  c.cbhg.gru_hidden = 3;
  c.cbhg.in_dim = 999;  // overridden by the model
  return c;
}

void randomize(AcousticModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (Parameter* p : m.params()) p->value = rand_mat(rng, p->value.rows(), p->value.cols(), 0.5);
}

AcousticCodec unit_codec(int n_bfcc, double max_period) {
  AcousticCodec c;
  c.bfcc.mean = Eigen::RowVectorXd::Zero(n_bfcc);
  c.bfcc.std = Eigen::RowVectorXd::Ones(n_bfcc);
  c.max_period = max_period;
  return c;
}

TEST(AcousticCodec, EncodeDecodeRoundTrip) {
  Rng rng(1);
  Mat raw = rand_mat(rng, 6, 5, 3.0);
  raw.col(3) = raw.col(3).cwiseAbs() * 40.0;        // period
  raw.col(4) = raw.col(4).cwiseAbs().cwiseMin(1.0);  // correlation
  const AcousticCodec c = AcousticCodec::fit({raw}, 200.0);
  const Mat z = c.encode(raw);
  EXPECT_LE((z.col(3) - raw.col(3) / 200.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(z.leftCols(3).colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((c.decode(z) - raw).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(c.encode(Mat::Zero(2, 4)), InputError);
  EXPECT_THROW(AcousticCodec::fit({}, 200.0), DataError);
}

TEST(AcousticCodec, DecodeClampsPitch) {
  const AcousticCodec c = unit_codec(2, 100.0);
  Mat z(1, 4);
  z << 0.0, 0.0, -0.5, 1.7;
  const Mat raw = c.decode(z);
  EXPECT_EQ(raw(0, 2), 0.0);
  EXPECT_EQ(raw(0, 3), 1.0);
}

TEST(AcousticModel, ForwardIsPrenetCbhgProjection) {
  const AcousticModelConfig cfg = small_config();
  AcousticModel m(cfg, 5);
  EXPECT_EQ(m.config().cbhg.in_dim, cfg.prenet2);
  // Rebuild the stages from the same seeded stream.
  Rng rng(derive_seed(5, "acoustic/init"));
  Prenet pre("ac.prenet", cfg.bn_dim, {cfg.prenet1, cfg.prenet2}, cfg.dropout, rng);
  CbhgConfig cc = cfg.cbhg;
  cc.in_dim = cfg.prenet2;
  Cbhg cbhg("ac.cbhg", cc, rng);
  Linear proj("ac.proj", cbhg.out_dim(), cfg.out_dim, rng);

  Rng xr(6);
  const Mat x = rand_mat(xr, 7, cfg.bn_dim);
  Graph g(false);
  const Mat want = proj.forward(g, cbhg.forward(g, pre.forward(g, g.constant(x), nullptr))).value();
  const Mat got = m.forward(g, g.constant(x), nullptr).value();
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-14);
  // With the identity codec, predict() decodes the same values.
  EXPECT_LE((m.predict(x).leftCols(3) - want.leftCols(3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AcousticModel, PredictShapes) {
  AcousticModel m(small_config(), 1);
  Rng rng(2);
  EXPECT_EQ(m.predict(rand_mat(rng, 9, 4)).rows(), 9);
  EXPECT_EQ(m.predict(rand_mat(rng, 9, 4)).cols(), 5);
  EXPECT_EQ(m.predict(Mat(0, 4)).rows(), 0);
  EXPECT_THROW(m.predict(rand_mat(rng, 3, 5)), InputError);
}

TEST(AcousticModel, L1LossIsPerFrameSum) {
  AcousticModel m(small_config(), 1);
  for (Parameter* p : m.params())
    if (p->name.rfind("ac.proj", 0) == 0) p->value.setZero();
  Rng rng(3);
  const Mat bn = rand_mat(rng, 4, 4), target = rand_mat(rng, 4, 5);
  Graph g(false);
  EXPECT_NEAR(m.loss(g, bn, target, nullptr).value()(0, 0), target.cwiseAbs().sum() / 4.0, 1e-12);
  // The evaluation metric is the same quantity on raw targets through the codec.
  m.codec() = unit_codec(3, 1.0);
  Mat raw = target;
  raw.col(3) = raw.col(3).cwiseAbs();
  raw.col(4) = raw.col(4).cwiseAbs();
  EXPECT_NEAR(m.l1({{bn, raw}}), raw.cwiseAbs().sum() / 4.0, 1e-12);

  AcousticModelConfig c2 = small_config();
  c2.l2 = true;
  AcousticModel sq(c2, 1);
  for (Parameter* p : sq.params())
    if (p->name.rfind("ac.proj", 0) == 0) p->value.setZero();
  EXPECT_NEAR(sq.loss(g, bn, target, nullptr).value()(0, 0), target.squaredNorm() / 4.0, 1e-12);
}

TEST(AcousticModel, LossErrors) {
  AcousticModel m(small_config(), 1);
  Graph g;
  EXPECT_THROW(m.loss(g, Mat::Zero(3, 4), Mat::Zero(2, 5), nullptr), DataError);
  EXPECT_THROW(m.loss(g, Mat::Zero(0, 4), Mat::Zero(0, 5), nullptr), DataError);
  EXPECT_THROW(m.loss(g, Mat::Zero(3, 3), Mat::Zero(3, 5), nullptr), InputError);
  EXPECT_THROW(pretrain_acoustic(m, {}, TrainOptions{}), DataError);
  EXPECT_THROW(pretrain_acoustic(m, {{Mat::Zero(3, 4), Mat::Zero(2, 5)}}, TrainOptions{}), DataError);
  EXPECT_THROW(AcousticModel(AcousticModelConfig{.bn_dim = 0}, 1), ConfigError);
}

class AcousticGrad : public ::testing::TestWithParam<int> {};

TEST_P(AcousticGrad, FullForwardWithinTolerance) {
  AcousticModelConfig c = small_config();
  c.cbhg.bank_k = 2 + GetParam();
  c.cbhg.n_highway = GetParam();
  AcousticModel m(c, 10 + static_cast<std::uint64_t>(GetParam()));
  randomize(m, 20 + static_cast<std::uint64_t>(GetParam()));
  Rng rng(30 + static_cast<std::uint64_t>(GetParam()));
  const Mat x = rand_mat(rng, 4 + GetParam(), c.bn_dim);
  const GradCheckResult r =
      grad_check_params([&](Graph& g) { return project(g, m.forward(g, g.constant(x), nullptr)); }, m.params());
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(ThreeConfigs, AcousticGrad, ::testing::Values(0, 1, 2));

TEST(MeanPredictor, HandOracle) {
  const AcousticCodec c = unit_codec(1, 1.0);
  Mat a(2, 3), b(2, 3), t(1, 3);
  a << 0, 0, 0,  //
      2, 2, 0.5;
  b << 4, 1, 1,  //
      2, 1, 0.5;
  t << 1, 1, 1;
  // Encoded training mean over four frames: (2, 1, 0.5).
  const double want = std::abs(1 - 2.0) + std::abs(1 - 1.0) + std::abs(1 - 0.5);
  EXPECT_NEAR(mean_predictor_l1(c, {{Mat(2, 1), a}, {Mat(2, 1), b}}, {{Mat(1, 1), t}}), want, 1e-15);
  EXPECT_THROW(mean_predictor_l1(c, {}, {{Mat(1, 1), t}}), DataError);
}

// A smooth frame-wise map the model family can represent.
std::vector<BnAcousticPair> toy_pairs(int n, std::uint64_t seed, double offset) {
  Rng wrng(99);
  const Mat w = rand_mat(wrng, 4, 3);
  Rng rng(seed);
  std::vector<BnAcousticPair> out;
  for (int i = 0; i < n; ++i) {
    const Mat bn = rand_mat(rng, 12, 4);
    Mat ac(12, 5);
    ac.leftCols(3) = (bn * w).array().tanh().matrix();
    ac.leftCols(3).array() += offset;
    ac.col(3) = (bn.col(0).array() * 20.0 + 60.0).matrix();
    ac.col(4) = (bn.col(1).array() * 0.4 + 0.5).matrix();
    out.push_back({bn, ac});
  }
  return out;
}

TEST(AcousticTrain, BeatsMeanPredictor) {
  const auto tr = toy_pairs(20, 1, 0.0), ho = toy_pairs(5, 2, 0.0);
  AcousticModelConfig c = small_config();
  c.dropout = 0.0;
  AcousticModel m(c, 3);
  m.codec().max_period = 200.0;
  TrainOptions opt;
  opt.steps = 300;
  opt.batch_size = 4;
  opt.adam.lr_start = 1e-2;
  const auto losses = pretrain_acoustic(m, tr, opt);
  EXPECT_EQ(losses.size(), 300u);
  EXPECT_LT(m.l1(ho), 0.5 * mean_predictor_l1(m.codec(), tr, ho));
}

TEST(AcousticTrain, SeededTracesRepeat) {
  const auto tr = toy_pairs(6, 1, 0.0);
  auto run = [&](std::uint64_t seed) {
    AcousticModel m(small_config(), 3);
    TrainOptions opt;
    opt.steps = 5;
    opt.batch_size = 2;
    opt.seed = seed;
    return pretrain_acoustic(m, tr, opt);
  };
  EXPECT_EQ(run(4), run(4));
  EXPECT_NE(run(4), run(5));
}

TEST(AcousticCheckpoint, RoundTripAndCompatibility) {
  AcousticModel m(small_config(), 3);
  randomize(m, 4);
  m.codec() = AcousticCodec::fit({toy_pairs(2, 1, 0.0)[0].acoustic}, 150.0);
  const auto path = std::filesystem::temp_directory_path() / "bnclone_test_acoustic.bnck";
  m.to_checkpoint(42).save(path);
  const Checkpoint ck = Checkpoint::load(path);
  const AcousticModel back = AcousticModel::from_checkpoint(ck, 42);
  EXPECT_EQ(back.codec().max_period, 150.0);
  Rng rng(5);
  const Mat x = rand_mat(rng, 6, 4);
  EXPECT_LE((m.predict(x) - back.predict(x)).cwiseAbs().maxCoeff(), 1e-3);  // float32 storage
  EXPECT_THROW(AcousticModel::from_checkpoint(ck, 43), CompatibilityError);
  std::filesystem::remove(path);
}

// ---- text-free adaptation with real audio

struct AdaptFixture : ::testing::Test {
  DspConfig dsp;
  Lexicon lex = Lexicon::toy();

  std::vector<AudioBuffer> render(const SpeakerProfile& spk, int n, std::uint64_t seed) {
    std::vector<AudioBuffer> out;
    Rng rng(seed);
    for (int i = 0; i < n; ++i)
      out.push_back(render_utterance(g2p(random_text(lex, 1, 2, rng), lex), spk, dsp, rng).audio);
    return out;
  }
};

TEST_F(AdaptFixture, ZeroStepsLeavesModelUnchanged) {
  BnExtractor bn({20, 8, 4, n_phones()}, 1);
  AcousticModelConfig c = small_config();
  c.out_dim = 20;
  AcousticModel base(c, 2);
  SpeakerProfile spk{"a", 110.0, 6.0, -6.0, 1.0};
  const auto audio = render(spk, 2, 3);
  TrainOptions opt;
  opt.steps = 0;
  const AdaptationResult r = adapt_speaker(base, audio, audio, bn, dsp, opt);
  EXPECT_EQ(r.report.steps, 0);
  EXPECT_EQ(r.report.param_change_norm, 0.0);
  EXPECT_EQ(r.report.pre_l1, r.report.post_l1);
  EXPECT_EQ(r.report.n_utterances, 2u);
  EXPECT_THROW(adapt_speaker(base, {}, audio, bn, dsp, opt), DataError);
}

TEST_F(AdaptFixture, ReducesHeldOutErrorOnNewSpeaker) {
  BnExtractor bn({20, 8, 4, n_phones()}, 1);
  std::vector<LabeledFeatures> lf;
  SpeakerProfile a{"a", 105.0, 6.0, -8.0, 0.94}, b{"b", 130.0, 8.0, -4.5, 1.06};
  AcousticModelConfig c = small_config();
  c.out_dim = 20;
  AcousticModel base(c, 2);
  base.codec().max_period = dsp.max_period;
  TrainOptions opt;
  opt.steps = 60;
  opt.batch_size = 4;
  pretrain_acoustic(base, bn_pairs(render(a, 6, 10), bn, dsp), opt);
  const auto adapt_audio = render(b, 4, 20), held = render(b, 2, 30);
  opt.steps = 80;
  const AdaptationResult r = adapt_speaker(base, adapt_audio, held, bn, dsp, opt);
  EXPECT_EQ(r.report.steps, 80);
  EXPECT_GT(r.report.param_change_norm, 0.0);
  EXPECT_LT(r.report.post_l1, r.report.pre_l1);
  // The base model is untouched.
  EXPECT_EQ(base.l1(bn_pairs(held, bn, dsp)), r.report.pre_l1);
}

}  // namespace
}  // namespace bnclone
