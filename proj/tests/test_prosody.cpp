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

#include <cmath>

#include "bnclone/error.hpp"
#include "bnclone/gradcheck.hpp"
#include "bnclone/prosody.hpp"
#include "test_util.hpp"

namespace bnclone {
namespace {

using testing::project;
using testing::rand_mat;

ProsodyConfig small_config(int variant = 0) {
  ProsodyConfig c;
  c.n_symbols = 6;
  c.embed_dim = 4 + variant;
  c.enc_conv_layers = 1 + variant % 2;
  c.enc_conv_width = 3;
  c.d_enc = 6;
  c.d_dec = 5 + variant;
  c.prenet_dim = 4;
  c.attn_dim = 4;
  c.loc_filters = 2;
  c.loc_width = 3;
  c.out_dim = 3;
  return c;
}

void randomize(ProsodyModel& m, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (Parameter* p : m.params()) p->value = rand_mat(rng, p->value.rows(), p->value.cols(), scale);
}

const Mat& param(ProsodyModel& m, const std::string& name) {
  for (Parameter* p : m.params())
    if (p->name == name) return p->value;
  throw std::runtime_error("no parameter " + name);
}

Mat sigmoid_m(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }
Mat tanh_m(const Mat& x) { return x.array().tanh().matrix(); }
Mat relu_m(const Mat& x) { return x.cwiseMax(0.0); }

// h' and c' of one LSTM step from gate pre-activations [i | f | g | o].
std::pair<Mat, Mat> lstm_oracle(const Mat& z, const Mat& c_prev) {
  const Eigen::Index H = z.cols() / 4;
  const Mat i = sigmoid_m(z.middleCols(0, H)), f = sigmoid_m(z.middleCols(H, H));
  const Mat g = tanh_m(z.middleCols(2 * H, H)), o = sigmoid_m(z.middleCols(3 * H, H));
  const Mat c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  return {(o.array() * c.array().tanh()).matrix(), c};
}

// ---- encoder

TEST(ProsodyEncode, ShapeAndDeterminism) {
  ProsodyModel m(small_config(), 1);
  const std::vector<int> one = {3};
  EXPECT_EQ(m.encode(one).rows(), 1);
  EXPECT_EQ(m.encode(one).cols(), 6);
  const std::vector<int> ids = {0, 1, 2, 5, 4};
  const Mat a = m.encode(ids), b = m.encode(ids);
  EXPECT_EQ(a.rows(), 5);
  EXPECT_TRUE(a == b);
}

TEST(ProsodyEncode, SensitiveToOrder) {
  ProsodyModel m(small_config(), 1);
  randomize(m, 3);
  const std::vector<int> ids = {0, 1, 2, 5, 4}, perm = {4, 2, 0, 5, 1};
  EXPECT_GT((m.encode(ids) - m.encode(perm)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ProsodyEncode, OutOfInventoryNamesPosition) {
  ProsodyModel m(small_config(), 1);
  const std::vector<int> ids = {0, 1, 6, 2};
  try {
    m.encode(ids);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("position 2"), std::string::npos) << e.what();
  }
  const std::vector<int> neg = {-1};
  EXPECT_THROW(m.encode(neg), InputError);
  EXPECT_THROW(m.encode(std::vector<int>{}), InputError);
}

// ---- decoder step

TEST(ProsodyDecodeStep, InitialStepMatchesHandOracle) {
  const ProsodyConfig c = small_config();
  ProsodyModel m(c, 2);
  randomize(m, 5);
  Rng rng(6);
  const Mat ctx = rand_mat(rng, 1, c.d_enc);

  Graph g(false);
  const DecodeOutput out = m.decode_step(g, m.initial_decoder(g), g.constant(ctx), g.constant(Mat::Zero(1, c.out_dim)),
                                         nullptr);

  const Mat p1 = relu_m(param(m, "pr.prenet.fc0.b"));  // zero input
  const Mat p2 = relu_m(p1 * param(m, "pr.prenet.fc1.w") + param(m, "pr.prenet.fc1.b"));
  Mat x1(1, c.prenet_dim + c.d_enc);
  x1 << p2, ctx;
  const Mat zero_c = Mat::Zero(1, c.d_dec);
  const auto [h1, c1] = lstm_oracle(x1 * param(m, "pr.dec1.wx") + param(m, "pr.dec1.b"), zero_c);
  const auto [h2, c2] = lstm_oracle(h1 * param(m, "pr.dec2.wx") + param(m, "pr.dec2.b"), zero_c);
  Mat x2(1, c.d_dec + c.d_enc);
  x2 << h2, ctx;
  const Mat proj = x2 * param(m, "pr.proj.w") + param(m, "pr.proj.b");

  EXPECT_LE((out.y.value() - proj.leftCols(c.out_dim)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(out.stop.value()(0, 0), proj(0, c.out_dim), 1e-12);
  EXPECT_LE((out.next.lstm1.h.value() - h1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((out.next.lstm2.c.value() - c2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProsodyDecodeStep, DeterministicAndShapeChecked) {
  const ProsodyConfig c = small_config();
  ProsodyModel m(c, 2);
  randomize(m, 5);
  Rng rng(7);
  const Mat ctx = rand_mat(rng, 1, c.d_enc), y = rand_mat(rng, 1, c.out_dim);
  Graph g(false);
  const DecoderState s = m.initial_decoder(g);
  const DecodeOutput a = m.decode_step(g, s, g.constant(ctx), g.constant(y), nullptr);
  const DecodeOutput b = m.decode_step(g, s, g.constant(ctx), g.constant(y), nullptr);
  EXPECT_TRUE(a.y.value() == b.y.value());
  EXPECT_TRUE(a.stop.value() == b.stop.value());
  EXPECT_THROW(m.decode_step(g, s, g.constant(Mat::Zero(1, c.d_enc + 1)), g.constant(y), nullptr), ShapeError);
  EXPECT_THROW(m.decode_step(g, s, g.constant(ctx), g.constant(Mat::Zero(1, c.out_dim + 1)), nullptr), ShapeError);
}

class ProsodyGrad : public ::testing::TestWithParam<int> {};

TEST_P(ProsodyGrad, DecodeStepWithinTolerance) {
  const int v = GetParam();
  const ProsodyConfig c = small_config(v);
  ProsodyModel m(c, 10 + static_cast<std::uint64_t>(v));
  randomize(m, 20 + static_cast<std::uint64_t>(v));
  Rng rng(30 + static_cast<std::uint64_t>(v));
  const Mat ctx = rand_mat(rng, 1, c.d_enc), y = rand_mat(rng, 1, c.out_dim);
  const Mat h1 = rand_mat(rng, 1, c.d_dec), c1 = rand_mat(rng, 1, c.d_dec);
  const Mat h2 = rand_mat(rng, 1, c.d_dec), c2 = rand_mat(rng, 1, c.d_dec);
  // Inputs: context, previous frame and the four recurrent state rows.
  auto f = [&](Graph& g, std::span<const Var> in) {
    const DecoderState s{{in[2], in[3]}, {in[4], in[5]}};
    const DecodeOutput o = m.decode_step(g, s, in[0], in[1], nullptr);
    return add(project(g, o.y, 1), add(project(g, o.stop, 2), project(g, o.next.lstm2.c, 3)));
  };
  EXPECT_LE(grad_check(f, {ctx, y, h1, c1, h2, c2}).max_rel_error, 1e-6);
  auto fp = [&](Graph& g) {
    const DecoderState s{{g.constant(h1), g.constant(c1)}, {g.constant(h2), g.constant(c2)}};
    const DecodeOutput o = m.decode_step(g, s, g.constant(ctx), g.constant(y), nullptr);
    return add(project(g, o.y, 1), project(g, o.stop, 2));
  };
  const GradCheckResult r = grad_check_params(fp, m.params());
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST_P(ProsodyGrad, TeacherForcedLossWithinTolerance) {
  const int v = GetParam();
  const ProsodyConfig c = small_config(v);
  ProsodyModel m(c, 40 + static_cast<std::uint64_t>(v));
  randomize(m, 50 + static_cast<std::uint64_t>(v));
  Rng rng(60 + static_cast<std::uint64_t>(v));
  const std::vector<int> ids = {1, 3, 0, 5};
  const Mat target = rand_mat(rng, 3, c.out_dim);
  const GradCheckResult r =
      grad_check_params([&](Graph& g) { return m.loss(g, ids, target, nullptr).total; }, m.params());
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(ThreeConfigs, ProsodyGrad, ::testing::Values(0, 1, 2));

// ---- loss

TEST(ProsodyLoss, Decomposition) {
  ProsodyConfig c = small_config();
  Rng rng(8);
  const std::vector<int> ids = {1, 2, 3};
  const Mat target = rand_mat(rng, 5, c.out_dim);
  c.stop_weight = 0.0;
  ProsodyModel pure(c, 4);
  Graph g(false);
  const ProsodyLoss a = pure.loss(g, ids, target, nullptr);
  EXPECT_EQ(a.total.value()(0, 0), a.l2.value()(0, 0));

  c.stop_weight = 0.1;
  ProsodyModel mixed(c, 4);
  const ProsodyLoss b = mixed.loss(g, ids, target, nullptr);
  EXPECT_NEAR(b.total.value()(0, 0), b.l2.value()(0, 0) + 0.1 * b.stop.value()(0, 0), 1e-12);
  // Same initialisation, so the L2 terms agree.
  EXPECT_EQ(a.l2.value()(0, 0), b.l2.value()(0, 0));
}

TEST(ProsodyLoss, L2TermIsMeanSquaredError) {
  ProsodyConfig c = small_config();
  c.stop_weight = 0.0;
  ProsodyModel m(c, 4);
  Rng rng(9);
  const std::vector<int> ids = {1, 2, 3};
  const Mat target = rand_mat(rng, 4, c.out_dim);
  // Zero output projection makes every prediction zero.
  for (Parameter* p : m.params())
    if (p->name.rfind("pr.proj", 0) == 0) p->value.setZero();
  Graph g(false);
  EXPECT_NEAR(m.loss(g, ids, target, nullptr).l2.value()(0, 0),
              target.squaredNorm() / static_cast<double>(target.size()), 1e-12);
}

TEST(ProsodyLoss, Errors) {
  ProsodyModel m(small_config(), 4);
  Graph g;
  const std::vector<int> ids = {1, 2};
  EXPECT_THROW(m.loss(g, ids, Mat::Zero(0, 3), nullptr), DataError);
  EXPECT_THROW(m.loss(g, ids, Mat::Zero(4, 2), nullptr), ShapeError);
  AdamState st;
  EXPECT_THROW(train_sequence_model(m, {}, TrainOptions{}, true, st), DataError);
}

// ---- training

Mat smooth_target(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  const Mat basis = rand_mat(rng, 2, dim);
  Mat t(n, dim);
  for (int i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / n;
    t.row(i) = std::sin(6.0 * tau) * basis.row(0) + std::cos(3.0 * tau) * basis.row(1);
  }
  return t;
}

double l2_term(const ProsodyModel& m, const SequencePair& p) {
  Graph g(false);
  return m.loss(g, p.ids, m.norm().apply(p.frames), nullptr).l2.value()(0, 0);
}

TEST(ProsodyTrain, MemorisesOneUtterance) {
  ProsodyConfig c = small_config();
  c.d_dec = 16;
  c.d_enc = 8;
  c.dropout = 0.1;
  ProsodyModel m(c, 11);
  const std::vector<SequencePair> data = {{{1, 2, 3, 4}, smooth_target(12, c.out_dim, 3)}};
  m.norm() = FeatureNorm::fit({data[0].frames});
  const double initial = l2_term(m, data[0]);
  TrainOptions opt;
  opt.steps = 600;
  opt.batch_size = 1;
  opt.seed = 2;
  AdamState st;
  train_sequence_model(m, data, opt, false, st);
  EXPECT_LT(l2_term(m, data[0]), 0.1 * initial);
}

// The teacher-forced loss trend: a 100-step mean never exceeds the mean 500
// steps earlier, except for at most 5% of positions.
TEST(ProsodyTrain, LossTrendIsNonIncreasing) {
  ProsodyConfig c = small_config();
  c.d_dec = 12;
  c.d_enc = 8;
  std::vector<SequencePair> data;
  Rng rng(17);
  std::uniform_int_distribution<int> sym(0, c.n_symbols - 1), len(2, 5);
  for (int i = 0; i < 12; ++i) {
    std::vector<int> ids(static_cast<std::size_t>(len(rng)));
    for (int& id : ids) id = sym(rng);
    data.push_back({ids, smooth_target(3 * static_cast<int>(ids.size()), c.out_dim, 100 + i)});
  }
  ProsodyModel m(c, 21);
  TrainOptions opt;
  opt.steps = 1500;
  opt.batch_size = 4;
  opt.seed = 3;
  AdamState st;
  const std::vector<double> losses = train_sequence_model(m, data, opt, true, st);
  const int w = 100, lag = 500;
  std::vector<double> smoothed;
  double acc = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    acc += losses[i];
    if (i >= static_cast<std::size_t>(w)) acc -= losses[i - w];
    if (i + 1 >= static_cast<std::size_t>(w)) smoothed.push_back(acc / w);
  }
  int violations = 0, positions = 0;
  for (std::size_t t = 0; t + lag < smoothed.size(); ++t, ++positions) violations += smoothed[t + lag] > smoothed[t];
  ASSERT_GT(positions, 0);
  EXPECT_LE(violations, positions / 20) << violations << " of " << positions;
  EXPECT_LT(smoothed.back(), 0.5 * smoothed.front());
}

TEST(ProsodyTrain, SeededTracesRepeat) {
  const ProsodyConfig c = small_config();
  const std::vector<SequencePair> data = {{{1, 2}, smooth_target(5, c.out_dim, 1)},
                                          {{3, 4, 5}, smooth_target(7, c.out_dim, 2)},
                                          {{0, 1, 2, 3}, smooth_target(6, c.out_dim, 3)}};
  auto run = [&](std::uint64_t seed) {
    ProsodyModel m(c, 5);
    TrainOptions opt;
    opt.steps = 6;
    opt.batch_size = 2;
    opt.seed = seed;
    AdamState st;
    return train_sequence_model(m, data, opt, true, st);
  };
  const auto a = run(1), b = run(1), d = run(2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
}

// ---- synthesis

TEST(ProsodySynth, ZeroFramesIsTruncated) {
  ProsodyModel m(small_config(), 1);
  const std::vector<int> ids = {1, 2};
  const SynthesisResult r = m.synthesize(ids, 0);
  EXPECT_EQ(r.frames.rows(), 0);
  EXPECT_EQ(r.frames.cols(), 3);
  EXPECT_TRUE(r.truncated);
  EXPECT_THROW(m.synthesize(ids, -1), InputError);
}

TEST(ProsodySynth, AlignmentRowsAndShape) {
  ProsodyModel m(small_config(), 1);
  randomize(m, 4);
  const std::vector<int> ids = {1, 2, 5, 0, 3};
  const SynthesisResult r = m.synthesize(ids, 25, 1.1);  // threshold above 1 never stops
  EXPECT_TRUE(r.truncated);
  ASSERT_EQ(r.frames.rows(), 25);
  EXPECT_EQ(r.frames.cols(), 3);
  EXPECT_EQ(r.alignment.rows(), 25);
  EXPECT_EQ(r.alignment.cols(), 5);
  EXPECT_EQ(r.stop_prob.size(), 25u);
  for (Eigen::Index t = 0; t < r.alignment.rows(); ++t) {
    EXPECT_NEAR(r.alignment.row(t).sum(), 1.0, 1e-6);
    EXPECT_GE(r.alignment.row(t).minCoeff(), 0.0);
  }
  const SynthesisResult again = m.synthesize(ids, 25, 1.1);
  EXPECT_TRUE(r.frames == again.frames);
  EXPECT_TRUE(r.alignment == again.alignment);
}

TEST(ProsodySynth, StopsWhenProbabilityExceedsThreshold) {
  ProsodyModel m(small_config(), 1);
  const std::vector<int> ids = {1, 2};
  const SynthesisResult r = m.synthesize(ids, 10, 0.0);  // any probability exceeds 0
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.frames.rows(), 1);
}

TEST(ProsodySynth, FramesLiveInTargetUnits) {
  ProsodyModel m(small_config(), 1);
  const std::vector<int> ids = {1, 2};
  const SynthesisResult raw = m.synthesize(ids, 4, 1.1);
  m.norm().mean = Eigen::RowVector3d(1.0, 2.0, 3.0);
  m.norm().std = Eigen::RowVector3d(2.0, 2.0, 2.0);
  const SynthesisResult scaled = m.synthesize(ids, 4, 1.1);
  EXPECT_LE((scaled.frames - m.norm().invert(raw.frames)).cwiseAbs().maxCoeff(), 1e-12);
}

// ---- alignment diagnostics

TEST(Monotonicity, HandCases) {
  Mat a(4, 3);
  a << 1, 0, 0,  //
      0, 1, 0,   //
      0, 1, 0,   //
      0, 0, 1;
  EXPECT_DOUBLE_EQ(monotonicity(a), 1.0);
  EXPECT_NEAR(coverage(a), 1.0, 1e-15);
  Mat b(4, 3);
  b << 0, 0, 1,  //
      1, 0, 0,   //
      0, 1, 0,   //
      1, 0, 0;
  EXPECT_DOUBLE_EQ(monotonicity(b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(monotonicity(Mat(1, 3)), 1.0);
  EXPECT_DOUBLE_EQ(monotonicity(Mat(0, 3)), 1.0);
  Mat stuck = Mat::Zero(5, 4);
  stuck.col(0).setOnes();
  EXPECT_DOUBLE_EQ(monotonicity(stuck), 1.0);
  EXPECT_DOUBLE_EQ(coverage(stuck), 0.25);
}

// ---- checkpoints and the baseline variant

TEST(ProsodyCheckpoint, RoundTrip) {
  ProsodyModel m(small_config(), 3);
  randomize(m, 9);
  m.norm().mean = Eigen::RowVector3d(0.5, -1.0, 2.0);
  m.norm().std = Eigen::RowVector3d(1.5, 0.25, 3.0);
  const auto path = std::filesystem::temp_directory_path() / "bnclone_test_prosody.bnck";
  m.to_checkpoint("prosody", 77).save(path);
  const Checkpoint ck = Checkpoint::load(path);
  const ProsodyModel back = ProsodyModel::from_checkpoint(ck, "prosody", 77);
  const std::vector<int> ids = {1, 4, 2};
  const SynthesisResult a = m.synthesize(ids, 6, 1.1), b = back.synthesize(ids, 6, 1.1);
  EXPECT_LE((a.frames - b.frames).cwiseAbs().maxCoeff(), 1e-4);  // float32 storage
  EXPECT_THROW(ProsodyModel::from_checkpoint(ck, "baseline", 77), DataError);
  EXPECT_THROW(ProsodyModel::from_checkpoint(ck, "prosody", 78), CompatibilityError);
  std::filesystem::remove(path);
}

TEST(Baseline, OutputWidthIsAcousticDim) {
  ProsodyConfig c = small_config();
  c.out_dim = 20;  // n_bfcc + 2 at 18 coefficients
  ProsodyModel m(c, 1);
  EXPECT_EQ(param(m, "pr.proj.w").cols(), 21);
  const std::vector<int> ids = {1, 2};
  EXPECT_EQ(m.synthesize(ids, 3, 1.1).frames.cols(), 20);
}

TEST(Baseline, MemorisesOnePair) {
  ProsodyConfig c = small_config();
  c.out_dim = 20;
  c.d_dec = 16;
  c.d_enc = 8;
  c.dropout = 0.1;
  ProsodyModel m(c, 12);
  const std::vector<SequencePair> data = {{{2, 3, 1}, smooth_target(10, 20, 4)}};
  m.norm() = FeatureNorm::fit({data[0].frames});
  const double initial = l2_term(m, data[0]);
  TrainOptions opt;
  opt.steps = 600;
  opt.batch_size = 1;
  AdamState st;
  train_sequence_model(m, data, opt, false, st);
  EXPECT_LT(l2_term(m, data[0]), 0.1 * initial);
}

TEST(Baseline, FineTuneReducesHeldInError) {
  ProsodyConfig c = small_config();
  c.out_dim = 20;
  ProsodyModel m(c, 13);
  std::vector<SequencePair> multi, speaker;
  for (int i = 0; i < 4; ++i) multi.push_back({{i, i + 1, 5}, smooth_target(8, 20, 10 + i)});
  for (int i = 0; i < 2; ++i) {
    Mat t = smooth_target(8, 20, 20 + i);
    t.array() += 1.5;  // a systematic offset the base model has not seen
    speaker.push_back({{i + 2, i, 4}, t});
  }
  TrainOptions opt;
  opt.steps = 40;
  opt.batch_size = 2;
  AdamState st;
  train_sequence_model(m, multi, opt, true, st);
  auto err = [&](const ProsodyModel& model) {
    double s = 0;
    for (const auto& p : speaker) s += model.eval_loss(p.ids, p.frames);
    return s;
  };
  const double before = err(m);
  ProsodyModel ft = m;
  AdamState fresh;
  opt.steps = 60;
  train_sequence_model(ft, speaker, opt, false, fresh);
  EXPECT_LT(err(ft), before);
}

}  // namespace
}  // namespace bnclone
