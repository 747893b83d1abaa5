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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"
#include "bnclone/training.hpp"
#include "test_util.hpp"

namespace bnclone {
namespace {

using testing::rand_mat;

struct Quadratic {
  Parameter p{"p", Mat::Zero(1, 2)};
  std::vector<Mat> targets;

  explicit Quadratic(int n) {
    Rng rng(1);
    for (int i = 0; i < n; ++i) targets.push_back(rand_mat(rng, 1, 2));
  }
  ExampleLoss loss() {
    return [this](Graph& g, std::size_t i, Rng&) { return l2(sub(g.param(p), g.constant(targets[i]))); };
  }
};

TEST(RunTraining, GradientIsBatchMean) {
  Quadratic q(7);
  TrainOptions opt;
  opt.steps = 1;
  opt.batch_size = 3;
  opt.clip_norm = 0.0;
  opt.seed = 5;
  AdamState st;
  Mat grad;
  run_training({&q.p}, st, q.targets.size(), opt, q.loss(), [&](int, double) {
    grad = q.p.grad;
    return true;
  });
  // Same batch as the loop draws: d/dp |p - t|^2 = 2 (p - t) at p = 0.
  BatchIterator it(7, 3, derive_seed(5, "batches"));
  Mat want = Mat::Zero(1, 2);
  for (std::size_t i : it.next()) want += -2.0 * q.targets[i];
  want /= 3.0;
  EXPECT_LE((grad - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(st.steps_taken, 1);
}

TEST(RunTraining, ConvergesAndIsDeterministic) {
  auto run = [](std::uint64_t seed, Mat* final_p) {
    Quadratic q(5);
    TrainOptions opt;
    opt.steps = 400;
    opt.batch_size = 5;
    opt.adam.lr_start = 0.05;
    opt.adam.lr_end = 0.01;
    opt.seed = seed;
    AdamState st;
    auto trace = run_training({&q.p}, st, 5, opt, q.loss());
    if (final_p) *final_p = q.p.value;
    Mat mean = Mat::Zero(1, 2);
    for (const Mat& t : q.targets) mean += t / 5.0;
    EXPECT_LE((q.p.value - mean).cwiseAbs().maxCoeff(), 1e-2);
    return trace;
  };
  Mat a, b;
  const auto ta = run(1, &a), tb = run(1, &b);
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(a == b);
  EXPECT_LT(ta.back(), ta.front());
}

TEST(RunTraining, CallbackStopsEarlyAndZeroStepsIsNoop) {
  Quadratic q(4);
  TrainOptions opt;
  opt.steps = 50;
  opt.batch_size = 2;
  AdamState st;
  const auto trace = run_training({&q.p}, st, 4, opt, q.loss(), [](int step, double) { return step < 9; });
  EXPECT_EQ(trace.size(), 10u);
  EXPECT_EQ(st.steps_taken, 10);
  opt.steps = 0;
  const Mat before = q.p.value;
  EXPECT_TRUE(run_training({&q.p}, st, 4, opt, q.loss()).empty());
  EXPECT_TRUE(q.p.value == before);
  opt.steps = -1;
  EXPECT_THROW(run_training({&q.p}, st, 4, opt, q.loss()), ConfigError);
}

TEST(RunTraining, DropoutStreamDependsOnStepAndExample) {
  Quadratic q(4);
  TrainOptions opt;
  opt.steps = 2;
  opt.batch_size = 2;
  AdamState st;
  std::vector<std::uint64_t> draws;
  run_training({&q.p}, st, 4, opt, [&](Graph& g, std::size_t i, Rng& rng) {
    draws.push_back(rng());
    return q.loss()(g, i, rng);
  });
  ASSERT_EQ(draws.size(), 4u);
  std::sort(draws.begin(), draws.end());
  EXPECT_EQ(std::unique(draws.begin(), draws.end()), draws.end());
}

TEST(FeatureNorm, FitApplyInvert) {
  Mat a(2, 3), b(2, 3);
  a << 1, 5, 0,  //
      3, 5, 1;
  b << 5, 5, 2,  //
      7, 5, 3;
  const FeatureNorm n = FeatureNorm::fit({a, Mat(0, 3), b});
  EXPECT_DOUBLE_EQ(n.mean(0), 4.0);
  EXPECT_DOUBLE_EQ(n.mean(1), 5.0);
  EXPECT_NEAR(n.std(0), std::sqrt(5.0), 1e-15);
  EXPECT_DOUBLE_EQ(n.std(1), 1e-8);  // constant column floors
  const Mat z = n.apply(a);
  EXPECT_DOUBLE_EQ(z(0, 1), 0.0);
  EXPECT_LE((n.invert(z) - a).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(n.apply(Mat::Zero(1, 2)), InputError);
  EXPECT_THROW(n.invert(Mat::Zero(1, 4)), InputError);
  EXPECT_THROW(FeatureNorm::fit({}), DataError);
  EXPECT_THROW(FeatureNorm::fit({a, Mat::Zero(1, 2)}), ShapeError);
}

TEST(FeatureNorm, CheckpointRoundTrip) {
  Rng rng(3);
  const FeatureNorm n = FeatureNorm::fit({rand_mat(rng, 10, 4)});
  Checkpoint ck;
  n.save(ck, "x.norm");
  const FeatureNorm back = FeatureNorm::load(ck, "x.norm", 4);
  EXPECT_TRUE(back.mean == n.mean);
  EXPECT_THROW(FeatureNorm::load(ck, "x.norm", 5), DataError);
  EXPECT_THROW(FeatureNorm::load(ck, "y.norm", 4), DataError);
}

TEST(LossLog, Format) {
  const auto path = std::filesystem::temp_directory_path() / "bnclone_test_losses.tsv";
  write_loss_log(path.string(), {1.5, 0.1, 1.0 / 3.0});
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "0\t1.5\n1\t0.1\n2\t0.3333333333333333\n");
  std::filesystem::remove(path);
  EXPECT_THROW(write_loss_log("/nonexistent-dir/x.tsv", {1.0}), IoError);
}

}  // namespace
}  // namespace bnclone
