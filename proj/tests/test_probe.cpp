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

#include "bnclone/error.hpp"
#include "bnclone/probe.hpp"
#include "test_util.hpp"

namespace bnclone {
namespace {

using testing::rand_mat;

TEST(UtteranceStats, MeanAndPopulationStd) {
  Mat f(4, 2);
  f << 1, 10,  //
      3, 10,   //
      5, 10,   //
      7, 10;
  const Eigen::RowVectorXd s = utterance_stats(f);
  ASSERT_EQ(s.size(), 4);
  EXPECT_DOUBLE_EQ(s(0), 4.0);
  EXPECT_DOUBLE_EQ(s(1), 10.0);
  EXPECT_NEAR(s(2), std::sqrt(5.0), 1e-15);
  EXPECT_DOUBLE_EQ(s(3), 0.0);
  EXPECT_THROW(utterance_stats(Mat(0, 2)), InputError);
}

// Utterances whose frames scatter around a per-speaker centre.
std::vector<Mat> cluster(const Eigen::RowVectorXd& centre, int n, Rng& rng) {
  std::vector<Mat> out;
  for (int i = 0; i < n; ++i) {
    Mat u = rand_mat(rng, 15, centre.size(), 1.0);
    out.push_back(u.rowwise() + centre);
  }
  return out;
}

struct ProbeData {
  std::vector<Mat> x;
  std::vector<int> y;
};

ProbeData make_data(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  ProbeData d;
  const std::vector<Eigen::RowVector3d> centres = {{0, 0, 0}, {2, 0, 0}, {0, 2, 1}};
  for (int c = 0; c < 3; ++c)
    for (Mat& m : cluster(centres[static_cast<std::size_t>(c)], per_class, rng)) {
      d.x.push_back(m);
      d.y.push_back(c);
    }
  return d;
}

TEST(SpeakerProbe, SeparatesClusters) {
  const ProbeData tr = make_data(10, 1), te = make_data(5, 2);
  const SpeakerProbe p = SpeakerProbe::train(tr.x, tr.y, 3);
  EXPECT_EQ(p.n_classes(), 3);
  EXPECT_GE(p.accuracy(te.x, te.y), 0.95);
  for (const Mat& u : te.x) {
    const Eigen::RowVectorXd post = p.posteriors(u);
    EXPECT_NEAR(post.sum(), 1.0, 1e-12);
    EXPECT_GE(post.minCoeff(), 0.0);
  }
  const std::vector<Mat> class1(te.x.begin() + 5, te.x.begin() + 10);
  const ProbeScore s1 = p.score(class1, 1), s0 = p.score(class1, 0);
  EXPECT_GE(s1.accuracy, 0.8);
  EXPECT_GT(s1.target_prob, s0.target_prob);
  EXPECT_THROW(p.posteriors(Mat::Zero(3, 4)), InputError);
}

TEST(SpeakerProbe, Deterministic) {
  const ProbeData tr = make_data(6, 3);
  const SpeakerProbe a = SpeakerProbe::train(tr.x, tr.y, 3), b = SpeakerProbe::train(tr.x, tr.y, 3);
  EXPECT_TRUE(a.posteriors(tr.x[0]) == b.posteriors(tr.x[0]));
}

TEST(SpeakerProbe, Errors) {
  const ProbeData tr = make_data(2, 4);
  std::vector<int> short_labels(tr.y.begin(), tr.y.end() - 1);
  EXPECT_THROW(SpeakerProbe::train(tr.x, short_labels, 3), DataError);
  EXPECT_THROW(SpeakerProbe::train(tr.x, tr.y, 4), DataError);  // class 3 has no examples
  std::vector<int> bad = tr.y;
  bad[0] = 7;
  EXPECT_THROW(SpeakerProbe::train(tr.x, bad, 3), DataError);
  EXPECT_THROW(SpeakerProbe::train({}, {}, 3), DataError);
}

TEST(SpeakerProbe, RankingOrder) {
  EXPECT_TRUE(ranks_above({0.6, 0.1}, {0.5, 0.9}));
  EXPECT_FALSE(ranks_above({0.5, 0.9}, {0.6, 0.1}));
  EXPECT_TRUE(ranks_above({0.5, 0.4}, {0.5, 0.3}));
  EXPECT_FALSE(ranks_above({0.5, 0.3}, {0.5, 0.3}));
}

}  // namespace
}  // namespace bnclone
