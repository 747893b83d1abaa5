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
#include <limits>

#include "bnclone/error.hpp"
#include "bnclone/optim.hpp"

namespace bnclone {
namespace {

TEST(Schedule, PaperEndpoints) {
  const AdamConfig cfg;  // 1e-3 -> 1e-5 over 50k steps
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 0), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 50000), 1e-5);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 120000), 1e-5);
  EXPECT_NEAR(learning_rate(cfg, 25000), 1e-4, 1e-15);
}

TEST(Schedule, MonotoneDecay) {
  const AdamConfig cfg;
  for (std::int64_t s = 1; s <= 50000; s += 997) EXPECT_LT(learning_rate(cfg, s), learning_rate(cfg, s - 1));
}

TEST(AdamConfig, Validation) {
  AdamConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr_end = 2e-3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AdamConfig{};
  c.decay_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AdamConfig{};
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Adam, ZeroGradientLeavesFreshParamsUnchanged) {
  Parameter p("w", Mat::Constant(2, 2, 0.7));
  std::vector<Parameter*> ps{&p};
  AdamState st;
  adam_step(ps, st, AdamConfig{}, 0);
  EXPECT_TRUE(p.value.isApprox(Mat::Constant(2, 2, 0.7)));
  EXPECT_EQ(p.value, Mat::Constant(2, 2, 0.7));
}

TEST(Adam, ZeroGradientDecaysMoments) {
  Parameter p("w", Mat::Constant(1, 3, 0.0));
  std::vector<Parameter*> ps{&p};
  AdamState st;
  p.grad.setConstant(1.0);
  adam_step(ps, st, AdamConfig{}, 0);
  const double m0 = st.m[0](0, 0), v0 = st.v[0](0, 0);
  p.grad.setZero();
  adam_step(ps, st, AdamConfig{}, 1);
  EXPECT_NEAR(st.m[0](0, 0), 0.9 * m0, 1e-15);
  EXPECT_NEAR(st.v[0](0, 0), 0.999 * v0, 1e-15);
  EXPECT_LT(st.m[0](0, 0), m0);
}

TEST(Adam, MatchesHandRolledTrace) {
  AdamConfig cfg;
  cfg.decay_steps = 40;
  Parameter p("x", Mat::Constant(1, 1, 0.5));
  std::vector<Parameter*> ps{&p};
  AdamState st;

  double x = 0.5, m = 0.0, v = 0.0;
  for (int t = 0; t < 100; ++t) {
    p.grad.setConstant(1.0);
    adam_step(ps, st, cfg, t);

    const double g = 1.0;
    const double lr = t >= 40 ? 1e-5 : 1e-3 * std::pow(1e-2, t / 40.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t + 1));
    const double vh = v / (1.0 - std::pow(0.999, t + 1));
    x -= lr * mh / (std::sqrt(vh) + 1e-6);
    ASSERT_NEAR(p.value(0, 0), x, 1e-10) << "step " << t;
  }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter a("encoder.w", Mat::Zero(1, 2));
  Parameter b("decoder.b", Mat::Zero(1, 2));
  std::vector<Parameter*> ps{&a, &b};
  b.grad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  try {
    adam_step(ps, st, AdamConfig{}, 0);
    FAIL() << "expected OptimizerError";
  } catch (const OptimizerError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.b"), std::string::npos);
  }
  EXPECT_TRUE(a.value.isZero());
}

TEST(Clip, RescalesToMaxNorm) {
  Parameter a("a", Mat::Zero(1, 2));
  Parameter b("b", Mat::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  std::vector<Parameter*> ps{&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm()), 1.0, 1e-12);
}

}  // namespace
}  // namespace bnclone
