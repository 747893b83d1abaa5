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

#include "bnclone/optim.hpp"

#include <algorithm>
#include <cmath>

#include "bnclone/error.hpp"

namespace bnclone {

void AdamConfig::validate() const {
  if (!(lr_end > 0.0) || !(lr_end <= lr_start))
    throw ConfigError("adam: require 0 < lr_end <= lr_start");
  if (decay_steps <= 0) throw ConfigError("adam: decay_steps must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("adam: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
}

double learning_rate(const AdamConfig& cfg, std::int64_t step) {
  if (step <= 0) return cfg.lr_start;
  if (step >= cfg.decay_steps) return cfg.lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.decay_steps);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg,
               std::int64_t step) {
  for (const Parameter* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw OptimizerError("adam: gradient shape mismatch for parameter '" + p->name + "'");
    if (!p->grad.allFinite())
      throw OptimizerError("adam: non-finite gradient for parameter '" + p->name + "'");
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter* p : params) {
      state.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  const double lr = learning_rate(cfg, step);
  const double t = static_cast<double>(step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  }
  ++state.steps_taken;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace bnclone
