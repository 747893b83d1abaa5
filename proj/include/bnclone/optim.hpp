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

#include <cstdint>
#include <span>
#include <vector>

#include "bnclone/tensor.hpp"

namespace bnclone {

struct AdamConfig {
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  std::int64_t decay_steps = 50000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;

  // Throws ConfigError unless 0 < lr_end <= lr_start, decay_steps > 0 and
  // both betas lie in [0, 1).
  void validate() const;
};

// Geometric interpolation from lr_start (step 0) to lr_end (step
// decay_steps), held at lr_end afterwards.
double learning_rate(const AdamConfig& cfg, std::int64_t step);

// First and second moments, one pair per parameter in enumeration order.
struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::int64_t steps_taken = 0;
};

// One bias-corrected Adam update using each parameter's grad. `step` is the
// zero-based schedule index; bias correction uses step + 1. Throws
// OptimizerError naming the parameter when a gradient is not finite; no
// parameter is modified in that case.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg,
               std::int64_t step);

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grads(std::span<Parameter* const> params);

}  // namespace bnclone
