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

// Shared mini-batch training loop and per-dimension feature normalisation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bnclone/checkpoint.hpp"
#include "bnclone/layers.hpp"
#include "bnclone/optim.hpp"

namespace bnclone {

struct TrainOptions {
  int steps = 100;
  int batch_size = 8;
  AdamConfig adam;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
};

// Loss of one example. `rng` drives dropout; it is seeded per (step, example).
using ExampleLoss = std::function<Var(Graph& g, std::size_t example, Rng& rng)>;
// Called after each optimiser step with the zero-based step and the batch
// mean loss; returning false stops training.
using StepCallback = std::function<bool(int step, double loss)>;

// Each step draws a batch from a seeded BatchIterator, back-propagates every
// example's loss scaled by 1/batch, clips the global gradient norm and applies
// Adam at schedule index state.steps_taken. Returns the per-step losses.
std::vector<double> run_training(const ParamList& params, AdamState& state, std::size_t n_examples,
                                 const TrainOptions& opt, const ExampleLoss& loss,
                                 const StepCallback& after_step = {});

// Column-wise standardisation fitted on stacked rows.
struct FeatureNorm {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  // std is floored at 1e-8 so constant columns map to zero.
  static FeatureNorm fit(const std::vector<Mat>& rows);
  Eigen::Index dim() const { return mean.size(); }
  Mat apply(const Mat& x) const;
  Mat invert(const Mat& z) const;
  void save(Checkpoint& ck, const std::string& prefix) const;
  static FeatureNorm load(const Checkpoint& ck, const std::string& prefix, Eigen::Index dim);
};

// Writes "step\tloss" lines; losses in shortest round-trip form.
void write_loss_log(const std::string& path, const std::vector<double>& losses);

}  // namespace bnclone
