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

// Speaker probe: multinomial logistic regression over per-utterance
// statistics of acoustic frames. Used as an objective stand-in for speaker
// similarity judgements.

#include <string>
#include <vector>

#include "bnclone/tensor.hpp"

namespace bnclone {

// [column means | column standard deviations] over the frames of one utterance.
Eigen::RowVectorXd utterance_stats(const Mat& frames);

struct ProbeOptions {
  int iterations = 1500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
};

struct ProbeScore {
  double accuracy = 0.0;     // fraction classified as the target
  double target_prob = 0.0;  // mean posterior of the target class
};

class SpeakerProbe {
 public:
  // `utterances[i]` belongs to class labels[i] in [0, n_classes). Throws
  // DataError when a class has no example or the inputs disagree in size.
  static SpeakerProbe train(const std::vector<Mat>& utterances, const std::vector<int>& labels, int n_classes,
                            const ProbeOptions& opt = {});

  int n_classes() const { return static_cast<int>(w_.cols()); }
  Eigen::RowVectorXd posteriors(const Mat& frames) const;
  int classify(const Mat& frames) const;
  double accuracy(const std::vector<Mat>& utterances, const std::vector<int>& labels) const;
  ProbeScore score(const std::vector<Mat>& utterances, int target) const;

 private:
  Eigen::RowVectorXd mean_, std_;
  Mat w_;
  Eigen::RowVectorXd b_;
};

// True when `a` ranks above `b`: higher accuracy, ties broken by a higher
// mean target posterior.
bool ranks_above(const ProbeScore& a, const ProbeScore& b);

}  // namespace bnclone
