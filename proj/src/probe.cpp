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

#include "bnclone/probe.hpp"

#include <cmath>

#include "bnclone/error.hpp"

namespace bnclone {

Eigen::RowVectorXd utterance_stats(const Mat& frames) {
  if (frames.rows() == 0) throw InputError("utterance_stats: empty utterance");
  const Eigen::Index d = frames.cols();
  Eigen::RowVectorXd out(2 * d);
  const Eigen::RowVectorXd mean = frames.colwise().mean();
  out.head(d) = mean;
  out.tail(d) = ((frames.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(frames.rows()))
                    .sqrt()
                    .matrix();
  return out;
}

namespace {

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& z) {
  Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

SpeakerProbe SpeakerProbe::train(const std::vector<Mat>& utterances, const std::vector<int>& labels, int n_classes,
                                 const ProbeOptions& opt) {
  if (utterances.size() != labels.size()) throw DataError("probe: utterance and label counts differ");
  if (utterances.empty() || n_classes < 2) throw DataError("probe: need examples of at least two speakers");
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw DataError("probe: label " + std::to_string(l) + " out of range");
    ++count[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < n_classes; ++c)
    if (count[static_cast<std::size_t>(c)] == 0) throw DataError("probe: class " + std::to_string(c) + " has no examples");

  const Eigen::Index n = static_cast<Eigen::Index>(utterances.size());
  Mat x(n, 2 * utterances[0].cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (utterances[i].cols() != utterances[0].cols()) throw DataError("probe: utterances differ in frame width");
    x.row(i) = utterance_stats(utterances[i]);
  }
  SpeakerProbe p;
  p.mean_ = x.colwise().mean();
  p.std_ = ((x.rowwise() - p.mean_).array().square().colwise().mean().sqrt() + 1e-8).matrix();
  x = ((x.rowwise() - p.mean_).array().rowwise() / p.std_.array()).matrix();

  Mat y = Mat::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  p.w_ = Mat::Zero(x.cols(), n_classes);
  p.b_ = Eigen::RowVectorXd::Zero(n_classes);
  // Full-batch gradient descent on the regularised cross-entropy is convex
  // and fully deterministic.
  for (int it = 0; it < opt.iterations; ++it) {
    Mat z = (x * p.w_).rowwise() + p.b_;
    for (Eigen::Index i = 0; i < n; ++i) z.row(i) = softmax_row(z.row(i));
    const Mat err = (z - y) / static_cast<double>(n);
    p.w_ -= opt.learning_rate * (x.transpose() * err + opt.l2 * p.w_);
    p.b_ -= opt.learning_rate * err.colwise().sum();
  }
  return p;
}

Eigen::RowVectorXd SpeakerProbe::posteriors(const Mat& frames) const {
  Eigen::RowVectorXd s = utterance_stats(frames);
  if (s.size() != mean_.size())
    throw InputError("probe: expected frames of width " + std::to_string(mean_.size() / 2) + ", got " +
                     std::to_string(frames.cols()));
  s = ((s - mean_).array() / std_.array()).matrix();
  return softmax_row(s * w_ + b_);
}

int SpeakerProbe::classify(const Mat& frames) const {
  Eigen::Index k = 0;
  posteriors(frames).maxCoeff(&k);
  return static_cast<int>(k);
}

double SpeakerProbe::accuracy(const std::vector<Mat>& utterances, const std::vector<int>& labels) const {
  if (utterances.empty()) return 0.0;
  int ok = 0;
  for (std::size_t i = 0; i < utterances.size(); ++i) ok += classify(utterances[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(utterances.size());
}

ProbeScore SpeakerProbe::score(const std::vector<Mat>& utterances, int target) const {
  ProbeScore s;
  if (utterances.empty()) return s;
  for (const Mat& u : utterances) {
    const Eigen::RowVectorXd p = posteriors(u);
    Eigen::Index k = 0;
    p.maxCoeff(&k);
    s.accuracy += k == target ? 1.0 : 0.0;
    s.target_prob += p(target);
  }
  s.accuracy /= static_cast<double>(utterances.size());
  s.target_prob /= static_cast<double>(utterances.size());
  return s;
}

bool ranks_above(const ProbeScore& a, const ProbeScore& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  return a.target_prob > b.target_prob;
}

}  // namespace bnclone
