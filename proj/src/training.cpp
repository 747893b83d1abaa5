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

#include "bnclone/training.hpp"

#include <cstdio>
#include <fstream>

#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"

namespace bnclone {

std::vector<double> run_training(const ParamList& params, AdamState& state, std::size_t n_examples,
                                 const TrainOptions& opt, const ExampleLoss& loss, const StepCallback& after_step) {
  opt.adam.validate();
  if (opt.steps < 0) throw ConfigError("training: negative step budget");
  std::vector<double> trace;
  if (opt.steps == 0) return trace;
  BatchIterator batches(n_examples, static_cast<std::size_t>(opt.batch_size), derive_seed(opt.seed, "batches"));
  trace.reserve(static_cast<std::size_t>(opt.steps));
  for (int step = 0; step < opt.steps; ++step) {
    zero_grads(params);
    const std::vector<std::size_t> batch = batches.next();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Rng rng(derive_seed(opt.seed, "dropout/" + std::to_string(state.steps_taken) + "/" + std::to_string(i)));
      Graph g;
      Var l = loss(g, batch[i], rng);
      total += l.scalar();
      g.backward(l, scale);
    }
    clip_grad_norm(params, opt.clip_norm);
    adam_step(params, state, opt.adam, state.steps_taken);
    const double mean_loss = total * scale;
    trace.push_back(mean_loss);
    if (after_step && !after_step(step, mean_loss)) break;
  }
  return trace;
}

FeatureNorm FeatureNorm::fit(const std::vector<Mat>& rows) {
  Eigen::Index d = -1;
  double n = 0.0;
  for (const Mat& m : rows) {
    if (m.rows() == 0) continue;
    if (d < 0) d = m.cols();
    if (m.cols() != d) throw ShapeError("feature norm: inconsistent widths");
    n += static_cast<double>(m.rows());
  }
  if (d < 0) throw DataError("feature norm: no frames to fit");
  FeatureNorm out;
  out.mean = Eigen::RowVectorXd::Zero(d);
  for (const Mat& m : rows)
    if (m.rows()) out.mean += m.colwise().sum();
  out.mean /= n;
  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
  for (const Mat& m : rows)
    if (m.rows()) var += (m.rowwise() - out.mean).array().square().colwise().sum().matrix();
  out.std = (var / n).array().sqrt().max(1e-8).matrix();
  return out;
}

Mat FeatureNorm::apply(const Mat& x) const {
  if (x.cols() != dim())
    throw InputError("feature norm: expected width " + std::to_string(dim()) + ", got " + std::to_string(x.cols()));
  return ((x.rowwise() - mean).array().rowwise() / std.array()).matrix();
}

Mat FeatureNorm::invert(const Mat& z) const {
  if (z.cols() != dim())
    throw InputError("feature norm: expected width " + std::to_string(dim()) + ", got " + std::to_string(z.cols()));
  return ((z.array().rowwise() * std.array()).rowwise() + mean.array()).matrix();
}

void FeatureNorm::save(Checkpoint& ck, const std::string& prefix) const {
  ck.entries.push_back({prefix + ".mean", Mat(mean)});
  ck.entries.push_back({prefix + ".std", Mat(std)});
}

FeatureNorm FeatureNorm::load(const Checkpoint& ck, const std::string& prefix, Eigen::Index dim) {
  FeatureNorm n;
  n.mean = ck.get(prefix + ".mean", 1, dim);
  n.std = ck.get(prefix + ".std", 1, dim);
  return n;
}

void write_loss_log(const std::string& path, const std::vector<double>& losses) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create loss log: " + path);
  for (std::size_t i = 0; i < losses.size(); ++i) os << i << '\t' << format_real(losses[i]) << '\n';
  if (!os) throw IoError("failed writing loss log: " + path);
}

}  // namespace bnclone
