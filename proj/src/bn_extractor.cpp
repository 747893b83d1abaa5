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

#include "bnclone/bn_extractor.hpp"

#include "bnclone/corpus.hpp"
#include "bnclone/error.hpp"

namespace bnclone {

BnExtractor::BnExtractor(const BnExtractorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.in_dim < 1 || cfg.hidden < 1 || cfg.bn_dim < 1 || cfg.n_phones < 2)
    throw ConfigError("bn extractor: dimensions must be positive and n_phones >= 2");
  Rng rng(derive_seed(seed, "bn/init"));
  lstm1_ = Lstm("bn.lstm1", cfg.in_dim, cfg.hidden, rng);
  lstm2_ = Lstm("bn.lstm2", cfg.hidden, cfg.bn_dim, rng);
  out_ = Linear("bn.out", cfg.bn_dim, cfg.n_phones, rng);
  norm_.mean = Eigen::RowVectorXd::Zero(cfg.in_dim);
  norm_.std = Eigen::RowVectorXd::Ones(cfg.in_dim);
}

void BnExtractor::check_width(const Mat& f) const {
  if (f.cols() != cfg_.in_dim)
    throw InputError("bn extractor: expected " + std::to_string(cfg_.in_dim) + " feature columns, got " +
                     std::to_string(f.cols()));
}

BnExtractor::Forward BnExtractor::forward(Graph& g, const Mat& z) const {
  Var x = g.constant(z);
  Var h1 = lstm1_.run(g, x);
  Var bn = lstm2_.run(g, h1);
  return {bn, out_.forward(g, bn)};
}

Mat BnExtractor::extract(const Mat& features) const {
  check_width(features);
  if (features.rows() == 0) return Mat(0, cfg_.bn_dim);
  Graph g(false);
  return forward(g, norm_.apply(features)).bn.value();
}

Mat BnExtractor::posteriors(const Mat& features) const {
  check_width(features);
  if (features.rows() == 0) return Mat(0, cfg_.n_phones);
  Graph g(false);
  return softmax(forward(g, norm_.apply(features)).logits, 1).value();
}

Var BnExtractor::loss(Graph& g, const Mat& z, const std::vector<int>& labels) const {
  if (static_cast<Eigen::Index>(labels.size()) != z.rows())
    throw DataError("bn extractor: " + std::to_string(labels.size()) + " labels for " + std::to_string(z.rows()) +
                    " frames");
  return cross_entropy(forward(g, z).logits, labels);
}

double BnExtractor::frame_accuracy(const std::vector<LabeledFeatures>& data) const {
  std::size_t ok = 0, n = 0;
  for (const auto& u : data) {
    if (static_cast<Eigen::Index>(u.labels.size()) != u.features.rows())
      throw DataError("bn extractor: label/frame length mismatch");
    if (u.features.rows() == 0) continue;
    Graph g(false);
    const Mat logits = forward(g, norm_.apply(u.features)).logits.value();
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      Eigen::Index best = 0;
      logits.row(t).maxCoeff(&best);
      ok += static_cast<int>(best) == u.labels[static_cast<std::size_t>(t)];
      ++n;
    }
  }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
}

ParamList BnExtractor::params() {
  ParamList ps;
  lstm1_.collect(ps);
  lstm2_.collect(ps);
  out_.collect(ps);
  return ps;
}

Checkpoint BnExtractor::to_checkpoint(std::uint64_t fingerprint) const {
  Checkpoint ck;
  ck.fingerprint = fingerprint;
  ck.meta["kind"] = "bn_extractor";
  ck.meta["in_dim"] = std::to_string(cfg_.in_dim);
  ck.meta["hidden"] = std::to_string(cfg_.hidden);
  ck.meta["bn_dim"] = std::to_string(cfg_.bn_dim);
  ck.meta["n_phones"] = std::to_string(cfg_.n_phones);
  ck.add_params(const_cast<BnExtractor*>(this)->params());
  norm_.save(ck, "bn.norm");
  return ck;
}

BnExtractor BnExtractor::from_checkpoint(const Checkpoint& ck, std::uint64_t expect) {
  ck.expect("bn_extractor", expect);
  BnExtractorConfig cfg{ck.meta_int("in_dim"), ck.meta_int("hidden"), ck.meta_int("bn_dim"),
                        ck.meta_int("n_phones")};
  BnExtractor m(cfg, 0);
  ck.load_params(m.params());
  m.norm_ = FeatureNorm::load(ck, "bn.norm", cfg.in_dim);
  return m;
}

BnTrainReport train_bn_extractor(BnExtractor& model, const std::vector<LabeledFeatures>& train,
                                 const std::vector<LabeledFeatures>& heldout, const BnTrainOptions& opt) {
  if (train.empty()) throw DataError("train_bn_extractor: empty training set");
  std::vector<Mat> feats;
  for (const auto& u : train) {
    if (static_cast<Eigen::Index>(u.labels.size()) != u.features.rows())
      throw DataError("train_bn_extractor: " + std::to_string(u.labels.size()) + " labels for " +
                      std::to_string(u.features.rows()) + " frames");
    feats.push_back(u.features);
  }
  model.norm() = FeatureNorm::fit(feats);
  std::vector<Mat> z;
  for (const Mat& f : feats) z.push_back(model.norm().apply(f));

  BnTrainReport rep;
  rep.initial_heldout_accuracy = heldout.empty() ? 0.0 : model.frame_accuracy(heldout);
  rep.heldout_accuracy = rep.initial_heldout_accuracy;
  if (!heldout.empty() && rep.heldout_accuracy >= opt.target_accuracy) rep.reached_target = true;
  if (rep.reached_target || opt.train.steps == 0) return rep;

  AdamState state;
  const ParamList ps = model.params();
  auto loss = [&](Graph& g, std::size_t i, Rng&) { return model.loss(g, z[i], train[i].labels); };
  auto after = [&](int step, double) {
    const int done = step + 1;
    if (heldout.empty() || (done % opt.eval_every != 0 && done != opt.train.steps)) return true;
    rep.heldout_accuracy = model.frame_accuracy(heldout);
    rep.accuracy_trace.emplace_back(done, rep.heldout_accuracy);
    if (rep.heldout_accuracy >= opt.target_accuracy) {
      rep.reached_target = true;
      return false;
    }
    return true;
  };
  rep.losses = run_training(ps, state, train.size(), opt.train, loss, after);
  rep.steps = static_cast<int>(rep.losses.size());
  return rep;
}

double nearest_centroid_accuracy(const std::vector<LabeledFeatures>& train, const std::vector<LabeledFeatures>& test,
                                 int n_bfcc, int n_classes) {
  std::vector<Mat> cols;
  for (const auto& u : train) cols.push_back(u.features.leftCols(n_bfcc));
  const FeatureNorm norm = FeatureNorm::fit(cols);
  Mat centroids = Mat::Zero(n_classes, n_bfcc);
  std::vector<double> count(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Mat z = norm.apply(cols[i]);
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      const int y = train[i].labels[static_cast<std::size_t>(t)];
      centroids.row(y) += z.row(t);
      count[static_cast<std::size_t>(y)] += 1.0;
    }
  }
  for (int k = 0; k < n_classes; ++k)
    if (count[static_cast<std::size_t>(k)] > 0) centroids.row(k) /= count[static_cast<std::size_t>(k)];
  std::size_t ok = 0, n = 0;
  for (const auto& u : test) {
    const Mat z = norm.apply(u.features.leftCols(n_bfcc));
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      Eigen::Index best = -1;
      double best_d = 0.0;
      for (int k = 0; k < n_classes; ++k) {
        if (count[static_cast<std::size_t>(k)] == 0) continue;
        const double d = (z.row(t) - centroids.row(k)).squaredNorm();
        if (best < 0 || d < best_d) {
          best = k;
          best_d = d;
        }
      }
      ok += best == u.labels[static_cast<std::size_t>(t)];
      ++n;
    }
  }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
}

}  // namespace bnclone
