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

#include "bnclone/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace bnclone {

namespace {

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

std::string coord(std::string what, Eigen::Index r, Eigen::Index c) {
  return what + " (" + std::to_string(r) + "," + std::to_string(c) + ")";
}

double eval_inputs(const ScalarFn& f, const std::vector<Mat>& inputs, const std::string& where) {
  Graph g(false);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Mat& m : inputs) vars.push_back(g.constant(m));
  double v = 0.0;
  try {
    v = f(g, vars).scalar();
  } catch (const NumericError& e) {
    throw GradCheckError("grad_check: non-finite evaluation at " + where + ": " + e.what());
  }
  if (!std::isfinite(v)) throw GradCheckError("grad_check: non-finite output at " + where);
  return v;
}

double eval_params(const ParamScalarFn& f, const std::string& where) {
  Graph g(false);
  double v = 0.0;
  try {
    v = f(g).scalar();
  } catch (const NumericError& e) {
    throw GradCheckError("grad_check: non-finite evaluation at " + where + ": " + e.what());
  }
  if (!std::isfinite(v)) throw GradCheckError("grad_check: non-finite output at " + where);
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, std::vector<Mat> inputs, double h) {
  std::vector<Mat> analytic;
  {
    Graph g(true);
    std::vector<Var> vars;
    for (const Mat& m : inputs) vars.push_back(g.input(m));
    Var out = f(g, vars);
    if (!std::isfinite(out.scalar())) throw GradCheckError("grad_check: non-finite output at base point");
    g.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }
  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index r = 0; r < inputs[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < inputs[k].cols(); ++c) {
        const std::string where = coord("input " + std::to_string(k), r, c);
        const double x0 = inputs[k](r, c);
        inputs[k](r, c) = x0 + h;
        const double fp = eval_inputs(f, inputs, where);
        inputs[k](r, c) = x0 - h;
        const double fm = eval_inputs(f, inputs, where);
        inputs[k](r, c) = x0;
        const double e = rel_error(analytic[k](r, c), (fp - fm) / (2.0 * h));
        if (e > res.max_rel_error || res.worst.empty()) {
          res.max_rel_error = std::max(res.max_rel_error, e);
          res.worst = where;
        }
      }
    }
  }
  return res;
}

GradCheckResult grad_check_params(const ParamScalarFn& f, std::span<Parameter* const> params,
                                  double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g(true);
    Var out = f(g);
    if (!std::isfinite(out.scalar())) throw GradCheckError("grad_check: non-finite output at base point");
    g.backward(out);
  }
  std::vector<Mat> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat& v = params[k]->value;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const std::string where = coord("param " + params[k]->name, r, c);
        const double x0 = v(r, c);
        v(r, c) = x0 + h;
        const double fp = eval_params(f, where);
        v(r, c) = x0 - h;
        const double fm = eval_params(f, where);
        v(r, c) = x0;
        const double e = rel_error(analytic[k](r, c), (fp - fm) / (2.0 * h));
        if (e > res.max_rel_error || res.worst.empty()) {
          res.max_rel_error = std::max(res.max_rel_error, e);
          res.worst = where;
        }
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return res;
}

}  // namespace bnclone
