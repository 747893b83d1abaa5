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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bnclone/error.hpp"
#include "bnclone/tensor.hpp"

namespace bnclone {

// Raised when the checked function evaluates to a non-finite value.
class GradCheckError : public Error {
 public:
  using Error::Error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  // "input 2 (1,3)" or "param gru.u_n (0,0)": coordinate of the worst error.
  std::string worst;
};

using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;
using ParamScalarFn = std::function<Var(Graph&)>;

// Central differences with step h against reverse-mode gradients w.r.t. each
// input. Relative error per coordinate is
//   |g_a - g_n| / max(1, |g_a|, |g_n|).
GradCheckResult grad_check(const ScalarFn& f, std::vector<Mat> inputs, double h = 1e-5);

// Same, perturbing parameter values in place (restored afterwards).
GradCheckResult grad_check_params(const ParamScalarFn& f, std::span<Parameter* const> params,
                                  double h = 1e-5);

}  // namespace bnclone
