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

// Reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation of one forward pass in creation order, so
// the node list is already a topological order and backward() is a single
// reverse sweep. Vectors are 1 x n matrices. Parameters live outside the
// graph; binding one with Graph::param() aliases its value and routes the
// gradient straight into Parameter::grad.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace bnclone {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

struct Parameter {
  std::string name;
  Mat value;
  // Accumulator written by Graph::backward, also through const models.
  mutable Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

// Lightweight handle to a node of a Graph. Copyable; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Backward closure: receives the graph, the node's forward value and the
  // gradient flowing into it.
  using Backward = std::function<void(Graph&, const Mat& value, const Mat& grad)>;

  explicit Graph(bool grad_enabled = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat value);
  // Leaf whose gradient is retained (read it back with Var::grad()).
  Var input(Mat value);
  // Binds a parameter; repeated calls with the same parameter return the same node.
  Var param(const Parameter& p);

  // Seeds d(loss)/d(loss) = 1 and sweeps the recorded nodes in reverse.
  void backward(Var loss, double seed = 1.0);

  bool grad_enabled() const { return grad_enabled_; }
  // Throws NumericError naming the op when a forward value is not finite.
  bool check_finite = true;
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(const char* op, Mat value, std::initializer_list<Var> parents, Backward backward);
  Var push(const char* op, Mat value, std::span<const Var> parents, Backward backward);
  const Mat& value_of(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient accumulator of a node, zero-initialised on first access.
  Mat& grad_of(std::size_t id);

 private:
  struct Node {
    const char* op = "";
    Mat own;
    const Mat* ext = nullptr;
    Mat grad;
    Mat* ext_grad = nullptr;
    bool needs_grad = false;
    bool grad_ready = false;
    Backward backward;
  };
  friend class Var;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool grad_enabled_;
};

// ---- Core differentiable ops. All raise ShapeError on incompatible operands.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a (r x c) plus row vector b (1 x c) broadcast over rows.
Var add_row(Var a, Var b);
// alpha * a + beta, elementwise.
Var affine(Var a, double alpha, double beta);
Var transpose(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
// axis 0 normalises each column, axis 1 each row.
Var softmax(Var a, int axis);

Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Row gather, e.g. embedding lookup. Out-of-range ids raise InputError.
Var gather_rows(Var table, std::span<const int> ids);

// Same-padded 1-D convolution along rows (time). x is T x c_in, w is
// (width * c_in) x c_out with row index (tap * c_in + channel). Left padding
// is (width - 1) / 2.
Var conv1d(Var x, Var w, int width);
// Max over a window of `width` rows starting at t, stride 1, output length T
// (the window is truncated at the end of the sequence).
Var maxpool_time(Var x, int width);
// Inverted dropout with keep-scale 1/(1-p); p >= 1 zeroes the input.
Var dropout(Var x, double p, Rng& rng);

Var sum(Var a);
Var mean(Var a);
// Sum of absolute values.
Var l1(Var a);
// Sum of squares.
Var l2(Var a);

// Mean squared error over all elements.
Var mse(Var pred, Var target);
// Row-wise softmax cross-entropy with integer labels, averaged over rows.
Var cross_entropy(Var logits, std::span<const int> labels);
// Elementwise sigmoid binary cross-entropy on logits, averaged over elements.
Var bce_with_logits(Var logits, const Mat& targets);

}  // namespace bnclone
