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

#include "bnclone/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bnclone/error.hpp"

namespace bnclone {

namespace {

std::string shape_str(const Mat& m) {
  std::ostringstream os;
  os << '(' << m.rows() << 'x' << m.cols() << ')';
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Mat& a, const Mat& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

Graph& same_graph(const char* op, Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph())
    throw ShapeError(std::string(op) + ": operands belong to different graphs");
  return a.graph();
}

}  // namespace

const Mat& Var::value() const { return graph_->value_of(id_); }

const Mat& Var::grad() const { return graph_->grad_of(id_); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw ShapeError("scalar: expected 1x1, got " + shape_str(v));
  return v(0, 0);
}

Graph::Graph(bool grad_enabled) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }

Var Graph::constant(Mat value) {
  Node n;
  n.op = "constant";
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Mat value) {
  Node n;
  n.op = "input";
  n.own = std::move(value);
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Node n;
  n.op = "param";
  n.ext = &p.value;
  n.ext_grad = &p.grad;
  n.needs_grad = grad_enabled_;
  n.grad_ready = true;
  nodes_.push_back(std::move(n));
  bound_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::push(const char* op, Mat value, std::initializer_list<Var> parents, Backward backward) {
  return push(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Graph::push(const char* op, Mat value, std::span<const Var> parents, Backward backward) {
  if (check_finite && !value.allFinite())
    throw NumericError(std::string(op) + ": produced a non-finite value");
  Node n;
  n.op = op;
  n.own = std::move(value);
  if (grad_enabled_) {
    for (const Var& p : parents) {
      if (nodes_[p.id()].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Mat& Graph::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ext ? *n.ext : n.own;
}

Mat& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.ext_grad) return *n.ext_grad;
  if (!n.grad_ready) {
    const Mat& v = value_of(id);
    n.grad.setZero(v.rows(), v.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

void Graph::backward(Var loss, double seed) {
  if (&loss.graph() != this) throw ShapeError("backward: loss belongs to another graph");
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(loss.value()));
  if (!grad_enabled_ || !nodes_[loss.id()].needs_grad) return;
  grad_of(loss.id())(0, 0) += seed;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.grad_ready || !n.backward) continue;
    n.backward(*this, value_of(i), n.grad);
  }
}

// ---- arithmetic

Var matmul(Var a, Var b) {
  Graph& g = same_graph("matmul", a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.push("matmul", a.value() * b.value(), {a, b},
                [ia, ib](Graph& g, const Mat&, const Mat& gy) {
                  if (g.needs_grad(ia)) g.grad_of(ia).noalias() += gy * g.value_of(ib).transpose();
                  if (g.needs_grad(ib)) g.grad_of(ib).noalias() += g.value_of(ia).transpose() * gy;
                });
}

Var add(Var a, Var b) {
  Graph& g = same_graph("add", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.push("add", a.value() + b.value(), {a, b},
                [ia, ib](Graph& g, const Mat&, const Mat& gy) {
                  if (g.needs_grad(ia)) g.grad_of(ia) += gy;
                  if (g.needs_grad(ib)) g.grad_of(ib) += gy;
                });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph("sub", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("sub", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.push("sub", a.value() - b.value(), {a, b},
                [ia, ib](Graph& g, const Mat&, const Mat& gy) {
                  if (g.needs_grad(ia)) g.grad_of(ia) += gy;
                  if (g.needs_grad(ib)) g.grad_of(ib) -= gy;
                });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph("mul", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.push("mul", a.value().cwiseProduct(b.value()), {a, b},
                [ia, ib](Graph& g, const Mat&, const Mat& gy) {
                  if (g.needs_grad(ia)) g.grad_of(ia) += gy.cwiseProduct(g.value_of(ib));
                  if (g.needs_grad(ib)) g.grad_of(ib) += gy.cwiseProduct(g.value_of(ia));
                });
}

Var add_row(Var a, Var b) {
  Graph& g = same_graph("add_row", a, b);
  if (b.rows() != 1 || a.cols() != b.cols()) shape_fail("add_row", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Mat out = a.value().rowwise() + b.value().row(0);
  return g.push("add_row", std::move(out), {a, b},
                [ia, ib](Graph& g, const Mat&, const Mat& gy) {
                  if (g.needs_grad(ia)) g.grad_of(ia) += gy;
                  if (g.needs_grad(ib)) g.grad_of(ib) += gy.colwise().sum();
                });
}

Var affine(Var a, double alpha, double beta) {
  const std::size_t ia = a.id();
  Mat out = (alpha * a.value().array() + beta).matrix();
  return a.graph().push("affine", std::move(out), {a},
                        [ia, alpha](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia) += alpha * gy;
                        });
}

Var transpose(Var a) {
  const std::size_t ia = a.id();
  return a.graph().push("transpose", a.value().transpose(), {a},
                        [ia](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia) += gy.transpose();
                        });
}

// ---- elementwise nonlinearities

Var tanh(Var a) {
  const std::size_t ia = a.id();
  Mat out = a.value().array().tanh().matrix();
  return a.graph().push("tanh", std::move(out), {a},
                        [ia](Graph& g, const Mat& y, const Mat& gy) {
                          g.grad_of(ia).array() += gy.array() * (1.0 - y.array().square());
                        });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  Mat out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.graph().push("sigmoid", std::move(out), {a},
                        [ia](Graph& g, const Mat& y, const Mat& gy) {
                          g.grad_of(ia).array() += gy.array() * y.array() * (1.0 - y.array());
                        });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  Mat out = a.value().cwiseMax(0.0);
  return a.graph().push("relu", std::move(out), {a},
                        [ia](Graph& g, const Mat& y, const Mat& gy) {
                          g.grad_of(ia).array() += (y.array() > 0.0).select(gy.array(), 0.0);
                        });
}

Var softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t ia = a.id();
  Mat y = a.value();
  if (axis == 1) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double m = y.row(r).maxCoeff();
      y.row(r) = (y.row(r).array() - m).exp().matrix();
      y.row(r) /= y.row(r).sum();
    }
  } else {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double m = y.col(c).maxCoeff();
      y.col(c) = (y.col(c).array() - m).exp().matrix();
      y.col(c) /= y.col(c).sum();
    }
  }
  return a.graph().push("softmax", std::move(y), {a},
                        [ia, axis](Graph& g, const Mat& y, const Mat& gy) {
                          Mat& ga = g.grad_of(ia);
                          const Mat gyy = gy.cwiseProduct(y);
                          if (axis == 1) {
                            const Eigen::VectorXd s = gyy.rowwise().sum();
                            ga += gyy - (y.array().colwise() * s.array()).matrix();
                          } else {
                            const Eigen::RowVectorXd s = gyy.colwise().sum();
                            ga += gyy - (y.array().rowwise() * s.array()).matrix();
                          }
                        });
}

// ---- structural

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Graph& g = parts[0].graph();
  Eigen::Index rows = 0, cols = 0;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw ShapeError("concat: operands belong to different graphs");
    if (axis == 1) {
      if (p.rows() != parts[0].rows()) shape_fail("concat", parts[0].value(), p.value());
      cols += p.cols();
    } else {
      if (p.cols() != parts[0].cols()) shape_fail("concat", parts[0].value(), p.value());
      rows += p.rows();
    }
  }
  if (axis == 1) rows = parts[0].rows();
  else cols = parts[0].cols();
  Mat out(rows, cols);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    if (axis == 1) out.middleCols(off, p.cols()) = p.value();
    else out.middleRows(off, p.rows()) = p.value();
    off += axis == 1 ? p.cols() : p.rows();
    ids.push_back(p.id());
  }
  return g.push("concat", std::move(out), parts,
                [ids = std::move(ids), axis](Graph& g, const Mat&, const Mat& gy) {
                  Eigen::Index off = 0;
                  for (std::size_t id : ids) {
                    const Mat& v = g.value_of(id);
                    const Eigen::Index n = axis == 1 ? v.cols() : v.rows();
                    if (g.needs_grad(id)) {
                      if (axis == 1) g.grad_of(id) += gy.middleCols(off, n);
                      else g.grad_of(id) += gy.middleRows(off, n);
                    }
                    off += n;
                  }
                });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_str(a.value()));
  const std::size_t ia = a.id();
  return a.graph().push("slice_rows", a.value().middleRows(start, count), {a},
                        [ia, start, count](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia).middleRows(start, count) += gy;
                        });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_str(a.value()));
  const std::size_t ia = a.id();
  return a.graph().push("slice_cols", a.value().middleCols(start, count), {a},
                        [ia, start, count](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia).middleCols(start, count) += gy;
                        });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Mat& t = table.value();
  Mat out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows())
      throw InputError("gather_rows: id " + std::to_string(ids[i]) + " at position " +
                       std::to_string(i) + " outside table of " + std::to_string(t.rows()) +
                       " rows");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  const std::size_t it = table.id();
  return table.graph().push("gather_rows", std::move(out), {table},
                            [it, idv = std::vector<int>(ids.begin(), ids.end())](
                                Graph& g, const Mat&, const Mat& gy) {
                              Mat& gt = g.grad_of(it);
                              for (std::size_t i = 0; i < idv.size(); ++i)
                                gt.row(idv[i]) += gy.row(static_cast<Eigen::Index>(i));
                            });
}

Var conv1d(Var x, Var w, int width) {
  Graph& g = same_graph("conv1d", x, w);
  if (width < 1) throw ShapeError("conv1d: width must be positive");
  const Eigen::Index T = x.rows(), cin = x.cols();
  if (w.rows() != width * cin) shape_fail("conv1d", x.value(), w.value());
  const int left = (width - 1) / 2;
  Mat cols = Mat::Zero(T, width * cin);
  const Mat& xv = x.value();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int k = 0; k < width; ++k) {
      const Eigen::Index src = t + k - left;
      if (src >= 0 && src < T) cols.block(t, k * cin, 1, cin) = xv.row(src);
    }
  }
  Mat out = cols * w.value();
  const std::size_t ix = x.id(), iw = w.id();
  return g.push("conv1d", std::move(out), {x, w},
                [ix, iw, width, left, T, cin, cols = std::move(cols)](Graph& g, const Mat&,
                                                                      const Mat& gy) {
                  if (g.needs_grad(iw)) g.grad_of(iw).noalias() += cols.transpose() * gy;
                  if (g.needs_grad(ix)) {
                    const Mat gcols = gy * g.value_of(iw).transpose();
                    Mat& gx = g.grad_of(ix);
                    for (Eigen::Index t = 0; t < T; ++t) {
                      for (int k = 0; k < width; ++k) {
                        const Eigen::Index src = t + k - left;
                        if (src >= 0 && src < T) gx.row(src) += gcols.block(t, k * cin, 1, cin);
                      }
                    }
                  }
                });
}

Var maxpool_time(Var x, int width) {
  if (width < 1) throw ShapeError("maxpool_time: width must be positive");
  const Mat& xv = x.value();
  const Eigen::Index T = xv.rows(), C = xv.cols();
  Mat out(T, C);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(T * C));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index c = 0; c < C; ++c) {
      Eigen::Index best = t;
      for (Eigen::Index k = 1; k < width && t + k < T; ++k)
        if (xv(t + k, c) > xv(best, c)) best = t + k;
      out(t, c) = xv(best, c);
      arg[static_cast<std::size_t>(t * C + c)] = best;
    }
  }
  const std::size_t ix = x.id();
  return x.graph().push("maxpool_time", std::move(out), {x},
                        [ix, C, arg = std::move(arg)](Graph& g, const Mat&, const Mat& gy) {
                          Mat& gx = g.grad_of(ix);
                          for (Eigen::Index t = 0; t < gy.rows(); ++t)
                            for (Eigen::Index c = 0; c < C; ++c)
                              gx(arg[static_cast<std::size_t>(t * C + c)], c) += gy(t, c);
                        });
}

Var dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  Mat mask(x.rows(), x.cols());
  if (p >= 1.0) {
    mask.setZero();
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < p ? 0.0 : keep;
  }
  Mat out = x.value().cwiseProduct(mask);
  const std::size_t ix = x.id();
  return x.graph().push("dropout", std::move(out), {x},
                        [ix, mask = std::move(mask)](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ix) += gy.cwiseProduct(mask);
                        });
}

// ---- reductions and losses

Var sum(Var a) {
  const std::size_t ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().push("sum", std::move(out), {a},
                        [ia](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia).array() += gy(0, 0);
                        });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  const std::size_t ia = a.id();
  const double n = static_cast<double>(a.value().size());
  Mat out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.graph().push("mean", std::move(out), {a},
                        [ia, n](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia).array() += gy(0, 0) / n;
                        });
}

Var l1(Var a) {
  const std::size_t ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().cwiseAbs().sum();
  return a.graph().push("l1", std::move(out), {a},
                        [ia](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia).array() += gy(0, 0) * g.value_of(ia).array().sign();
                        });
}

Var l2(Var a) {
  const std::size_t ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.graph().push("l2", std::move(out), {a},
                        [ia](Graph& g, const Mat&, const Mat& gy) {
                          g.grad_of(ia) += (2.0 * gy(0, 0)) * g.value_of(ia);
                        });
}

Var mse(Var pred, Var target) {
  Var d = sub(pred, target);
  return affine(l2(d), 1.0 / static_cast<double>(d.value().size()), 0.0);
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Mat& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_str(z) + " logits");
  Mat prob(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols())
      throw InputError("cross_entropy: label " + std::to_string(y) + " out of range at row " +
                       std::to_string(r));
    const double m = z.row(r).maxCoeff();
    prob.row(r) = (z.row(r).array() - m).exp().matrix();
    const double s = prob.row(r).sum();
    prob.row(r) /= s;
    total += std::log(s) + m - z(r, y);
  }
  const double n = static_cast<double>(z.rows());
  Mat out(1, 1);
  out(0, 0) = total / n;
  const std::size_t il = logits.id();
  return logits.graph().push(
      "cross_entropy", std::move(out), {logits},
      [il, n, prob = std::move(prob), lab = std::vector<int>(labels.begin(), labels.end())](
          Graph& g, const Mat&, const Mat& gy) {
        Mat d = prob;
        for (std::size_t r = 0; r < lab.size(); ++r) d(static_cast<Eigen::Index>(r), lab[r]) -= 1.0;
        g.grad_of(il) += (gy(0, 0) / n) * d;
      });
}

Var bce_with_logits(Var logits, const Mat& targets) {
  const Mat& z = logits.value();
  if (z.rows() != targets.rows() || z.cols() != targets.cols())
    shape_fail("bce_with_logits", z, targets);
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i], t = targets.data()[i];
    total += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  Mat out(1, 1);
  out(0, 0) = total / n;
  const std::size_t il = logits.id();
  return logits.graph().push("bce_with_logits", std::move(out), {logits},
                             [il, n, targets](Graph& g, const Mat&, const Mat& gy) {
                               const Mat& zz = g.value_of(il);
                               Mat s = zz.unaryExpr([](double x) {
                                 return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                               : std::exp(x) / (1.0 + std::exp(x));
                               });
                               g.grad_of(il) += (gy(0, 0) / n) * (s - targets);
                             });
}

}  // namespace bnclone
