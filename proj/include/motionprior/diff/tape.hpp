#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

namespace motionprior::diff {

/// Row-major dense matrix. Rows index the batch, columns index features.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order; backward() walks them in reverse. Each op supplies a closure that
/// receives the gradient of its output and accumulates into its parents.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var variable(Mat value);

  /// Records an op result. The closure is dropped when no parent needs a gradient.
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);
  Var record(Mat value, const std::vector<Var>& parents, Backward backward);

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(Var root);

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Gradient of the last backward() root w.r.t. v; zeros if v was not reached.
  Mat grad(Var v) const;

  /// Adds g into the gradient buffer of v (no-op for constants).
  void accumulate(Var v, const Mat& g);
  template <class Expr>
  void accumulate_expr(Var v, const Expr& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  /// Writable gradient buffer for v, allocated on first use. Only valid for nodes needing grads.
  Mat& grad_buffer(Var v);

  std::size_t size() const { return nodes_.size(); }
  void zero_grads();

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool requires_grad = false;
  };
  // deque keeps node storage stable so value() references survive new records.
  std::deque<Node> nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace motionprior::diff
