#include "motionprior/diff/tape.hpp"

#include "motionprior/error.hpp"

namespace motionprior::diff {

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward backward) {
  bool req = false;
  for (const Var& p : parents) req = req || p.requires_grad();
  nodes_.push_back(Node{std::move(value), Mat(), req ? std::move(backward) : nullptr, req});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Mat value, const std::vector<Var>& parents, Backward backward) {
  bool req = false;
  for (const Var& p : parents) req = req || p.requires_grad();
  nodes_.push_back(Node{std::move(value), Mat(), req ? std::move(backward) : nullptr, req});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var root) {
  require(root.tape() == this, ErrorKind::Precondition, "backward root from another tape");
  Node& r = nodes_[root.id()];
  require(r.value.rows() == 1 && r.value.cols() == 1, ErrorKind::DimensionMismatch,
          "backward root must be a scalar");
  zero_grads();
  if (!r.requires_grad) return;
  r.grad = Mat::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // closures only accumulate into parents (lower ids), so n.grad stays put
    n.backward(*this, n.grad);
  }
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Mat& g) { accumulate_expr(v, g); }

Mat& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::zero_grads() {
  for (Node& n : nodes_) n.grad.resize(0, 0);
}

}  // namespace motionprior::diff
