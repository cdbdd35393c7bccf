// Reverse-mode autodiff over Tensor.
//
// Dynamic tape: each op returns a Var whose node records its inputs and a
// backward closure. backward(root) topologically sorts the graph and
// accumulates gradients into every node that requires them. All heavy math
// dispatches through deepssc::kern, so gradients are exactly reproducible.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deepssc/tensor.hpp"

namespace deepssc::ad {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  bool grad_alloc = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_alloc) {
      grad = Tensor(value.shape());
      grad_alloc = true;
    }
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Tensor& value() const { return n_->value; }
  Tensor& value_mut() { return n_->value; }
  const Shape& shape() const { return n_->value.shape(); }
  int64_t numel() const { return n_->value.numel(); }
  double item() const { return n_->value.item(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  Tensor& grad() { return n_->ensure_grad(); }
  bool has_grad() const { return n_ && n_->grad_alloc; }
  void zero_grad() {
    if (n_ && n_->grad_alloc) n_->grad.fill(0.0);
  }
  const NodePtr& node() const { return n_; }

 private:
  NodePtr n_;
};

// Global switch: with grads disabled every op returns a detached constant
// node (no inputs, no closure), which is what inference paths use.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Runs the backward sweep from a scalar root.
void backward(const Var& root);

// --- elementwise / broadcast ---
Var add(const Var& a, const Var& b);                  // same shape
Var sub(const Var& a, const Var& b);                  // same shape
Var scale(const Var& a, double c);                    // c * a
Var mul_scalar(const Var& a, const Var& s);           // tensor * scalar Var
Var add_rowbias(const Var& a, const Var& bias);       // [r,c] + [c]
Var relu(const Var& a);
Var add_const(const Var& a, const Tensor& c);         // c tiled over leading dims
Var mul_const(const Var& a, const Tensor& c);         // c tiled over leading dims
Var pow_scalar(const Var& s, double p);               // scalar Var ^ p

// --- shape ---
Var reshape(const Var& a, Shape shape);
Var permute_0213(const Var& a);                       // [d0,d1,d2,d3] -> [d0,d2,d1,d3]

// --- reductions ---
Var sum(const Var& a);                                // scalar
Var sum_sq(const Var& a);                             // scalar

// --- linear algebra ---
Var matmul(const Var& a, const Var& b);               // [m,k] x [k,n]
Var bmm(const Var& a, const Var& b);                  // [g,m,k] x [g,k,n]
Var bmm_nt(const Var& a, const Var& b);               // [g,m,k] x [g,n,k] -> [g,m,n]

// --- rows / nn ---
Var softmax_rows(const Var& a);                       // softmax over last dim
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var embedding(const Var& table, const std::vector<int32_t>& ids);

// Mean of -log softmax(logits)[target] over rows with weight > 0.
// logits viewed as [rows, classes]; throws if total weight is zero.
Var cross_entropy(const Var& logits, const std::vector<int32_t>& targets,
                  const std::vector<double>& row_weights);

// Per-row complex scale of interleaved (re,im) pairs: row i of x is
// multiplied by h[i] (or h[0] when h has a single entry). h carries no grad.
Var complex_rowscale(const Var& x, const std::vector<std::complex<double>>& h);

}  // namespace deepssc::ad
