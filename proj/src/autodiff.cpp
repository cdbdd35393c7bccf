#include "deepssc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "deepssc/kernels.hpp"

namespace deepssc::ad {

namespace {

bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<NodePtr>& inputs) {
  for (const auto& n : inputs)
    if (n && n->requires_grad) return true;
  return false;
}

// Builds the result node; drops the tape entry when grads are off or no
// input needs them.
Var make_node(Tensor value, std::vector<NodePtr> inputs,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled && any_requires_grad(inputs)) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ContractError(std::string(op) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const Var& root) {
  if (!root.defined()) throw ContractError("backward on undefined Var");
  if (root.numel() != 1) throw ContractError("backward root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up inputs-before-consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (child && child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_alloc) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise / broadcast.
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  kern::add_inplace(out.data(), b.value().data(), out.numel());
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an = an.get(), bn = bn.get()](Node& self) {
    if (an->requires_grad)
      kern::add_inplace(an->ensure_grad().data(), self.grad.data(), self.grad.numel());
    if (bn->requires_grad)
      kern::add_inplace(bn->ensure_grad().data(), self.grad.data(), self.grad.numel());
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  kern::axpy(out.data(), b.value().data(), -1.0, out.numel());
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an = an.get(), bn = bn.get()](Node& self) {
    if (an->requires_grad)
      kern::add_inplace(an->ensure_grad().data(), self.grad.data(), self.grad.numel());
    if (bn->requires_grad)
      kern::axpy(bn->ensure_grad().data(), self.grad.data(), -1.0, self.grad.numel());
  });
}

Var scale(const Var& a, double c) {
  Tensor out(a.shape());
  kern::axpy(out.data(), a.value().data(), c, out.numel());
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get(), c](Node& self) {
    if (an->requires_grad)
      kern::axpy(an->ensure_grad().data(), self.grad.data(), c, self.grad.numel());
  });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.numel() != 1) throw ContractError("mul_scalar: scalar operand expected");
  const double sv = s.value().item();
  Tensor out(a.shape());
  kern::axpy(out.data(), a.value().data(), sv, out.numel());
  auto an = a.node(), sn = s.node();
  return make_node(std::move(out), {an, sn},
                   [an = an.get(), sn = sn.get(), sv](Node& self) {
                     if (an->requires_grad)
                       kern::axpy(an->ensure_grad().data(), self.grad.data(), sv,
                                  self.grad.numel());
                     if (sn->requires_grad) {
                       // d/ds = sum(g .* a)
                       const double* g = self.grad.data();
                       const double* av = an->value.data();
                       double acc = 0.0;
                       for (int64_t i = 0; i < self.grad.numel(); ++i) acc += g[i] * av[i];
                       sn->ensure_grad().at(0) += acc;
                     }
                   });
}

Var add_rowbias(const Var& a, const Var& bias) {
  const int64_t c = bias.numel();
  if (a.numel() % c != 0)
    throw ContractError("add_rowbias: bias length does not divide tensor size");
  const int64_t r = a.numel() / c;
  Tensor out = a.value();
  double* o = out.data();
  const double* bv = bias.value().data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) o[i * c + j] += bv[j];
  auto an = a.node(), bn = bias.node();
  return make_node(std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), r, c](Node& self) {
                     if (an->requires_grad)
                       kern::add_inplace(an->ensure_grad().data(), self.grad.data(),
                                         self.grad.numel());
                     if (bn->requires_grad) {
                       double* bg = bn->ensure_grad().data();
                       const double* g = self.grad.data();
                       for (int64_t i = 0; i < r; ++i)
                         for (int64_t j = 0; j < c; ++j) bg[j] += g[i * c + j];
                     }
                   });
}

Var relu(const Var& a) {
  Tensor out(a.shape());
  kern::relu_forward(a.value().data(), out.data(), out.numel());
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get()](Node& self) {
    if (an->requires_grad)
      kern::relu_backward(an->value.data(), self.grad.data(),
                          an->ensure_grad().data(), self.grad.numel());
  });
}

namespace {

void check_tiled(const Var& a, const Tensor& c, const char* op) {
  if (c.numel() == 0 || a.numel() % c.numel() != 0)
    throw ContractError(std::string(op) + ": operand does not tile tensor");
}

}  // namespace

Var add_const(const Var& a, const Tensor& c) {
  check_tiled(a, c, "add_const");
  Tensor out = a.value();
  const int64_t cn = c.numel();
  double* o = out.data();
  const double* cv = c.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] += cv[i % cn];
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get()](Node& self) {
    if (an->requires_grad)
      kern::add_inplace(an->ensure_grad().data(), self.grad.data(), self.grad.numel());
  });
}

Var mul_const(const Var& a, const Tensor& c) {
  check_tiled(a, c, "mul_const");
  Tensor out = a.value();
  const int64_t cn = c.numel();
  double* o = out.data();
  const double* cv = c.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] *= cv[i % cn];
  auto an = a.node();
  Tensor ckeep = c;
  return make_node(std::move(out), {an}, [an = an.get(), ckeep](Node& self) {
    if (!an->requires_grad) return;
    double* ag = an->ensure_grad().data();
    const double* g = self.grad.data();
    const double* cv = ckeep.data();
    const int64_t cn = ckeep.numel();
    for (int64_t i = 0; i < self.grad.numel(); ++i) ag[i] += g[i] * cv[i % cn];
  });
}

Var pow_scalar(const Var& s, double p) {
  if (s.numel() != 1) throw ContractError("pow_scalar: scalar operand expected");
  const double sv = s.value().item();
  Tensor out = Tensor::scalar(std::pow(sv, p));
  auto sn = s.node();
  return make_node(std::move(out), {sn}, [sn = sn.get(), p, sv](Node& self) {
    if (sn->requires_grad)
      sn->ensure_grad().at(0) += self.grad.item() * p * std::pow(sv, p - 1.0);
  });
}

// ---------------------------------------------------------------------------
// Shape.
// ---------------------------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get()](Node& self) {
    if (an->requires_grad)
      kern::add_inplace(an->ensure_grad().data(), self.grad.data(), self.grad.numel());
  });
}

namespace {

void permute_0213_copy(const double* src, double* dst, int64_t d0, int64_t d1,
                       int64_t d2, int64_t d3) {
  for (int64_t i0 = 0; i0 < d0; ++i0)
    for (int64_t i1 = 0; i1 < d1; ++i1)
      for (int64_t i2 = 0; i2 < d2; ++i2) {
        const double* s = src + ((i0 * d1 + i1) * d2 + i2) * d3;
        double* d = dst + ((i0 * d2 + i2) * d1 + i1) * d3;
        for (int64_t i3 = 0; i3 < d3; ++i3) d[i3] = s[i3];
      }
}

void permute_0213_add(const double* src, double* dst, int64_t d0, int64_t d1,
                      int64_t d2, int64_t d3) {
  // src laid out as [d0,d2,d1,d3]; adds back into dst [d0,d1,d2,d3].
  for (int64_t i0 = 0; i0 < d0; ++i0)
    for (int64_t i1 = 0; i1 < d1; ++i1)
      for (int64_t i2 = 0; i2 < d2; ++i2) {
        const double* s = src + ((i0 * d2 + i2) * d1 + i1) * d3;
        double* d = dst + ((i0 * d1 + i1) * d2 + i2) * d3;
        for (int64_t i3 = 0; i3 < d3; ++i3) d[i3] += s[i3];
      }
}

}  // namespace

Var permute_0213(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 4) throw ContractError("permute_0213 expects a rank-4 tensor");
  const int64_t d0 = s[0], d1 = s[1], d2 = s[2], d3 = s[3];
  Tensor out({d0, d2, d1, d3});
  permute_0213_copy(a.value().data(), out.data(), d0, d1, d2, d3);
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get(), d0, d1, d2, d3](Node& self) {
    if (an->requires_grad)
      permute_0213_add(self.grad.data(), an->ensure_grad().data(), d0, d1, d2, d3);
  });
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(kern::reduce_sum(a.value().data(), a.numel()));
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get()](Node& self) {
    if (!an->requires_grad) return;
    const double g = self.grad.item();
    double* ag = an->ensure_grad().data();
    for (int64_t i = 0; i < an->value.numel(); ++i) ag[i] += g;
  });
}

Var sum_sq(const Var& a) {
  Tensor out = Tensor::scalar(kern::reduce_sumsq(a.value().data(), a.numel()));
  auto an = a.node();
  return make_node(std::move(out), {an}, [an = an.get()](Node& self) {
    if (!an->requires_grad) return;
    const double g = 2.0 * self.grad.item();
    kern::axpy(an->ensure_grad().data(), an->value.data(), g, an->value.numel());
  });
}

// ---------------------------------------------------------------------------
// Linear algebra.
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ContractError("matmul: incompatible shapes " + shape_str(sa) + " x " +
                        shape_str(sb));
  const int64_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out({m, n});
  kern::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), m, k, n](Node& self) {
                     if (an->requires_grad)
                       kern::gemm_nt(self.grad.data(), bn->value.data(),
                                     an->ensure_grad().data(), m, n, k, true);
                     if (bn->requires_grad)
                       kern::gemm_tn(an->value.data(), self.grad.data(),
                                     bn->ensure_grad().data(), k, m, n, true);
                   });
}

Var bmm(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1])
    throw ContractError("bmm: incompatible shapes " + shape_str(sa) + " x " +
                        shape_str(sb));
  const int64_t g = sa[0], m = sa[1], k = sa[2], n = sb[2];
  Tensor out({g, m, n});
  kern::bgemm_nn(a.value().data(), b.value().data(), out.data(), g, m, k, n, false);
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), g, m, k, n](Node& self) {
                     if (an->requires_grad)
                       kern::bgemm_nt(self.grad.data(), bn->value.data(),
                                      an->ensure_grad().data(), g, m, n, k, true);
                     if (bn->requires_grad)
                       kern::bgemm_tn(an->value.data(), self.grad.data(),
                                      bn->ensure_grad().data(), g, k, m, n, true);
                   });
}

Var bmm_nt(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[2])
    throw ContractError("bmm_nt: incompatible shapes " + shape_str(sa) + " x " +
                        shape_str(sb));
  const int64_t g = sa[0], m = sa[1], k = sa[2], n = sb[1];
  Tensor out({g, m, n});
  kern::bgemm_nt(a.value().data(), b.value().data(), out.data(), g, m, k, n, false);
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), g, m, k, n](Node& self) {
                     // y = a b^T: da = g b ; db = g^T a
                     if (an->requires_grad)
                       kern::bgemm_nn(self.grad.data(), bn->value.data(),
                                      an->ensure_grad().data(), g, m, n, k, true);
                     if (bn->requires_grad)
                       kern::bgemm_tn(self.grad.data(), an->value.data(),
                                      bn->ensure_grad().data(), g, m, n, k, true);
                   });
}

// ---------------------------------------------------------------------------
// Row ops.
// ---------------------------------------------------------------------------

Var softmax_rows(const Var& a) {
  const int64_t cols = a.shape().back();
  const int64_t rows = a.numel() / cols;
  Tensor out = a.value();
  kern::softmax_rows(out.data(), rows, cols);
  auto an = a.node();
  // Backward reads the forward output, so the closure keeps the node alive
  // via self.value.
  return make_node(std::move(out), {an}, [an = an.get(), rows, cols](Node& self) {
    if (!an->requires_grad) return;
    const double* y = self.value.data();
    const double* g = self.grad.data();
    double* ag = an->ensure_grad().data();
    for (int64_t i = 0; i < rows; ++i) {
      const double* yr = y + i * cols;
      const double* gr = g + i * cols;
      double dot = 0.0;
      for (int64_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
      double* ar = ag + i * cols;
      for (int64_t j = 0; j < cols; ++j) ar[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const int64_t cols = a.shape().back();
  if (gamma.numel() != cols || beta.numel() != cols)
    throw ContractError("layer_norm: gamma/beta length mismatch");
  const int64_t rows = a.numel() / cols;
  Tensor out(a.shape());
  auto mean = std::make_shared<Tensor>(Shape{rows});
  auto rstd = std::make_shared<Tensor>(Shape{rows});
  kern::layernorm_rows(a.value().data(), gamma.value().data(), beta.value().data(),
                       out.data(), mean->data(), rstd->data(), rows, cols, eps);
  auto an = a.node(), gn = gamma.node(), bn = beta.node();
  return make_node(
      std::move(out), {an, gn, bn},
      [an = an.get(), gn = gn.get(), bn = bn.get(), mean, rstd, rows, cols](Node& self) {
        const double* x = an->value.data();
        const double* gv = gn->value.data();
        const double* g = self.grad.data();
        for (int64_t i = 0; i < rows; ++i) {
          const double m = mean->at(i);
          const double rs = rstd->at(i);
          const double* xr = x + i * cols;
          const double* gr = g + i * cols;
          if (gn->requires_grad || bn->requires_grad) {
            double* gg = gn->requires_grad ? gn->ensure_grad().data() : nullptr;
            double* bg = bn->requires_grad ? bn->ensure_grad().data() : nullptr;
            for (int64_t j = 0; j < cols; ++j) {
              if (gg) gg[j] += gr[j] * (xr[j] - m) * rs;
              if (bg) bg[j] += gr[j];
            }
          }
          if (an->requires_grad) {
            // dx = rs * (h - mean(h) - xhat * mean(h .* xhat)), h = g .* gamma
            double s1 = 0.0, s2 = 0.0;
            for (int64_t j = 0; j < cols; ++j) {
              const double h = gr[j] * gv[j];
              const double xh = (xr[j] - m) * rs;
              s1 += h;
              s2 += h * xh;
            }
            s1 /= static_cast<double>(cols);
            s2 /= static_cast<double>(cols);
            double* ar = an->ensure_grad().data() + i * cols;
            for (int64_t j = 0; j < cols; ++j) {
              const double h = gr[j] * gv[j];
              const double xh = (xr[j] - m) * rs;
              ar[j] += rs * (h - s1 - xh * s2);
            }
          }
        }
      });
}

Var embedding(const Var& table, const std::vector<int32_t>& ids) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) throw ContractError("embedding: table must be [vocab, dim]");
  const int64_t vocab = ts[0], dim = ts[1];
  const int64_t n = static_cast<int64_t>(ids.size());
  Tensor out({n, dim});
  const double* tv = table.value().data();
  double* o = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const int32_t id = ids[static_cast<size_t>(i)];
    if (id < 0 || id >= vocab) throw ContractError("embedding: id out of range");
    std::copy(tv + id * dim, tv + (id + 1) * dim, o + i * dim);
  }
  auto tn = table.node();
  return make_node(std::move(out), {tn}, [tn = tn.get(), ids, dim](Node& self) {
    if (!tn->requires_grad) return;
    double* tg = tn->ensure_grad().data();
    const double* g = self.grad.data();
    for (size_t i = 0; i < ids.size(); ++i) {
      double* row = tg + static_cast<int64_t>(ids[i]) * dim;
      const double* gr = g + static_cast<int64_t>(i) * dim;
      for (int64_t j = 0; j < dim; ++j) row[j] += gr[j];
    }
  });
}

Var cross_entropy(const Var& logits, const std::vector<int32_t>& targets,
                  const std::vector<double>& row_weights) {
  const int64_t classes = logits.shape().back();
  const int64_t rows = logits.numel() / classes;
  if (static_cast<int64_t>(targets.size()) != rows ||
      static_cast<int64_t>(row_weights.size()) != rows)
    throw ContractError("cross_entropy: target/weight rows mismatch");

  double wsum = 0.0;
  for (double w : row_weights) wsum += w;
  if (wsum <= 0.0) throw ContractError("cross_entropy: all positions masked out");

  // Cache softmax probabilities for the backward pass.
  auto probs = std::make_shared<Tensor>(logits.value());
  kern::softmax_rows(probs->data(), rows, classes);

  double loss = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    const double w = row_weights[static_cast<size_t>(i)];
    if (w == 0.0) continue;
    const double p = probs->at(i * classes + targets[static_cast<size_t>(i)]);
    loss -= w * std::log(std::max(p, 1e-300));
  }
  loss /= wsum;

  auto ln = logits.node();
  return make_node(Tensor::scalar(loss), {ln},
                   [ln = ln.get(), probs, targets, row_weights, wsum, rows,
                    classes](Node& self) {
                     if (!ln->requires_grad) return;
                     const double g = self.grad.item() / wsum;
                     double* lg = ln->ensure_grad().data();
                     const double* p = probs->data();
                     for (int64_t i = 0; i < rows; ++i) {
                       const double w = row_weights[static_cast<size_t>(i)];
                       if (w == 0.0) continue;
                       const double gw = g * w;
                       double* row = lg + i * classes;
                       const double* pr = p + i * classes;
                       for (int64_t j = 0; j < classes; ++j) row[j] += gw * pr[j];
                       row[targets[static_cast<size_t>(i)]] -= gw;
                     }
                   });
}

Var complex_rowscale(const Var& x, const std::vector<std::complex<double>>& h) {
  const Shape& s = x.shape();
  if (s.size() != 2 || s[1] % 2 != 0)
    throw ContractError("complex_rowscale expects [rows, 2*m]");
  const int64_t rows = s[0], cols = s[1];
  if (h.size() != 1 && static_cast<int64_t>(h.size()) != rows)
    throw ContractError("complex_rowscale: coefficient count mismatch");
  Tensor out(s);
  const double* xv = x.value().data();
  double* o = out.data();
  for (int64_t i = 0; i < rows; ++i) {
    const std::complex<double> hi = h.size() == 1 ? h[0] : h[static_cast<size_t>(i)];
    const double hr = hi.real(), him = hi.imag();
    const double* xr = xv + i * cols;
    double* orow = o + i * cols;
    for (int64_t j = 0; j < cols; j += 2) {
      orow[j] = hr * xr[j] - him * xr[j + 1];
      orow[j + 1] = him * xr[j] + hr * xr[j + 1];
    }
  }
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn = xn.get(), h, rows, cols](Node& self) {
    if (!xn->requires_grad) return;
    double* xg = xn->ensure_grad().data();
    const double* g = self.grad.data();
    for (int64_t i = 0; i < rows; ++i) {
      const std::complex<double> hi = h.size() == 1 ? h[0] : h[static_cast<size_t>(i)];
      const double hr = hi.real(), him = hi.imag();
      const double* gr = g + i * cols;
      double* xr = xg + i * cols;
      for (int64_t j = 0; j < cols; j += 2) {
        xr[j] += hr * gr[j] + him * gr[j + 1];
        xr[j + 1] += -him * gr[j] + hr * gr[j + 1];
      }
    }
  });
}

}  // namespace deepssc::ad
