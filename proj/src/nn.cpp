#include "deepssc/nn.hpp"

#include <cmath>

namespace deepssc::nn {

namespace {
constexpr double kMaskValue = -1e30;
}

ad::Var ParamCollection::add(const std::string& param_name, Tensor init) {
  ad::Var v = ad::Var::leaf(std::move(init), /*requires_grad=*/true);
  params_.emplace_back(param_name, v);
  return v;
}

int64_t ParamCollection::param_count() const {
  int64_t n = 0;
  for (const auto& [name, v] : params_) n += v.numel();
  return n;
}

bool ParamCollection::same_layout(const ParamCollection& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].first != other.params_[i].first) return false;
    if (params_[i].second.shape() != other.params_[i].second.shape()) return false;
  }
  return true;
}

void ParamCollection::copy_values_from(const ParamCollection& other) {
  if (!same_layout(other))
    throw ContractError("collection layout mismatch: " + name_ + " <- " + other.name_);
  for (size_t i = 0; i < params_.size(); ++i)
    params_[i].second.value_mut() = other.params_[i].second.value();
}

void ParamCollection::zero_grads() {
  for (auto& [name, v] : params_) v.zero_grad();
}

Tensor xavier_init(int64_t rows, int64_t cols, Rng& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = rng.uniform(-limit, limit);
  return t;
}

Linear::Linear(ParamCollection& col, const std::string& prefix, int64_t in,
               int64_t out, Rng& rng) {
  w = col.add(prefix + ".w", xavier_init(in, out, rng));
  b = col.add(prefix + ".b", Tensor({out}));
}

ad::Var Linear::forward(const ad::Var& x) const {
  const int64_t in = w.shape()[0];
  ad::Var flat = x.shape().size() == 2 ? x : ad::reshape(x, {x.numel() / in, in});
  return ad::add_rowbias(ad::matmul(flat, w), b);
}

LayerNorm::LayerNorm(ParamCollection& col, const std::string& prefix, int64_t dim) {
  gamma = col.add(prefix + ".gamma", Tensor({dim}, 1.0));
  beta = col.add(prefix + ".beta", Tensor({dim}));
}

ad::Var LayerNorm::forward(const ad::Var& x) const {
  return ad::layer_norm(x, gamma, beta);
}

Tensor encoder_attn_bias(int64_t batch, int64_t heads, int64_t len,
                         const std::vector<int32_t>& key_lengths) {
  return cross_attn_bias(batch, heads, len, len, key_lengths);
}

Tensor causal_attn_bias(int64_t batch, int64_t heads, int64_t len) {
  Tensor bias({batch * heads, len, len});
  double* d = bias.data();
  for (int64_t g = 0; g < batch * heads; ++g)
    for (int64_t q = 0; q < len; ++q)
      for (int64_t k = 0; k < len; ++k)
        d[(g * len + q) * len + k] = k <= q ? 0.0 : kMaskValue;
  return bias;
}

Tensor cross_attn_bias(int64_t batch, int64_t heads, int64_t query_len,
                       int64_t key_len, const std::vector<int32_t>& key_lengths) {
  Tensor bias({batch * heads, query_len, key_len});
  double* d = bias.data();
  for (int64_t b = 0; b < batch; ++b) {
    const int64_t limit = key_lengths[static_cast<size_t>(b)];
    for (int64_t h = 0; h < heads; ++h) {
      double* block = d + ((b * heads + h) * query_len) * key_len;
      for (int64_t q = 0; q < query_len; ++q)
        for (int64_t k = 0; k < key_len; ++k)
          block[q * key_len + k] = k < limit ? 0.0 : kMaskValue;
    }
  }
  return bias;
}

MultiHeadAttention::MultiHeadAttention(ParamCollection& col,
                                       const std::string& prefix,
                                       int64_t model_dim, int64_t heads,
                                       Rng& rng)
    : wq(col, prefix + ".wq", model_dim, model_dim, rng),
      wk(col, prefix + ".wk", model_dim, model_dim, rng),
      wv(col, prefix + ".wv", model_dim, model_dim, rng),
      wo(col, prefix + ".wo", model_dim, model_dim, rng),
      model_dim(model_dim),
      heads(heads) {}

ad::Var MultiHeadAttention::forward(const ad::Var& queries,
                                    const ad::Var& keys_values,
                                    const Tensor& bias, int64_t batch,
                                    int64_t query_len, int64_t key_len) const {
  const int64_t dk = model_dim / heads;
  auto split = [&](const ad::Var& x, int64_t len) {
    // [batch*len, dim] -> [batch*heads, len, dk]
    ad::Var r = ad::reshape(x, {batch, len, heads, dk});
    r = ad::permute_0213(r);  // [batch, heads, len, dk]
    return ad::reshape(r, {batch * heads, len, dk});
  };
  ad::Var q = split(wq.forward(queries), query_len);
  ad::Var k = split(wk.forward(keys_values), key_len);
  ad::Var v = split(wv.forward(keys_values), key_len);

  ad::Var scores = ad::scale(ad::bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
  scores = ad::add_const(scores, bias);
  ad::Var attn = ad::softmax_rows(scores);
  ad::Var mixed = ad::bmm(attn, v);  // [batch*heads, query_len, dk]

  ad::Var merged = ad::reshape(mixed, {batch, heads, query_len, dk});
  merged = ad::permute_0213(merged);  // [batch, query_len, heads, dk]
  merged = ad::reshape(merged, {batch * query_len, model_dim});
  return wo.forward(merged);
}

FeedForward::FeedForward(ParamCollection& col, const std::string& prefix,
                         int64_t dim, int64_t hidden, Rng& rng)
    : lift(col, prefix + ".lift", dim, hidden, rng),
      project(col, prefix + ".project", hidden, dim, rng) {}

ad::Var FeedForward::forward(const ad::Var& x) const {
  return project.forward(ad::relu(lift.forward(x)));
}

EncoderLayer::EncoderLayer(ParamCollection& col, const std::string& prefix,
                           int64_t dim, int64_t heads, int64_t ff_hidden,
                           Rng& rng)
    : attn(col, prefix + ".attn", dim, heads, rng),
      ff(col, prefix + ".ff", dim, ff_hidden, rng),
      ln_attn(col, prefix + ".ln_attn", dim),
      ln_ff(col, prefix + ".ln_ff", dim) {}

ad::Var EncoderLayer::forward(const ad::Var& x, const Tensor& bias,
                              int64_t batch, int64_t len) const {
  ad::Var a = ln_attn.forward(ad::add(x, attn.forward(x, x, bias, batch, len, len)));
  return ln_ff.forward(ad::add(a, ff.forward(a)));
}

DecoderLayer::DecoderLayer(ParamCollection& col, const std::string& prefix,
                           int64_t dim, int64_t heads, int64_t ff_hidden,
                           Rng& rng)
    : self_attn(col, prefix + ".self_attn", dim, heads, rng),
      cross_attn(col, prefix + ".cross_attn", dim, heads, rng),
      ff(col, prefix + ".ff", dim, ff_hidden, rng),
      ln_self(col, prefix + ".ln_self", dim),
      ln_cross(col, prefix + ".ln_cross", dim),
      ln_ff(col, prefix + ".ln_ff", dim) {}

ad::Var DecoderLayer::forward(const ad::Var& x, const ad::Var& memory,
                              const Tensor& self_bias, const Tensor& cross_bias,
                              int64_t batch, int64_t len, int64_t mem_len) const {
  ad::Var a = ln_self.forward(
      ad::add(x, self_attn.forward(x, x, self_bias, batch, len, len)));
  ad::Var c = ln_cross.forward(
      ad::add(a, cross_attn.forward(a, memory, cross_bias, batch, len, mem_len)));
  return ln_ff.forward(ad::add(c, ff.forward(c)));
}

Tensor sinusoidal_positions(int64_t max_len, int64_t dim) {
  Tensor pe({max_len, dim});
  for (int64_t pos = 0; pos < max_len; ++pos) {
    for (int64_t i = 0; i < dim; i += 2) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe.at(pos * dim + i) = std::sin(angle);
      if (i + 1 < dim) pe.at(pos * dim + i + 1) = std::cos(angle);
    }
  }
  return pe;
}

}  // namespace deepssc::nn
