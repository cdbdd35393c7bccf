// Neural-net building blocks on top of the autodiff layer: parameter
// collections with freeze flags, linear/layer-norm/attention modules, and the
// Transformer encoder/decoder layers used by the codec.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deepssc/autodiff.hpp"
#include "deepssc/rng.hpp"

namespace deepssc::nn {

// A named, independently freezable set of parameters. Insertion order is
// stable, which is what checkpointing and transfer copying rely on.
class ParamCollection {
 public:
  ParamCollection() = default;
  explicit ParamCollection(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  ad::Var add(const std::string& param_name, Tensor init);

  size_t size() const { return params_.size(); }
  int64_t param_count() const;
  const std::pair<std::string, ad::Var>& entry(size_t i) const { return params_[i]; }
  std::pair<std::string, ad::Var>& entry(size_t i) { return params_[i]; }

  // Copies parameter values from another collection with identical layout.
  void copy_values_from(const ParamCollection& other);
  bool same_layout(const ParamCollection& other) const;
  void zero_grads();

 private:
  std::string name_;
  bool frozen_ = false;
  std::vector<std::pair<std::string, ad::Var>> params_;
};

// Xavier-uniform matrix init.
Tensor xavier_init(int64_t rows, int64_t cols, Rng& rng);

struct Linear {
  ad::Var w;  // [in, out]
  ad::Var b;  // [out]

  Linear() = default;
  Linear(ParamCollection& col, const std::string& prefix, int64_t in,
         int64_t out, Rng& rng);

  // x viewed as [rows, in] -> [rows, out]
  ad::Var forward(const ad::Var& x) const;
};

struct LayerNorm {
  ad::Var gamma;
  ad::Var beta;

  LayerNorm() = default;
  LayerNorm(ParamCollection& col, const std::string& prefix, int64_t dim);

  ad::Var forward(const ad::Var& x) const;
};

// Additive attention bias builders; entries are 0 or a large negative value.
Tensor encoder_attn_bias(int64_t batch, int64_t heads, int64_t len,
                         const std::vector<int32_t>& key_lengths);
Tensor causal_attn_bias(int64_t batch, int64_t heads, int64_t len);
Tensor cross_attn_bias(int64_t batch, int64_t heads, int64_t query_len,
                       int64_t key_len, const std::vector<int32_t>& key_lengths);

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int64_t model_dim = 0;
  int64_t heads = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamCollection& col, const std::string& prefix,
                     int64_t model_dim, int64_t heads, Rng& rng);

  // queries [batch*query_len, dim], keys/values [batch*key_len, dim];
  // bias [batch*heads, query_len, key_len] additive before softmax.
  ad::Var forward(const ad::Var& queries, const ad::Var& keys_values,
                  const Tensor& bias, int64_t batch, int64_t query_len,
                  int64_t key_len) const;
};

struct FeedForward {
  Linear lift, project;

  FeedForward() = default;
  FeedForward(ParamCollection& col, const std::string& prefix, int64_t dim,
              int64_t hidden, Rng& rng);

  ad::Var forward(const ad::Var& x) const;
};

// Post-norm Transformer encoder layer: self-attention + feed-forward.
struct EncoderLayer {
  MultiHeadAttention attn;
  FeedForward ff;
  LayerNorm ln_attn, ln_ff;

  EncoderLayer() = default;
  EncoderLayer(ParamCollection& col, const std::string& prefix, int64_t dim,
               int64_t heads, int64_t ff_hidden, Rng& rng);

  ad::Var forward(const ad::Var& x, const Tensor& bias, int64_t batch,
                  int64_t len) const;
};

// Decoder layer: causal self-attention, encoder-decoder attention,
// feed-forward.
struct DecoderLayer {
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ff;
  LayerNorm ln_self, ln_cross, ln_ff;

  DecoderLayer() = default;
  DecoderLayer(ParamCollection& col, const std::string& prefix, int64_t dim,
               int64_t heads, int64_t ff_hidden, Rng& rng);

  ad::Var forward(const ad::Var& x, const ad::Var& memory,
                  const Tensor& self_bias, const Tensor& cross_bias,
                  int64_t batch, int64_t len, int64_t mem_len) const;
};

// Fixed sinusoidal positional encodings, [max_len, dim].
Tensor sinusoidal_positions(int64_t max_len, int64_t dim);

}  // namespace deepssc::nn
