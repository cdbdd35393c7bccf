// The codec: semantic encoder (Transformer), channel encoder (dense),
// per-receiver channel decoder (dense) and semantic decoder (Transformer),
// plus checkpointing and the end-to-end forward pass through the channel.
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deepssc/channel.hpp"
#include "deepssc/corpus.hpp"
#include "deepssc/nn.hpp"

namespace deepssc {

struct ModelConfig {
  int64_t vocab_size = 0;
  int64_t width = 128;        // Transformer width; embeddings share it
  int64_t symbol_dim = 16;    // real symbol values per token slot
  int64_t layers = 3;
  int64_t heads = 8;
  int64_t max_len = 30;       // sentence slots incl. start/end
  int64_t ff_hidden = 0;      // 0 -> 4 * width
  int64_t channel_hidden = 256;

  int64_t ff() const { return ff_hidden > 0 ? ff_hidden : 4 * width; }

  void validate() const {
    if (vocab_size < 5) throw ConfigError("vocab_size must cover the specials");
    if (width <= 0 || symbol_dim <= 0 || layers <= 0 || heads <= 0 ||
        max_len < 3 || channel_hidden <= 0)
      throw ConfigError("model dimensions must be positive");
    if (width % heads != 0) throw ConfigError("width must be divisible by heads");
    if (symbol_dim % 2 != 0)
      throw ConfigError("symbol_dim must be even (real pairs form complex symbols)");
  }

  bool operator==(const ModelConfig&) const = default;
};

enum class Receiver { bob, eve };
inline const char* receiver_name(Receiver r) {
  return r == Receiver::bob ? "bob" : "eve";
}

// The six independently freezable parameter sets.
struct ParameterBundle {
  nn::ParamCollection alpha{"alpha"};      // semantic encoder
  nn::ParamCollection beta{"beta"};        // channel encoder
  nn::ParamCollection chi_b{"chi_B"};      // Bob channel decoder
  nn::ParamCollection delta_b{"delta_B"};  // Bob semantic decoder
  nn::ParamCollection chi_e{"chi_E"};      // Eve channel decoder
  nn::ParamCollection delta_e{"delta_E"};  // Eve semantic decoder

  std::array<nn::ParamCollection*, 6> all() {
    return {&alpha, &beta, &chi_b, &delta_b, &chi_e, &delta_e};
  }
  std::array<const nn::ParamCollection*, 6> all() const {
    return {&alpha, &beta, &chi_b, &delta_b, &chi_e, &delta_e};
  }
  nn::ParamCollection& by_name(const std::string& name);
  void set_all_frozen(bool f) {
    for (auto* c : all()) c->set_frozen(f);
  }
  void zero_grads() {
    for (auto* c : all()) c->zero_grads();
  }
  int64_t param_count() const {
    int64_t n = 0;
    for (const auto* c : all()) n += c->param_count();
    return n;
  }
};

class DeepSSC {
 public:
  DeepSSC(const ModelConfig& cfg, uint64_t init_seed);

  DeepSSC(const DeepSSC&) = delete;
  DeepSSC& operator=(const DeepSSC&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterBundle& bundle() { return bundle_; }
  const ParameterBundle& bundle() const { return bundle_; }

  std::unique_ptr<DeepSSC> clone() const;

  // [B, L] ids -> semantic matrix [B*L, width] (pad keys masked in attention).
  ad::Var semantic_encode(const SentenceBatch& batch) const;

  // Semantic matrix -> power-normalized complex symbols; pad slots carry
  // zero power and the mean active-symbol power is exactly 1.
  SymbolBlock channel_encode(const ad::Var& semantic, const SentenceBatch& batch) const;

  // Both encoders chained.
  SymbolBlock encode_symbols(const SentenceBatch& batch) const;

  // Equalized symbols -> reconstructed semantic matrix [B*L, width].
  ad::Var channel_decode(const SymbolBlock& equalized, Receiver r) const;

  // Teacher-forced decoder: logits [B, L, vocab]; position t scores token t+1.
  ad::Var semantic_decode_train(const ad::Var& memory, const SentenceBatch& batch,
                                Receiver r) const;

  // Greedy autoregressive decoding from the start token.
  SentenceBatch semantic_decode_infer(const ad::Var& memory,
                                      const std::vector<int32_t>& memory_lengths,
                                      Receiver r, int64_t max_len) const;

  // encode -> transmit -> equalize -> decode -> teacher-forced logits.
  ad::Var forward(const SentenceBatch& batch, const ChannelRealization& real,
                  Receiver r, Rng& noise_rng) const;

  void save_checkpoint(const std::string& path) const;
  static std::unique_ptr<DeepSSC> load_checkpoint(const std::string& path);
  // Loads values into this model; the stored config must match.
  void load_values(const std::string& path);

  // Alg. 1 transfer step: copy Bob's trained decoders into Eve's slots.
  void transfer_bob_decoders_to_eve();

 private:
  struct ReceiverStack {
    nn::Linear chan_lift, chan_project;
    ad::Var dec_emb;
    std::vector<nn::DecoderLayer> dec_layers;
    nn::Linear out_proj;
  };

  const ReceiverStack& stack(Receiver r) const {
    return r == Receiver::bob ? bob_ : eve_;
  }
  ad::Var decoder_logits(const ReceiverStack& rs, const ad::Var& memory,
                         const std::vector<int32_t>& input_ids, int64_t batch,
                         int64_t len, const std::vector<int32_t>& memory_lengths,
                         int64_t memory_len) const;

  ModelConfig cfg_;
  ParameterBundle bundle_;
  Tensor posenc_;

  ad::Var enc_emb_;
  std::vector<nn::EncoderLayer> enc_layers_;
  nn::Linear chan_enc_lift_, chan_enc_project_;
  ReceiverStack bob_, eve_;
};

}  // namespace deepssc
