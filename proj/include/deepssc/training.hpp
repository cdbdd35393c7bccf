// Losses, the secrecy proxy, optimizers, and the training procedures:
// Phase I (reliability, incl. Eve transfer learning), Phase II (security),
// and the single-phase integrated baseline.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepssc/model.hpp"

namespace deepssc {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::string optimizer = "sgd";  // "sgd" (plain, per the update rule) or "adam"
  int64_t batch_size = 128;
  int64_t epochs_stage_a = 20;
  int64_t epochs_stage_b = 10;
  int64_t epochs_phase2 = 10;
  int64_t epochs_integrated = 10;
  double snr_low_db = 0.0;   // per-batch training SNR drawn uniformly
  double snr_high_db = 18.0;
  double w1 = 1.0;           // integrated-loss weights
  double w2 = 1.0;
  bool clamp_ssc = false;    // literal [.]^- variant of the Phase II loss
  double phase2_eve_weight = 1.0;
  uint64_t seed = 1;

  void validate() const {
    if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (w1 < 0 || w2 < 0) throw ConfigError("loss weights must be nonnegative");
    if (snr_high_db < snr_low_db) throw ConfigError("empty training SNR range");
    if (optimizer != "sgd" && optimizer != "adam")
      throw ConfigError("optimizer must be sgd or adam");
  }
};

struct LossRecord {
  std::string phase;
  int64_t step = 0;
  double ce_bob = 0.0;
  double ce_eve = 0.0;
  double l_ssc = 0.0;  // always ce_bob - ce_eve
  double secrecy_proxy = 0.0;
  double snr_db = 0.0;
};

using RecordSink = std::function<void(const LossRecord&)>;

// L_SSC: ce_bob - ce_eve; clamped variant takes the negative part.
double ssc_loss(double ce_bob, double ce_eve, bool clamp = false);
// (w1 + w2) ce_bob - w2 ce_eve.
double integrated_loss(double ce_bob, double ce_eve, double w1, double w2);
// Per-draw secrecy-capacity estimate: max(ce_eve - ce_bob, 0).
double secrecy_proxy(double ce_bob, double ce_eve);

// Mean token cross entropy of the next-token predictions over non-pad
// positions; logits [B, L, vocab] from semantic_decode_train.
ad::Var cross_entropy_loss(const ad::Var& logits, const SentenceBatch& targets);

// Per-sentence mean CE from raw logits (evaluation helper, no autodiff).
std::vector<double> per_sentence_ce(const Tensor& logits, const SentenceBatch& targets);

class Optimizer {
 public:
  Optimizer(const std::string& kind, double lr);

  // theta <- theta - lr * grad for every unfrozen collection; frozen
  // collections are untouched (including adaptive-moment state).
  void step(ParameterBundle& bundle);

 private:
  bool adam_ = false;
  double lr_;
  int64_t t_ = 0;
  std::unordered_map<const void*, std::pair<Tensor, Tensor>> moments_;
};

// Phase I (Algorithm 1): Stage A trains alpha/beta/chi_B/delta_B on Bob's
// cross entropy; Stage B copies Bob's decoders to Eve, freezes the encoders,
// and fine-tunes Eve's decoders on her own channel.
void train_phase1(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                  const ChannelConfig& channel, const TrainConfig& cfg,
                  const RecordSink& sink);

// Phase II: Eve's decoders frozen, encoders and Bob's decoders retrained
// under L_SSC (gradients flow through Eve's frozen path to the encoders).
void train_phase2(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                  const ChannelConfig& channel, const TrainConfig& cfg,
                  const RecordSink& sink);

// Integrated baseline: single-phase training under the weighted loss with
// Eve's decoders frozen. Expects a Phase-I-trained model (the Eve bootstrap).
void train_integrated(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                      const ChannelConfig& channel, const TrainConfig& cfg,
                      const RecordSink& sink);

}  // namespace deepssc
