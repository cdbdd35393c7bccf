#include "deepssc/training.hpp"

#include <cmath>

namespace deepssc {

double ssc_loss(double ce_bob, double ce_eve, bool clamp) {
  const double l = ce_bob - ce_eve;
  return clamp ? std::min(l, 0.0) : l;
}

double integrated_loss(double ce_bob, double ce_eve, double w1, double w2) {
  if (w1 < 0 || w2 < 0) throw ConfigError("integrated loss weights must be nonnegative");
  return (w1 + w2) * ce_bob - w2 * ce_eve;
}

double secrecy_proxy(double ce_bob, double ce_eve) {
  return std::max(ce_eve - ce_bob, 0.0);
}

namespace {

void build_targets(const SentenceBatch& batch, std::vector<int32_t>& targets,
                   std::vector<double>& weights) {
  const int64_t b = batch.batch, l = batch.max_len;
  targets.assign(static_cast<size_t>(b * l), Vocabulary::kPad);
  weights.assign(static_cast<size_t>(b * l), 0.0);
  for (int64_t row = 0; row < b; ++row) {
    const int64_t len = batch.lengths[static_cast<size_t>(row)];
    for (int64_t t = 0; t + 1 < len; ++t) {
      targets[static_cast<size_t>(row * l + t)] = batch.id_at(row, t + 1);
      weights[static_cast<size_t>(row * l + t)] = 1.0;
    }
  }
}

}  // namespace

ad::Var cross_entropy_loss(const ad::Var& logits, const SentenceBatch& targets) {
  const int64_t classes = logits.shape().back();
  if (logits.numel() != targets.batch * targets.max_len * classes)
    throw ContractError("cross_entropy_loss: logits do not match batch shape");
  std::vector<int32_t> tgt;
  std::vector<double> w;
  build_targets(targets, tgt, w);
  return ad::cross_entropy(logits, tgt, w);
}

std::vector<double> per_sentence_ce(const Tensor& logits, const SentenceBatch& targets) {
  const int64_t b = targets.batch, l = targets.max_len;
  const int64_t classes = logits.numel() / (b * l);
  std::vector<double> out(static_cast<size_t>(b), 0.0);
  std::vector<double> row(static_cast<size_t>(classes));
  for (int64_t r = 0; r < b; ++r) {
    const int64_t len = targets.lengths[static_cast<size_t>(r)];
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t t = 0; t + 1 < len; ++t) {
      const double* scores = logits.data() + (r * l + t) * classes;
      double mx = scores[0];
      for (int64_t j = 1; j < classes; ++j) mx = std::max(mx, scores[j]);
      double sum = 0.0;
      for (int64_t j = 0; j < classes; ++j) sum += std::exp(scores[j] - mx);
      const double logp = scores[targets.id_at(r, t + 1)] - mx - std::log(sum);
      acc -= logp;
      ++count;
    }
    out[static_cast<size_t>(r)] = count > 0 ? acc / static_cast<double>(count) : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

Optimizer::Optimizer(const std::string& kind, double lr) : lr_(lr) {
  if (kind == "adam")
    adam_ = true;
  else if (kind != "sgd")
    throw ConfigError("unknown optimizer: " + kind);
}

void Optimizer::step(ParameterBundle& bundle) {
  ++t_;
  const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
  for (auto* col : bundle.all()) {
    if (col->frozen()) continue;
    for (size_t i = 0; i < col->size(); ++i) {
      auto& var = col->entry(i).second;
      if (!var.has_grad()) continue;
      const Tensor& g = var.grad();
      Tensor& v = var.value_mut();
      if (!adam_) {
        for (int64_t j = 0; j < v.numel(); ++j) v.at(j) -= lr_ * g.at(j);
        continue;
      }
      auto key = static_cast<const void*>(var.node().get());
      auto it = moments_.find(key);
      if (it == moments_.end())
        it = moments_.emplace(key, std::make_pair(Tensor(v.shape()), Tensor(v.shape()))).first;
      Tensor& m = it->second.first;
      Tensor& s = it->second.second;
      for (int64_t j = 0; j < v.numel(); ++j) {
        const double gj = g.at(j);
        m.at(j) = 0.9 * m.at(j) + 0.1 * gj;
        s.at(j) = 0.999 * s.at(j) + 0.001 * gj * gj;
        const double mhat = m.at(j) / bc1;
        const double shat = s.at(j) / bc2;
        v.at(j) -= lr_ * mhat / (std::sqrt(shat) + 1e-8);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Training stages. All stages share the batching and channel-draw machinery;
// per-step channel draws come from step-indexed derived streams so Bob's
// draws are identical whether or not the Eve path runs in that stage.
// ---------------------------------------------------------------------------

namespace {

enum class Stage { phase1_a, phase1_b, phase2, integrated };

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::phase1_a: return "phase1_a";
    case Stage::phase1_b: return "phase1_b";
    case Stage::phase2: return "phase2";
    default: return "integrated";
  }
}

// Stage B uses offset streams; the other stages share the base streams so
// that continued-training and reduction identities hold exactly.
uint64_t stage_stream_offset(Stage s) {
  return s == Stage::phase1_b ? (1ull << 40) : 0;
}

struct StepDraws {
  double snr_db = 0.0;
  ChannelRealization real;
  Rng noise_bob{0};
  Rng noise_eve{0};
};

StepDraws draw_step(const ChannelConfig& ch, double mu, double noise_w,
                    const TrainConfig& cfg, uint64_t step_tag) {
  Rng base(derive_seed(cfg.seed, stream::kChannel, step_tag));
  StepDraws d;
  Rng snr_rng = base.child(0);
  d.snr_db = snr_rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
  const double gamma = std::pow(10.0, d.snr_db / 10.0);
  Rng hb_rng = base.child(1);
  Rng he_rng = base.child(2);
  d.real.h_bob = sample_fading(ch.d_bob_m, mu, hb_rng);
  d.real.h_eve = sample_fading(ch.d_eve_m, mu, he_rng);
  d.real.noise_w = noise_w;
  d.real.power_w = power_for_target_snr(gamma, ch.d_bob_m, mu, noise_w);
  d.noise_bob = base.child(3);
  d.noise_eve = base.child(4);
  return d;
}

void check_finite(double ce, Stage stage, int64_t step) {
  if (!std::isfinite(ce))
    throw DivergenceError("training diverged (non-finite loss) in " +
                          std::string(stage_name(stage)) + " at step " +
                          std::to_string(step));
}

void run_stage(Stage stage, DeepSSC& model, const std::vector<TokenSequence>& train_set,
               const ChannelConfig& channel, const TrainConfig& cfg,
               const RecordSink& sink) {
  cfg.validate();
  channel.validate();
  ParameterBundle& bundle = model.bundle();

  int64_t epochs = 0;
  switch (stage) {
    case Stage::phase1_a:
      epochs = cfg.epochs_stage_a;
      bundle.alpha.set_frozen(false);
      bundle.beta.set_frozen(false);
      bundle.chi_b.set_frozen(false);
      bundle.delta_b.set_frozen(false);
      bundle.chi_e.set_frozen(true);
      bundle.delta_e.set_frozen(true);
      break;
    case Stage::phase1_b:
      epochs = cfg.epochs_stage_b;
      bundle.alpha.set_frozen(true);
      bundle.beta.set_frozen(true);
      bundle.chi_b.set_frozen(true);
      bundle.delta_b.set_frozen(true);
      bundle.chi_e.set_frozen(false);
      bundle.delta_e.set_frozen(false);
      break;
    case Stage::phase2:
      epochs = cfg.epochs_phase2;
      bundle.alpha.set_frozen(false);
      bundle.beta.set_frozen(false);
      bundle.chi_b.set_frozen(false);
      bundle.delta_b.set_frozen(false);
      bundle.chi_e.set_frozen(true);
      bundle.delta_e.set_frozen(true);
      break;
    case Stage::integrated:
      epochs = cfg.epochs_integrated;
      bundle.alpha.set_frozen(false);
      bundle.beta.set_frozen(false);
      bundle.chi_b.set_frozen(false);
      bundle.delta_b.set_frozen(false);
      bundle.chi_e.set_frozen(true);
      bundle.delta_e.set_frozen(true);
      break;
  }

  const double mu = path_loss_mu(channel.carrier_hz);
  const double noise_w = noise_power(channel);
  const uint64_t offset = stage_stream_offset(stage);

  BatchStream batches(&train_set, cfg.batch_size,
                      derive_seed(cfg.seed, stream::kBatches, offset));
  Optimizer opt(cfg.optimizer, cfg.learning_rate);

  const int64_t total_steps = epochs * batches.batches_per_epoch();
  for (int64_t step = 0; step < total_steps; ++step) {
    const SentenceBatch batch = batches.next();
    StepDraws draws = draw_step(channel, mu, noise_w, cfg,
                                offset + static_cast<uint64_t>(step));

    ad::Var ce_bob, ce_eve;
    ad::Var opt_loss;
    bool skip_update = false;

    if (stage == Stage::phase1_a) {
      SymbolBlock tx = model.encode_symbols(batch);
      {
        SymbolBlock rx = transmit(tx, draws.real.h_bob, draws.real.power_w,
                                  draws.real.noise_w, draws.noise_bob);
        SymbolBlock eq = equalize(rx, draws.real.h_bob, draws.real.power_w);
        ce_bob = cross_entropy_loss(
            model.semantic_decode_train(model.channel_decode(eq, Receiver::bob),
                                        batch, Receiver::bob),
            batch);
      }
      {
        ad::NoGradGuard ng;  // Eve only monitored in Stage A
        SymbolBlock rx = transmit(tx, draws.real.h_eve, draws.real.power_w,
                                  draws.real.noise_w, draws.noise_eve);
        SymbolBlock eq = equalize(rx, draws.real.h_eve, draws.real.power_w);
        ce_eve = cross_entropy_loss(
            model.semantic_decode_train(model.channel_decode(eq, Receiver::eve),
                                        batch, Receiver::eve),
            batch);
      }
      opt_loss = ce_bob;
    } else if (stage == Stage::phase1_b) {
      SymbolBlock tx;
      {
        ad::NoGradGuard ng;  // encoders frozen; symbols are data here
        tx = model.encode_symbols(batch);
        SymbolBlock rx = transmit(tx, draws.real.h_bob, draws.real.power_w,
                                  draws.real.noise_w, draws.noise_bob);
        SymbolBlock eq = equalize(rx, draws.real.h_bob, draws.real.power_w);
        ce_bob = cross_entropy_loss(
            model.semantic_decode_train(model.channel_decode(eq, Receiver::bob),
                                        batch, Receiver::bob),
            batch);
      }
      SymbolBlock rx = transmit(tx, draws.real.h_eve, draws.real.power_w,
                                draws.real.noise_w, draws.noise_eve);
      SymbolBlock eq = equalize(rx, draws.real.h_eve, draws.real.power_w);
      ce_eve = cross_entropy_loss(
          model.semantic_decode_train(model.channel_decode(eq, Receiver::eve),
                                      batch, Receiver::eve),
          batch);
      opt_loss = ce_eve;
    } else {
      SymbolBlock tx = model.encode_symbols(batch);
      {
        SymbolBlock rx = transmit(tx, draws.real.h_bob, draws.real.power_w,
                                  draws.real.noise_w, draws.noise_bob);
        SymbolBlock eq = equalize(rx, draws.real.h_bob, draws.real.power_w);
        ce_bob = cross_entropy_loss(
            model.semantic_decode_train(model.channel_decode(eq, Receiver::bob),
                                        batch, Receiver::bob),
            batch);
      }
      const bool eve_grad = stage == Stage::phase2 ? cfg.phase2_eve_weight != 0.0
                                                   : cfg.w2 != 0.0;
      {
        std::unique_ptr<ad::NoGradGuard> ng;
        if (!eve_grad) ng = std::make_unique<ad::NoGradGuard>();
        SymbolBlock rx = transmit(tx, draws.real.h_eve, draws.real.power_w,
                                  draws.real.noise_w, draws.noise_eve);
        SymbolBlock eq = equalize(rx, draws.real.h_eve, draws.real.power_w);
        ce_eve = cross_entropy_loss(
            model.semantic_decode_train(model.channel_decode(eq, Receiver::eve),
                                        batch, Receiver::eve),
            batch);
      }
      if (stage == Stage::phase2) {
        opt_loss = eve_grad
                       ? ad::sub(ce_bob, ad::scale(ce_eve, cfg.phase2_eve_weight))
                       : ce_bob;
        if (cfg.clamp_ssc && ce_bob.item() - ce_eve.item() >= 0.0)
          skip_update = true;  // [.]^- inactive: zero gradient
      } else {
        opt_loss = eve_grad
                       ? ad::sub(ad::scale(ce_bob, cfg.w1 + cfg.w2),
                                 ad::scale(ce_eve, cfg.w2))
                       : ad::scale(ce_bob, cfg.w1 + cfg.w2);
      }
    }

    check_finite(ce_bob.item(), stage, step);
    check_finite(ce_eve.item(), stage, step);

    if (!skip_update) {
      ad::backward(opt_loss);
      opt.step(bundle);
    }
    bundle.zero_grads();

    if (sink) {
      LossRecord rec;
      rec.phase = stage_name(stage);
      rec.step = step;
      rec.ce_bob = ce_bob.item();
      rec.ce_eve = ce_eve.item();
      rec.l_ssc = rec.ce_bob - rec.ce_eve;
      rec.secrecy_proxy = secrecy_proxy(rec.ce_bob, rec.ce_eve);
      rec.snr_db = draws.snr_db;
      sink(rec);
    }
  }
}

}  // namespace

void train_phase1(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                  const ChannelConfig& channel, const TrainConfig& cfg,
                  const RecordSink& sink) {
  run_stage(Stage::phase1_a, model, train_set, channel, cfg, sink);
  model.transfer_bob_decoders_to_eve();
  run_stage(Stage::phase1_b, model, train_set, channel, cfg, sink);
}

void train_phase2(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                  const ChannelConfig& channel, const TrainConfig& cfg,
                  const RecordSink& sink) {
  run_stage(Stage::phase2, model, train_set, channel, cfg, sink);
}

void train_integrated(DeepSSC& model, const std::vector<TokenSequence>& train_set,
                      const ChannelConfig& channel, const TrainConfig& cfg,
                      const RecordSink& sink) {
  run_stage(Stage::integrated, model, train_set, channel, cfg, sink);
}

}  // namespace deepssc
