#include "deepssc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace deepssc {

namespace {

// Collection init streams (tags into the model init seed); Bob's and Eve's
// decoders deliberately use distinct streams.
enum : uint64_t {
  kAlphaTag = 1,
  kBetaTag = 2,
  kChiBobTag = 3,
  kDeltaBobTag = 4,
  kChiEveTag = 5,
  kDeltaEveTag = 6,
};

}  // namespace

nn::ParamCollection& ParameterBundle::by_name(const std::string& name) {
  for (auto* c : all())
    if (c->name() == name) return *c;
  throw ContractError("unknown parameter collection: " + name);
}

DeepSSC::DeepSSC(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  posenc_ = nn::sinusoidal_positions(cfg_.max_len, cfg_.width);

  Rng alpha_rng(derive_seed(init_seed, kAlphaTag));
  enc_emb_ = bundle_.alpha.add("emb", nn::xavier_init(cfg_.vocab_size, cfg_.width, alpha_rng));
  for (int64_t i = 0; i < cfg_.layers; ++i)
    enc_layers_.emplace_back(bundle_.alpha, "enc." + std::to_string(i), cfg_.width,
                             cfg_.heads, cfg_.ff(), alpha_rng);

  Rng beta_rng(derive_seed(init_seed, kBetaTag));
  chan_enc_lift_ = nn::Linear(bundle_.beta, "lift", cfg_.width, cfg_.channel_hidden, beta_rng);
  chan_enc_project_ =
      nn::Linear(bundle_.beta, "project", cfg_.channel_hidden, cfg_.symbol_dim, beta_rng);

  auto build_receiver = [&](ReceiverStack& rs, nn::ParamCollection& chi,
                            nn::ParamCollection& delta, uint64_t chi_tag,
                            uint64_t delta_tag) {
    Rng chi_rng(derive_seed(init_seed, chi_tag));
    rs.chan_lift = nn::Linear(chi, "lift", cfg_.symbol_dim, cfg_.channel_hidden, chi_rng);
    rs.chan_project = nn::Linear(chi, "project", cfg_.channel_hidden, cfg_.width, chi_rng);

    Rng delta_rng(derive_seed(init_seed, delta_tag));
    rs.dec_emb = delta.add("emb", nn::xavier_init(cfg_.vocab_size, cfg_.width, delta_rng));
    for (int64_t i = 0; i < cfg_.layers; ++i)
      rs.dec_layers.emplace_back(delta, "dec." + std::to_string(i), cfg_.width,
                                 cfg_.heads, cfg_.ff(), delta_rng);
    rs.out_proj = nn::Linear(delta, "out", cfg_.width, cfg_.vocab_size, delta_rng);
  };
  build_receiver(bob_, bundle_.chi_b, bundle_.delta_b, kChiBobTag, kDeltaBobTag);
  build_receiver(eve_, bundle_.chi_e, bundle_.delta_e, kChiEveTag, kDeltaEveTag);
}

std::unique_ptr<DeepSSC> DeepSSC::clone() const {
  auto copy = std::make_unique<DeepSSC>(cfg_, /*init_seed=*/0);
  auto src = bundle_.all();
  auto dst = copy->bundle_.all();
  for (size_t i = 0; i < src.size(); ++i) {
    dst[i]->copy_values_from(*src[i]);
    dst[i]->set_frozen(src[i]->frozen());
  }
  return copy;
}

ad::Var DeepSSC::semantic_encode(const SentenceBatch& batch) const {
  const int64_t b = batch.batch, l = batch.max_len;
  if (l != cfg_.max_len)
    throw ContractError("batch length does not match model max_len");
  for (int32_t id : batch.ids)
    if (id < 0 || id >= cfg_.vocab_size)
      throw ContractError("token id outside vocabulary");

  ad::Var x = ad::embedding(enc_emb_, batch.ids);  // [b*l, width]
  x = ad::scale(x, std::sqrt(static_cast<double>(cfg_.width)));
  x = ad::add_const(x, posenc_);
  const Tensor bias = nn::encoder_attn_bias(b, cfg_.heads, l, batch.lengths);
  for (const auto& layer : enc_layers_) x = layer.forward(x, bias, b, l);
  return x;
}

SymbolBlock DeepSSC::channel_encode(const ad::Var& semantic,
                                    const SentenceBatch& batch) const {
  const int64_t b = batch.batch, l = batch.max_len, n = cfg_.symbol_dim;
  ad::Var sym = chan_enc_project_.forward(ad::relu(chan_enc_lift_.forward(semantic)));
  sym = ad::reshape(sym, {b, l * n});

  // Pad slots transmit nothing; normalization counts active symbols only.
  Tensor mask({b, l * n});
  int64_t active_reals = 0;
  for (int64_t row = 0; row < b; ++row) {
    const int64_t lim = batch.lengths[static_cast<size_t>(row)] * n;
    double* m = mask.data() + row * l * n;
    for (int64_t j = 0; j < lim; ++j) m[j] = 1.0;
    active_reals += lim;
  }
  sym = ad::mul_const(sym, mask);

  const int64_t active_complex = active_reals / 2;
  ad::Var ssq = ad::sum_sq(sym);
  if (ssq.item() <= 0.0)
    throw ContractError("channel encoder produced an all-zero block");
  ad::Var mean_power = ad::scale(ssq, 1.0 / static_cast<double>(active_complex));
  ad::Var inv_rms = ad::pow_scalar(mean_power, -0.5);

  SymbolBlock block;
  block.symbols = ad::mul_scalar(sym, inv_rms);
  block.lengths = batch.lengths;
  block.n_per_token = n;
  block.normalized = true;
  return block;
}

SymbolBlock DeepSSC::encode_symbols(const SentenceBatch& batch) const {
  return channel_encode(semantic_encode(batch), batch);
}

ad::Var DeepSSC::channel_decode(const SymbolBlock& equalized, Receiver r) const {
  const ReceiverStack& rs = stack(r);
  const int64_t b = equalized.batch();
  const int64_t n = cfg_.symbol_dim;
  const int64_t l = equalized.row_reals() / n;
  if (l != cfg_.max_len)
    throw ContractError("symbol block length does not match model max_len");
  ad::Var y = ad::reshape(equalized.symbols, {b * l, n});
  return rs.chan_project.forward(ad::relu(rs.chan_lift.forward(y)));
}

ad::Var DeepSSC::decoder_logits(const ReceiverStack& rs, const ad::Var& memory,
                                const std::vector<int32_t>& input_ids,
                                int64_t batch, int64_t len,
                                const std::vector<int32_t>& memory_lengths,
                                int64_t memory_len) const {
  ad::Var x = ad::embedding(rs.dec_emb, input_ids);
  x = ad::scale(x, std::sqrt(static_cast<double>(cfg_.width)));
  Tensor pos({len, cfg_.width});
  std::copy(posenc_.data(), posenc_.data() + len * cfg_.width, pos.data());
  x = ad::add_const(x, pos);

  const Tensor self_bias = nn::causal_attn_bias(batch, cfg_.heads, len);
  const Tensor cross_bias =
      nn::cross_attn_bias(batch, cfg_.heads, len, memory_len, memory_lengths);
  for (const auto& layer : rs.dec_layers)
    x = layer.forward(x, memory, self_bias, cross_bias, batch, len, memory_len);
  ad::Var logits = rs.out_proj.forward(x);  // [batch*len, vocab]
  return ad::reshape(logits, {batch, len, cfg_.vocab_size});
}

ad::Var DeepSSC::semantic_decode_train(const ad::Var& memory,
                                       const SentenceBatch& batch,
                                       Receiver r) const {
  return decoder_logits(stack(r), memory, batch.ids, batch.batch, batch.max_len,
                        batch.lengths, batch.max_len);
}

SentenceBatch DeepSSC::semantic_decode_infer(
    const ad::Var& memory, const std::vector<int32_t>& memory_lengths,
    Receiver r, int64_t max_len) const {
  ad::NoGradGuard no_grad;
  const ReceiverStack& rs = stack(r);
  const auto batch = static_cast<int64_t>(memory_lengths.size());
  const int64_t mem_len = memory.numel() / (batch * cfg_.width);

  std::vector<int32_t> ids(static_cast<size_t>(batch), Vocabulary::kStart);
  std::vector<bool> done(static_cast<size_t>(batch), false);

  for (int64_t t = 1; t < max_len; ++t) {
    ad::Var logits = decoder_logits(rs, memory, ids, batch, t, memory_lengths, mem_len);
    const double* lv = logits.value().data();
    std::vector<int32_t> next(static_cast<size_t>(batch), Vocabulary::kPad);
    bool all_done = true;
    for (int64_t row = 0; row < batch; ++row) {
      if (done[static_cast<size_t>(row)]) continue;
      const double* scores = lv + (row * t + (t - 1)) * cfg_.vocab_size;
      int32_t best = 0;
      for (int32_t j = 1; j < cfg_.vocab_size; ++j)
        if (scores[j] > scores[best]) best = j;
      next[static_cast<size_t>(row)] = best;
      if (best == Vocabulary::kEnd)
        done[static_cast<size_t>(row)] = true;
      else
        all_done = false;
    }
    // Re-stack ids as [batch, t+1].
    std::vector<int32_t> grown(static_cast<size_t>(batch * (t + 1)));
    for (int64_t row = 0; row < batch; ++row) {
      for (int64_t j = 0; j < t; ++j)
        grown[static_cast<size_t>(row * (t + 1) + j)] =
            ids[static_cast<size_t>(row * t + j)];
      grown[static_cast<size_t>(row * (t + 1) + t)] = next[static_cast<size_t>(row)];
    }
    ids = std::move(grown);
    if (all_done) break;
  }

  const int64_t cur_len = static_cast<int64_t>(ids.size()) / batch;
  std::vector<TokenSequence> seqs;
  seqs.reserve(static_cast<size_t>(batch));
  for (int64_t row = 0; row < batch; ++row) {
    TokenSequence s;
    s.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
    int32_t count = 0;
    for (int64_t j = 0; j < cur_len; ++j) {
      const int32_t id = ids[static_cast<size_t>(row * cur_len + j)];
      s.ids[static_cast<size_t>(j)] = id;
      if (id != Vocabulary::kPad) count = static_cast<int32_t>(j + 1);
    }
    s.length = count;
    seqs.push_back(std::move(s));
  }
  return stack_batch(seqs);
}

ad::Var DeepSSC::forward(const SentenceBatch& batch, const ChannelRealization& real,
                         Receiver r, Rng& noise_rng) const {
  const std::complex<double> h = r == Receiver::bob ? real.h_bob : real.h_eve;
  SymbolBlock tx = encode_symbols(batch);
  SymbolBlock rx = transmit(tx, h, real.power_w, real.noise_w, noise_rng);
  SymbolBlock eq = equalize(rx, h, real.power_w);
  ad::Var mhat = channel_decode(eq, r);
  return semantic_decode_train(mhat, batch, r);
}

void DeepSSC::transfer_bob_decoders_to_eve() {
  bundle_.chi_e.copy_values_from(bundle_.chi_b);
  bundle_.delta_e.copy_values_from(bundle_.delta_b);
}

// ---------------------------------------------------------------------------
// Checkpoints: little magic + JSON config header + named raw float64 arrays.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'S', 'S', 'C', 'C', 'K', 'P', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"width", c.width},
          {"symbol_dim", c.symbol_dim},   {"layers", c.layers},
          {"heads", c.heads},             {"max_len", c.max_len},
          {"ff_hidden", c.ff_hidden},     {"channel_hidden", c.channel_hidden}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size");
  c.width = j.at("width");
  c.symbol_dim = j.at("symbol_dim");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.max_len = j.at("max_len");
  c.ff_hidden = j.at("ff_hidden");
  c.channel_hidden = j.at("channel_hidden");
  return c;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint");
}

}  // namespace

void DeepSSC::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::string meta = config_to_json(cfg_).dump();
  write_pod(out, static_cast<uint64_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  uint64_t entries = 0;
  for (const auto* col : bundle_.all()) entries += col->size();
  write_pod(out, entries);

  for (const auto* col : bundle_.all()) {
    for (size_t i = 0; i < col->size(); ++i) {
      const auto& [pname, var] = col->entry(i);
      const std::string key = col->name() + "/" + pname;
      write_pod(out, static_cast<uint64_t>(key.size()));
      out.write(key.data(), static_cast<std::streamsize>(key.size()));
      const auto& t = var.value();
      write_pod(out, static_cast<uint64_t>(t.ndim()));
      for (int64_t d = 0; d < t.ndim(); ++d) write_pod(out, t.dim(d));
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

namespace {

ModelConfig read_checkpoint_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint64_t meta_len = 0;
  read_pod(in, meta_len);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw IoError("truncated checkpoint: " + path);
  try {
    return config_from_json(nlohmann::json::parse(meta));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
}

}  // namespace

void DeepSSC::load_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const ModelConfig stored = read_checkpoint_header(in, path);
  if (!(stored == cfg_))
    throw ContractError("checkpoint config does not match model config");

  uint64_t entries = 0;
  read_pod(in, entries);
  for (uint64_t e = 0; e < entries; ++e) {
    uint64_t key_len = 0;
    read_pod(in, key_len);
    std::string key(key_len, '\0');
    in.read(key.data(), static_cast<std::streamsize>(key_len));
    uint64_t ndim = 0;
    read_pod(in, ndim);
    Shape shape(ndim);
    int64_t numel = 1;
    for (auto& d : shape) {
      read_pod(in, d);
      numel *= d;
    }

    const auto slash = key.find('/');
    if (slash == std::string::npos) throw IoError("malformed checkpoint key: " + key);
    nn::ParamCollection& col = bundle_.by_name(key.substr(0, slash));
    const std::string pname = key.substr(slash + 1);
    bool found = false;
    for (size_t i = 0; i < col.size(); ++i) {
      auto& [name, var] = col.entry(i);
      if (name != pname) continue;
      if (var.shape() != shape)
        throw ContractError("checkpoint shape mismatch for " + key);
      in.read(reinterpret_cast<char*>(var.value_mut().data()),
              static_cast<std::streamsize>(numel * sizeof(double)));
      if (!in) throw IoError("truncated checkpoint: " + path);
      found = true;
      break;
    }
    if (!found) throw ContractError("checkpoint key not in model: " + key);
  }
}

std::unique_ptr<DeepSSC> DeepSSC::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const ModelConfig stored = read_checkpoint_header(in, path);
  in.close();
  auto model = std::make_unique<DeepSSC>(stored, /*init_seed=*/0);
  model->load_values(path);
  return model;
}

}  // namespace deepssc
