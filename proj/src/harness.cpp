#include "deepssc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deepssc/metrics.hpp"
#include "deepssc/plot.hpp"

namespace deepssc {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (corpus_source.empty()) throw ConfigError("corpus source must be set");
  if (corpus_train <= 0 || corpus_test <= 0)
    throw ConfigError("corpus split sizes must be positive");
  if (corpus_min_words < 1 || corpus_max_words < corpus_min_words)
    throw ConfigError("invalid corpus word-count range");
  if (max_vocab < 5) throw ConfigError("max_vocab must be at least 5");
  if (model.max_len < corpus_max_words + 2)
    throw ConfigError("model.max_len must cover corpus_max_words plus start/end");
  if (snr_sweep_db.empty()) throw ConfigError("empty SNR sweep");
  if (schemes.empty()) throw ConfigError("empty scheme set");
  for (const auto& s : schemes)
    if (std::find(kKnownSchemes.begin(), kKnownSchemes.end(), s) == kKnownSchemes.end())
      throw ConfigError("unknown scheme: " + s);
  if (eval_draws <= 0 || eval_batch <= 0)
    throw ConfigError("evaluation sizes must be positive");
  train.validate();
  channel.validate();
  // Model is validated once the vocabulary size is known.
}

ExperimentConfig default_toy_config() {
  ExperimentConfig cfg;
  cfg.model.width = 64;
  cfg.model.symbol_dim = 8;
  cfg.model.layers = 2;
  cfg.model.heads = 4;
  cfg.model.max_len = 14;
  cfg.model.ff_hidden = 128;
  cfg.model.channel_hidden = 128;
  cfg.train.optimizer = "adam";
  cfg.train.learning_rate = 1e-3;
  cfg.train.epochs_stage_a = 12;
  cfg.train.epochs_stage_b = 6;
  cfg.train.epochs_phase2 = 8;
  cfg.train.epochs_integrated = 8;
  return cfg;
}

// ---------------------------------------------------------------------------
// Config file.
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("boolean expected for " + key + ": " + v);
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  ExperimentConfig cfg = default_toy_config();

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    try {
      if (key == "corpus.source") cfg.corpus_source = value;
      else if (key == "corpus.train_count") cfg.corpus_train = std::stoll(value);
      else if (key == "corpus.test_count") cfg.corpus_test = std::stoll(value);
      else if (key == "corpus.min_words") cfg.corpus_min_words = std::stoll(value);
      else if (key == "corpus.max_words") cfg.corpus_max_words = std::stoll(value);
      else if (key == "corpus.max_vocab") cfg.max_vocab = std::stoll(value);
      else if (key == "model.width") cfg.model.width = std::stoll(value);
      else if (key == "model.symbol_dim") cfg.model.symbol_dim = std::stoll(value);
      else if (key == "model.layers") cfg.model.layers = std::stoll(value);
      else if (key == "model.heads") cfg.model.heads = std::stoll(value);
      else if (key == "model.max_len") cfg.model.max_len = std::stoll(value);
      else if (key == "model.ff_hidden") cfg.model.ff_hidden = std::stoll(value);
      else if (key == "model.channel_hidden") cfg.model.channel_hidden = std::stoll(value);
      else if (key == "channel.carrier_hz") cfg.channel.carrier_hz = std::stod(value);
      else if (key == "channel.bandwidth_hz") cfg.channel.bandwidth_hz = std::stod(value);
      else if (key == "channel.noise_figure_db") cfg.channel.noise_figure_db = std::stod(value);
      else if (key == "channel.d_bob_m") cfg.channel.d_bob_m = std::stod(value);
      else if (key == "channel.d_eve_m") cfg.channel.d_eve_m = std::stod(value);
      else if (key == "train.learning_rate") cfg.train.learning_rate = std::stod(value);
      else if (key == "train.optimizer") cfg.train.optimizer = value;
      else if (key == "train.batch_size") cfg.train.batch_size = std::stoll(value);
      else if (key == "train.epochs_stage_a") cfg.train.epochs_stage_a = std::stoll(value);
      else if (key == "train.epochs_stage_b") cfg.train.epochs_stage_b = std::stoll(value);
      else if (key == "train.epochs_phase2") cfg.train.epochs_phase2 = std::stoll(value);
      else if (key == "train.epochs_integrated") cfg.train.epochs_integrated = std::stoll(value);
      else if (key == "train.snr_low_db") cfg.train.snr_low_db = std::stod(value);
      else if (key == "train.snr_high_db") cfg.train.snr_high_db = std::stod(value);
      else if (key == "train.w1") cfg.train.w1 = std::stod(value);
      else if (key == "train.w2") cfg.train.w2 = std::stod(value);
      else if (key == "train.clamp_ssc") cfg.train.clamp_ssc = parse_bool(value, key);
      else if (key == "train.phase2_eve_weight") cfg.train.phase2_eve_weight = std::stod(value);
      else if (key == "sweep.snr_db") {
        cfg.snr_sweep_db.clear();
        for (const auto& v : split_list(value)) cfg.snr_sweep_db.push_back(std::stod(v));
      } else if (key == "sweep.schemes") cfg.schemes = split_list(value);
      else if (key == "sweep.eval_draws") cfg.eval_draws = std::stoll(value);
      else if (key == "sweep.eval_batch") cfg.eval_batch = std::stoll(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "out_dir") cfg.out_dir = value;
      else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": value out of range for " + key);
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Runner.
// ---------------------------------------------------------------------------

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

void ExperimentRunner::prepare() {
  if (prepared_) return;
  std::vector<std::string> sentences;
  if (cfg_.corpus_source == "synthetic") {
    Rng rng(derive_seed(cfg_.seed, stream::kSynthetic));
    sentences = synthetic_corpus(cfg_.corpus_train + cfg_.corpus_test,
                                 cfg_.corpus_min_words, cfg_.corpus_max_words, rng);
  } else {
    sentences = load_corpus(cfg_.corpus_source, cfg_.corpus_min_words,
                            cfg_.corpus_max_words);
  }
  if (static_cast<int64_t>(sentences.size()) < cfg_.corpus_train + cfg_.corpus_test)
    throw ConfigError("corpus too small for the requested train/test split");

  // Split before anything else touches the data; the test half never enters
  // a training batch.
  Rng split_rng(derive_seed(cfg_.seed, stream::kSplit));
  split_rng.shuffle(sentences);
  train_sentences_.assign(sentences.begin(), sentences.begin() + cfg_.corpus_train);
  test_sentences_.assign(sentences.begin() + cfg_.corpus_train,
                         sentences.begin() + cfg_.corpus_train + cfg_.corpus_test);

  vocab_ = Vocabulary::build(train_sentences_, cfg_.max_vocab);
  cfg_.model.vocab_size = vocab_.size();
  cfg_.model.validate();

  train_set_.clear();
  test_set_.clear();
  for (const auto& s : train_sentences_)
    train_set_.push_back(encode_sentence(s, vocab_, cfg_.model.max_len));
  for (const auto& s : test_sentences_)
    test_set_.push_back(encode_sentence(s, vocab_, cfg_.model.max_len));
  prepared_ = true;
}

void ExperimentRunner::train_all(const RecordSink& sink) {
  if (trained_) return;
  prepare();

  phase1_ = std::make_unique<DeepSSC>(cfg_.model, derive_seed(cfg_.seed, stream::kInit));
  train_phase1(*phase1_, train_set_, cfg_.channel, cfg_.train, sink);

  const bool want_deepssc =
      std::find(cfg_.schemes.begin(), cfg_.schemes.end(), "deepssc") != cfg_.schemes.end();
  const bool want_integrated =
      std::find(cfg_.schemes.begin(), cfg_.schemes.end(), "integrated") != cfg_.schemes.end();

  if (want_deepssc) {
    deepssc_ = phase1_->clone();
    train_phase2(*deepssc_, train_set_, cfg_.channel, cfg_.train, sink);
  }
  if (want_integrated) {
    integrated_ = phase1_->clone();
    train_integrated(*integrated_, train_set_, cfg_.channel, cfg_.train, sink);
  }
  trained_ = true;
}

DeepSSC& ExperimentRunner::scheme_model(const std::string& scheme) {
  if (scheme == "no_ii") {
    if (!phase1_) throw ContractError("schemes not trained yet");
    return *phase1_;
  }
  if (scheme == "deepssc") {
    if (!deepssc_) throw ContractError("deepssc scheme not trained");
    return *deepssc_;
  }
  if (scheme == "integrated") {
    if (!integrated_) throw ContractError("integrated scheme not trained");
    return *integrated_;
  }
  throw ConfigError("unknown scheme: " + scheme);
}

namespace {

std::vector<int32_t> batch_row_ids(const SentenceBatch& b, int64_t row) {
  return {b.ids.begin() + row * b.max_len, b.ids.begin() + (row + 1) * b.max_len};
}

}  // namespace

SweepRow ExperimentRunner::evaluate(const std::string& scheme, double snr_db) {
  DeepSSC& model = scheme_model(scheme);
  ad::NoGradGuard no_grad;

  const double mu = path_loss_mu(cfg_.channel.carrier_hz);
  const double noise_w = noise_power(cfg_.channel);
  const double power_w =
      power_for_target_snr(std::pow(10.0, snr_db / 10.0), cfg_.channel.d_bob_m, mu, noise_w);

  const auto u1 = unigram_weights();
  const auto u3 = trigram_weights();
  SweepRow out;
  out.scheme = scheme;
  out.snr_db = snr_db;

  const int64_t test_n = static_cast<int64_t>(test_set_.size());
  // Evaluation streams depend only on the draw-chunk index, so every scheme
  // and every sweep point sees identical fading and noise (common random
  // numbers); only the transmit power changes along the sweep.
  const uint64_t eval_seed = derive_seed(cfg_.seed, stream::kEval);

  int64_t emitted = 0;
  for (int64_t chunk = 0; emitted < cfg_.eval_draws; ++chunk) {
    const int64_t take = std::min(cfg_.eval_batch, cfg_.eval_draws - emitted);
    std::vector<TokenSequence> seqs;
    seqs.reserve(static_cast<size_t>(take));
    for (int64_t i = 0; i < take; ++i)
      seqs.push_back(test_set_[static_cast<size_t>((emitted + i) % test_n)]);
    const SentenceBatch batch = stack_batch(seqs);

    Rng chunk_rng(derive_seed(eval_seed, static_cast<uint64_t>(chunk)));
    Rng hb_rng = chunk_rng.child(1);
    Rng he_rng = chunk_rng.child(2);
    Rng nb_rng = chunk_rng.child(3);
    Rng ne_rng = chunk_rng.child(4);
    std::vector<std::complex<double>> h_bob(static_cast<size_t>(take));
    std::vector<std::complex<double>> h_eve(static_cast<size_t>(take));
    for (auto& h : h_bob) h = sample_fading(cfg_.channel.d_bob_m, mu, hb_rng);
    for (auto& h : h_eve) h = sample_fading(cfg_.channel.d_eve_m, mu, he_rng);

    const SymbolBlock tx = model.encode_symbols(batch);

    auto receive = [&](Receiver r, const std::vector<std::complex<double>>& h, Rng& nrng) {
      SymbolBlock rx = transmit(tx, h, power_w, noise_w, nrng);
      SymbolBlock eq = equalize(rx, h, power_w);
      return model.channel_decode(eq, r);
    };
    const ad::Var mhat_bob = receive(Receiver::bob, h_bob, nb_rng);
    const ad::Var mhat_eve = receive(Receiver::eve, h_eve, ne_rng);

    const SentenceBatch dec_bob = model.semantic_decode_infer(
        mhat_bob, batch.lengths, Receiver::bob, cfg_.model.max_len);
    const SentenceBatch dec_eve = model.semantic_decode_infer(
        mhat_eve, batch.lengths, Receiver::eve, cfg_.model.max_len);

    const auto ce_bob = per_sentence_ce(
        model.semantic_decode_train(mhat_bob, batch, Receiver::bob).value(), batch);
    const auto ce_eve = per_sentence_ce(
        model.semantic_decode_train(mhat_eve, batch, Receiver::eve).value(), batch);

    for (int64_t i = 0; i < take; ++i) {
      const auto src = sequence_words(batch_row_ids(batch, i), vocab_);
      const auto bob = sequence_words(batch_row_ids(dec_bob, i), vocab_);
      const auto eve = sequence_words(batch_row_ids(dec_eve, i), vocab_);
      out.bleu1_bob += bleu(src, bob, u1).score;
      out.bleu3_bob += bleu(src, bob, u3).score;
      out.bleu1_eve += bleu(src, eve, u1).score;
      out.bleu3_eve += bleu(src, eve, u3).score;
      out.sbleu1 += sbleu(src, bob, eve, u1).score;
      out.sbleu3 += sbleu(src, bob, eve, u3).score;
      out.secrecy_proxy += secrecy_proxy(ce_bob[static_cast<size_t>(i)],
                                         ce_eve[static_cast<size_t>(i)]);
    }
    emitted += take;
  }

  const auto denom = static_cast<double>(cfg_.eval_draws);
  out.bleu1_bob /= denom;
  out.bleu3_bob /= denom;
  out.bleu1_eve /= denom;
  out.bleu3_eve /= denom;
  out.sbleu1 /= denom;
  out.sbleu3 /= denom;
  out.secrecy_proxy /= denom;
  return out;
}

SweepResult ExperimentRunner::run_sweep() {
  SweepResult result;
  for (const auto& scheme : cfg_.schemes)
    for (double snr : cfg_.snr_sweep_db) result.rows.push_back(evaluate(scheme, snr));
  return result;
}

const SweepRow& SweepResult::at(const std::string& scheme, double snr_db) const {
  for (const auto& r : rows)
    if (r.scheme == scheme && r.snr_db == snr_db) return r;
  throw ContractError("no sweep row for " + scheme + " at " + std::to_string(snr_db));
}

SweepResult run_experiment(const ExperimentConfig& cfg, const RecordSink& sink) {
  ExperimentRunner runner(cfg);
  runner.prepare();
  runner.train_all(sink);
  return runner.run_sweep();
}

// ---------------------------------------------------------------------------
// Outputs.
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

nlohmann::json row_to_json(const SweepRow& r) {
  return {{"scheme", r.scheme},        {"snr_db", r.snr_db},
          {"bleu1_bob", r.bleu1_bob},  {"bleu3_bob", r.bleu3_bob},
          {"bleu1_eve", r.bleu1_eve},  {"bleu3_eve", r.bleu3_eve},
          {"sbleu1", r.sbleu1},        {"sbleu3", r.sbleu3},
          {"secrecy_proxy", r.secrecy_proxy}};
}

uint32_t scheme_color(const std::string& scheme, bool eve) {
  if (scheme == "deepssc") return eve ? 0xD62728 : 0x1F77B4;
  if (scheme == "no_ii") return eve ? 0xE377C2 : 0x2CA02C;
  return eve ? 0x8C564B : 0xFF7F0E;  // integrated
}

}  // namespace

void emit_outputs(const SweepResult& result, const std::string& dir) {
  if (result.rows.empty()) throw ContractError("emit_outputs: empty result");
  fs::create_directories(dir);

  // CSV.
  {
    std::ofstream csv(fs::path(dir) / "results.csv");
    if (!csv) throw IoError("cannot write results.csv in " + dir);
    csv << "scheme,snr_db,bleu1_bob,bleu3_bob,bleu1_eve,bleu3_eve,sbleu1,sbleu3,"
           "secrecy_proxy\n";
    for (const auto& r : result.rows) {
      csv << r.scheme << ',' << fmt(r.snr_db) << ',' << fmt(r.bleu1_bob) << ','
          << fmt(r.bleu3_bob) << ',' << fmt(r.bleu1_eve) << ',' << fmt(r.bleu3_eve)
          << ',' << fmt(r.sbleu1) << ',' << fmt(r.sbleu3) << ','
          << fmt(r.secrecy_proxy) << '\n';
    }
  }

  // JSON (same rows).
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : result.rows) j.push_back(row_to_json(r));
    std::ofstream js(fs::path(dir) / "results.json");
    if (!js) throw IoError("cannot write results.json in " + dir);
    js << j.dump(2) << '\n';
  }

  // Plots: one figure per metric family, x axis shared across schemes.
  std::vector<std::string> schemes;
  std::vector<double> snrs;
  for (const auto& r : result.rows) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end())
      schemes.push_back(r.scheme);
    if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end())
      snrs.push_back(r.snr_db);
  }
  std::sort(snrs.begin(), snrs.end());

  auto collect = [&](const std::string& scheme, auto field) {
    std::vector<double> y;
    for (double s : snrs) y.push_back(field(result.at(scheme, s)));
    return y;
  };

  auto bleu_figure = [&](const std::string& path, const std::string& title,
                         auto bob_field, auto eve_field) {
    std::vector<PlotSeries> series;
    for (const auto& s : schemes) {
      series.push_back({s + " bob", scheme_color(s, false), collect(s, bob_field)});
      series.push_back({s + " eve", scheme_color(s, true), collect(s, eve_field)});
    }
    write_line_plot(path, title, "SNR (dB)", "score", snrs, series, 0.0, 1.0);
  };

  bleu_figure((fs::path(dir) / "fig_bleu_1gram.png").string(), "BLEU 1-GRAM VS SNR",
              [](const SweepRow& r) { return r.bleu1_bob; },
              [](const SweepRow& r) { return r.bleu1_eve; });
  bleu_figure((fs::path(dir) / "fig_bleu_3gram.png").string(), "BLEU 3-GRAM VS SNR",
              [](const SweepRow& r) { return r.bleu3_bob; },
              [](const SweepRow& r) { return r.bleu3_eve; });

  std::vector<PlotSeries> sb;
  for (const auto& s : schemes) {
    sb.push_back({s + " 1-gram", scheme_color(s, false),
                  collect(s, [](const SweepRow& r) { return r.sbleu1; })});
    sb.push_back({s + " 3-gram", scheme_color(s, true),
                  collect(s, [](const SweepRow& r) { return r.sbleu3; })});
  }
  write_line_plot((fs::path(dir) / "fig_sbleu.png").string(), "S-BLEU VS SNR",
                  "SNR (dB)", "score", snrs, sb, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// File scoring.
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open text file: " + path);
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(tokenize(normalize_sentence(line)));
  return lines;
}

}  // namespace

void score_files(const std::string& src_path, const std::string& bob_path,
                 const std::string& eve_path, const std::string& csv_path,
                 std::ostream& summary) {
  const auto src = read_token_lines(src_path);
  const auto bob = read_token_lines(bob_path);
  const auto eve = read_token_lines(eve_path);
  if (src.size() != bob.size() || src.size() != eve.size())
    throw ContractError("score files must have the same line count");
  if (src.empty()) throw ContractError("score files are empty");

  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write score csv: " + csv_path);
  csv << "sentence_id,bleu_1,bleu_3,sbleu_1,sbleu_3\n";

  const auto u1 = unigram_weights();
  const auto u3 = trigram_weights();
  double m1 = 0, m3 = 0, s1 = 0, s3 = 0;
  for (size_t i = 0; i < src.size(); ++i) {
    const double b1 = bleu(src[i], bob[i], u1).score;
    const double b3 = bleu(src[i], bob[i], u3).score;
    const double sb1 = sbleu(src[i], bob[i], eve[i], u1).score;
    const double sb3 = sbleu(src[i], bob[i], eve[i], u3).score;
    csv << i << ',' << fmt(b1) << ',' << fmt(b3) << ',' << fmt(sb1) << ',' << fmt(sb3)
        << '\n';
    m1 += b1;
    m3 += b3;
    s1 += sb1;
    s3 += sb3;
  }
  const auto n = static_cast<double>(src.size());
  summary << "sentences " << src.size() << "\n"
          << "bleu_1 " << fmt(m1 / n) << "\nbleu_3 " << fmt(m3 / n) << "\nsbleu_1 "
          << fmt(s1 / n) << "\nsbleu_3 " << fmt(s3 / n) << "\n";
}

}  // namespace deepssc
