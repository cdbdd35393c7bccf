// Experiment orchestration: configuration files, deterministic corpus
// preparation and splits, per-scheme training, SNR sweeps, and result
// persistence (CSV/JSON/plots).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "deepssc/model.hpp"
#include "deepssc/training.hpp"

namespace deepssc {

inline const std::vector<std::string> kKnownSchemes = {"deepssc", "no_ii",
                                                       "integrated"};

struct ExperimentConfig {
  // Corpus: "synthetic" or a path to a one-sentence-per-line text file.
  std::string corpus_source = "synthetic";
  int64_t corpus_train = 5000;
  int64_t corpus_test = 500;
  int64_t corpus_min_words = 4;
  int64_t corpus_max_words = 12;
  int64_t max_vocab = 50;

  ModelConfig model;
  ChannelConfig channel;
  TrainConfig train;

  std::vector<double> snr_sweep_db = {0, 3, 6, 9, 12, 15, 18};
  std::vector<std::string> schemes = {"deepssc", "no_ii", "integrated"};
  int64_t eval_draws = 1000;
  int64_t eval_batch = 125;

  std::string out_dir = "out";
  uint64_t seed = 1;

  void validate() const;
};

// Desk-scale defaults: synthetic corpus and a model sized for a CPU run.
ExperimentConfig default_toy_config();

// Flat "section.key = value" file; '#' starts a comment. Unknown keys are
// rejected. Values override the toy defaults.
ExperimentConfig load_config_file(const std::string& path);

struct SweepRow {
  std::string scheme;
  double snr_db = 0;
  double bleu1_bob = 0, bleu3_bob = 0;
  double bleu1_eve = 0, bleu3_eve = 0;
  double sbleu1 = 0, sbleu3 = 0;
  double secrecy_proxy = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  const SweepRow& at(const std::string& scheme, double snr_db) const;
};

class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig cfg);

  // Corpus load/synthesis, seeded split, vocabulary, token encoding.
  void prepare();

  // Trains everything the configured schemes need (Phase I is shared).
  void train_all(const RecordSink& sink = nullptr);

  // Scores one scheme at one sweep point over cfg.eval_draws fading draws.
  SweepRow evaluate(const std::string& scheme, double snr_db);

  // All schemes, all sweep points, canonical (scheme, snr) order.
  SweepResult run_sweep();

  const ExperimentConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<TokenSequence>& train_set() const { return train_set_; }
  const std::vector<TokenSequence>& test_set() const { return test_set_; }
  const std::vector<std::string>& train_sentences() const { return train_sentences_; }
  const std::vector<std::string>& test_sentences() const { return test_sentences_; }
  DeepSSC& scheme_model(const std::string& scheme);

 private:
  ExperimentConfig cfg_;
  Vocabulary vocab_;
  std::vector<std::string> train_sentences_, test_sentences_;
  std::vector<TokenSequence> train_set_, test_set_;
  std::unique_ptr<DeepSSC> phase1_, deepssc_, integrated_;
  bool prepared_ = false;
  bool trained_ = false;
};

// Full pipeline: prepare, train, sweep. Deterministic in (config, seed).
SweepResult run_experiment(const ExperimentConfig& cfg,
                           const RecordSink& sink = nullptr);

// results.csv, results.json, and the three score-versus-SNR plots.
void emit_outputs(const SweepResult& result, const std::string& dir);

// Metrics over three parallel text files; writes per-sentence CSV rows
// (sentence_id, bleu_1, bleu_3, sbleu_1, sbleu_3) and prints corpus means.
void score_files(const std::string& src_path, const std::string& bob_path,
                 const std::string& eve_path, const std::string& csv_path,
                 std::ostream& summary);

}  // namespace deepssc
