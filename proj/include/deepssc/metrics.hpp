// Reliability and security scores: BLEU (clipped n-gram precision with a
// brevity penalty) and S-BLEU (same form, counting only the n-grams the
// legitimate receiver recovered that the eavesdropper did not).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deepssc/common.hpp"

namespace deepssc {

struct NgramProfile {
  int64_t n = 0;
  std::map<std::string, int64_t> counts;  // key: tokens joined with '\x1f'
};

// Sliding-window counts over positions 1..len-n+1; empty when len < n.
NgramProfile ngram_counts(const std::vector<std::string>& tokens, int64_t n);

struct ScoreReport {
  double score = 0.0;                 // in [0, 1]
  std::map<int64_t, double> per_n;    // n -> f_n (or secure f_n)
  double penalty = 0.0;               // brevity term, min(1 - l_s/l_cand, 0)
  std::vector<double> weights;        // u_n, index 0 is u_1
  bool empty_candidate = false;
};

// Weight profiles used throughout: all mass on one order.
std::vector<double> unigram_weights();
std::vector<double> trigram_weights();

// BLEU(s, s_hat): candidate s_hat against reference s.
ScoreReport bleu(const std::vector<std::string>& reference,
                 const std::vector<std::string>& candidate,
                 const std::vector<double>& weights);

// S-BLEU(s, s_hat_B, s_hat_E): Bob's recovery with Eve's counts subtracted.
ScoreReport sbleu(const std::vector<std::string>& reference,
                  const std::vector<std::string>& bob,
                  const std::vector<std::string>& eve,
                  const std::vector<double>& weights);

enum class Metric { bleu, sbleu };

struct SentenceTriple {
  std::vector<std::string> source;
  std::vector<std::string> bob;
  std::vector<std::string> eve;
};

// Arithmetic mean of sentence-level scores.
ScoreReport corpus_score(const std::vector<SentenceTriple>& triples,
                         const std::vector<double>& weights, Metric metric);

}  // namespace deepssc
