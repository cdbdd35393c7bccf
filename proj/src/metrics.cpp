#include "deepssc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace deepssc {

NgramProfile ngram_counts(const std::vector<std::string>& tokens, int64_t n) {
  if (n < 1) throw ConfigError("n-gram order must be at least 1");
  NgramProfile p;
  p.n = n;
  const auto len = static_cast<int64_t>(tokens.size());
  for (int64_t k = 0; k + n <= len; ++k) {
    std::string key = tokens[static_cast<size_t>(k)];
    for (int64_t j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[static_cast<size_t>(k + j)];
    }
    ++p.counts[key];
  }
  return p;
}

std::vector<double> unigram_weights() { return {1.0}; }
std::vector<double> trigram_weights() { return {0.0, 0.0, 1.0}; }

namespace {

void check_weights(const std::vector<double>& weights) {
  if (weights.empty()) throw ConfigError("empty n-gram weight profile");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0) throw ConfigError("n-gram weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("n-gram weights must sum to 1");
}

double brevity_penalty(int64_t ref_len, int64_t cand_len) {
  return std::min(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len),
                  0.0);
}

// Shared scoring core; secure mode subtracts Eve's counts before clipping.
ScoreReport score_core(const std::vector<std::string>& reference,
                       const std::vector<std::string>& candidate,
                       const std::vector<std::string>* eve,
                       const std::vector<double>& weights) {
  check_weights(weights);
  if (reference.empty()) throw ContractError("reference sentence is empty");

  ScoreReport report;
  report.weights = weights;
  if (candidate.empty()) {
    report.empty_candidate = true;
    return report;
  }
  report.penalty = brevity_penalty(static_cast<int64_t>(reference.size()),
                                   static_cast<int64_t>(candidate.size()));

  double log_score = report.penalty;
  bool zero = false;
  for (size_t wi = 0; wi < weights.size(); ++wi) {
    const auto n = static_cast<int64_t>(wi + 1);
    const double u = weights[wi];
    const NgramProfile cand = ngram_counts(candidate, n);
    const NgramProfile ref = ngram_counts(reference, n);
    const NgramProfile eve_counts =
        eve ? ngram_counts(*eve, n) : NgramProfile{n, {}};

    int64_t matched = 0, total = 0;
    for (const auto& [key, count] : cand.counts) {
      total += count;
      int64_t avail = count;
      if (eve) {
        auto it = eve_counts.counts.find(key);
        const int64_t taken = it == eve_counts.counts.end() ? 0 : it->second;
        avail = std::max<int64_t>(count - taken, 0);
      }
      auto rt = ref.counts.find(key);
      const int64_t ref_count = rt == ref.counts.end() ? 0 : rt->second;
      matched += std::min(avail, ref_count);
    }
    const double f = total > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                               : 0.0;
    report.per_n[n] = f;
    if (u == 0.0) continue;
    if (f <= 0.0) {
      zero = true;
      continue;
    }
    log_score += u * std::log(f);
  }
  report.score = zero ? 0.0 : std::exp(log_score);
  return report;
}

}  // namespace

ScoreReport bleu(const std::vector<std::string>& reference,
                 const std::vector<std::string>& candidate,
                 const std::vector<double>& weights) {
  return score_core(reference, candidate, nullptr, weights);
}

ScoreReport sbleu(const std::vector<std::string>& reference,
                  const std::vector<std::string>& bob,
                  const std::vector<std::string>& eve,
                  const std::vector<double>& weights) {
  return score_core(reference, bob, &eve, weights);
}

ScoreReport corpus_score(const std::vector<SentenceTriple>& triples,
                         const std::vector<double>& weights, Metric metric) {
  if (triples.empty()) throw ContractError("corpus_score on empty input");
  ScoreReport agg;
  agg.weights = weights;
  for (const auto& t : triples) {
    const ScoreReport r = metric == Metric::bleu ? bleu(t.source, t.bob, weights)
                                                 : sbleu(t.source, t.bob, t.eve, weights);
    agg.score += r.score;
    agg.penalty += r.penalty;
    for (const auto& [n, f] : r.per_n) agg.per_n[n] += f;
  }
  const auto count = static_cast<double>(triples.size());
  agg.score /= count;
  agg.penalty /= count;
  for (auto& [n, f] : agg.per_n) f /= count;
  return agg;
}

}  // namespace deepssc
