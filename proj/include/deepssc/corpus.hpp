// Text ingestion: normalization, the shared public vocabulary, fixed-length
// token sequences, and deterministic batch iteration.
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepssc/common.hpp"
#include "deepssc/rng.hpp"

namespace deepssc {

// Lowercases, strips punctuation, collapses whitespace.
std::string normalize_sentence(const std::string& raw);
std::vector<std::string> tokenize(const std::string& normalized);

class Vocabulary {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kStart = 1;
  static constexpr int32_t kEnd = 2;
  static constexpr int32_t kUnk = 3;
  static constexpr int32_t kSpecialCount = 4;

  // Keeps the max_vocab-4 most frequent tokens; frequency ties broken
  // lexicographically. Deterministic for a given input.
  static Vocabulary build(const std::vector<std::string>& sentences,
                          int64_t max_vocab);

  int64_t size() const { return static_cast<int64_t>(id_to_token_.size()); }
  int32_t id(const std::string& token) const;
  const std::string& token(int32_t id) const;
  bool contains(const std::string& token) const;
  static bool is_special(int32_t id) { return id < kSpecialCount; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenSequence {
  std::vector<int32_t> ids;  // fixed length L, padded with kPad
  int32_t length = 0;        // non-pad slots, start/end included
};

struct SentenceBatch {
  int64_t batch = 0;
  int64_t max_len = 0;
  std::vector<int32_t> ids;      // [batch, max_len] row-major
  std::vector<int32_t> lengths;  // [batch]

  int32_t id_at(int64_t b, int64_t t) const {
    return ids[static_cast<size_t>(b * max_len + t)];
  }
};

// Reads one sentence per line, normalizes, keeps word counts within
// [min_len, max_len]; order preserved.
std::vector<std::string> load_corpus(const std::string& path, int64_t min_len,
                                     int64_t max_len);

// [start, words (unknowns -> unk), end, pad...]; truncates to max_len-2 words.
TokenSequence encode_sentence(const std::string& text, const Vocabulary& vocab,
                              int64_t max_len);

// Inverse of encode for in-vocabulary text: specials stripped, words joined.
std::string decode_sentence(const TokenSequence& seq, const Vocabulary& vocab);
std::vector<std::string> sequence_words(const std::vector<int32_t>& ids,
                                        const Vocabulary& vocab);

SentenceBatch stack_batch(const std::vector<TokenSequence>& seqs);

// Shuffled fixed-size batches; reshuffles each epoch; drops the final partial
// batch. Single consumer.
class BatchStream {
 public:
  BatchStream(const std::vector<TokenSequence>* dataset, int64_t batch_size,
              uint64_t seed);

  SentenceBatch next();
  int64_t batches_per_epoch() const { return batches_per_epoch_; }

 private:
  void reshuffle();

  const std::vector<TokenSequence>* dataset_;
  int64_t batch_size_;
  int64_t batches_per_epoch_;
  int64_t cursor_ = 0;
  std::vector<int64_t> order_;
  Rng rng_;
};

// Deterministic grammar-generated stand-in corpus (46 distinct words).
std::vector<std::string> synthetic_corpus(int64_t count, int64_t min_words,
                                          int64_t max_words, Rng& rng);

}  // namespace deepssc
