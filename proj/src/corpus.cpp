#include "deepssc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace deepssc {

namespace {

const char* kSpecialTokens[Vocabulary::kSpecialCount] = {"<pad>", "<start>",
                                                         "<end>", "<unk>"};

}  // namespace

std::string normalize_sentence(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char ch : raw) {
    if (std::isspace(ch)) {
      pending_space = true;
      continue;
    }
    if (ch < 0x80 && !std::isalnum(ch)) continue;  // strip ASCII punctuation
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& normalized) {
  std::vector<std::string> words;
  std::istringstream in(normalized);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<std::string> load_corpus(const std::string& path, int64_t min_len,
                                     int64_t max_len) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<std::string> sentences;
  std::string line;
  while (std::getline(in, line)) {
    const std::string norm = normalize_sentence(line);
    const auto words = tokenize(norm);
    const auto count = static_cast<int64_t>(words.size());
    if (count >= min_len && count <= max_len) sentences.push_back(norm);
  }
  if (sentences.empty())
    throw IoError("empty corpus: no sentences in [" + std::to_string(min_len) +
                  "," + std::to_string(max_len) + "] words from " + path);
  return sentences;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& sentences,
                             int64_t max_vocab) {
  if (max_vocab < kSpecialCount + 1)
    throw ConfigError("max_vocab must be at least 5");
  if (sentences.empty()) throw ConfigError("cannot build vocabulary from empty corpus");

  // std::map keeps iteration lexicographic, which settles frequency ties.
  std::map<std::string, int64_t> freq;
  for (const auto& s : sentences)
    for (const auto& w : tokenize(s)) ++freq[w];

  std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (int32_t i = 0; i < kSpecialCount; ++i) {
    v.id_to_token_.emplace_back(kSpecialTokens[i]);
    v.token_to_id_[kSpecialTokens[i]] = i;
  }
  const auto keep = static_cast<size_t>(max_vocab - kSpecialCount);
  for (size_t i = 0; i < items.size() && i < keep; ++i) {
    v.token_to_id_[items[i].first] = static_cast<int32_t>(v.id_to_token_.size());
    v.id_to_token_.push_back(items[i].first);
  }
  return v;
}

int32_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int32_t id) const {
  if (id < 0 || id >= size()) throw ContractError("token id out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (int32_t i = 0; i < size(); ++i)
    out << id_to_token_[static_cast<size_t>(i)] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed vocabulary line: " + line);
    const std::string token = line.substr(0, tab);
    const int32_t id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int32_t>(v.id_to_token_.size()))
      throw IoError("vocabulary ids must be dense and ordered: " + line);
    v.token_to_id_[token] = id;
    v.id_to_token_.push_back(token);
  }
  for (int32_t i = 0; i < kSpecialCount; ++i) {
    if (v.size() <= i || v.id_to_token_[static_cast<size_t>(i)] != kSpecialTokens[i])
      throw IoError("vocabulary file missing special tokens: " + path);
  }
  return v;
}

TokenSequence encode_sentence(const std::string& text, const Vocabulary& vocab,
                              int64_t max_len) {
  if (max_len < 3) throw ConfigError("sentence slots must allow start+word+end");
  auto words = tokenize(normalize_sentence(text));
  const auto keep = static_cast<size_t>(max_len - 2);
  if (words.size() > keep) words.resize(keep);

  TokenSequence seq;
  seq.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
  size_t pos = 0;
  seq.ids[pos++] = Vocabulary::kStart;
  for (const auto& w : words) seq.ids[pos++] = vocab.id(w);
  seq.ids[pos++] = Vocabulary::kEnd;
  seq.length = static_cast<int32_t>(pos);
  return seq;
}

std::string decode_sentence(const TokenSequence& seq, const Vocabulary& vocab) {
  const auto words = sequence_words(seq.ids, vocab);
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::vector<std::string> sequence_words(const std::vector<int32_t>& ids,
                                        const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int32_t id : ids) {
    if (Vocabulary::is_special(id)) continue;
    words.push_back(vocab.token(id));
  }
  return words;
}

SentenceBatch stack_batch(const std::vector<TokenSequence>& seqs) {
  if (seqs.empty()) throw ContractError("cannot stack an empty batch");
  SentenceBatch b;
  b.batch = static_cast<int64_t>(seqs.size());
  b.max_len = static_cast<int64_t>(seqs[0].ids.size());
  b.ids.reserve(static_cast<size_t>(b.batch * b.max_len));
  for (const auto& s : seqs) {
    if (static_cast<int64_t>(s.ids.size()) != b.max_len)
      throw ContractError("mixed sequence lengths in batch");
    b.ids.insert(b.ids.end(), s.ids.begin(), s.ids.end());
    b.lengths.push_back(s.length);
  }
  return b;
}

BatchStream::BatchStream(const std::vector<TokenSequence>* dataset,
                         int64_t batch_size, uint64_t seed)
    : dataset_(dataset), batch_size_(batch_size), rng_(seed) {
  const auto n = static_cast<int64_t>(dataset_->size());
  if (n < batch_size_)
    throw ConfigError("dataset size " + std::to_string(n) +
                      " is smaller than batch size " + std::to_string(batch_size_));
  batches_per_epoch_ = n / batch_size_;
  order_.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order_[static_cast<size_t>(i)] = i;
  reshuffle();
}

void BatchStream::reshuffle() {
  rng_.shuffle(order_);
  cursor_ = 0;
}

SentenceBatch BatchStream::next() {
  if (cursor_ + batch_size_ > batches_per_epoch_ * batch_size_) reshuffle();
  std::vector<TokenSequence> seqs;
  seqs.reserve(static_cast<size_t>(batch_size_));
  for (int64_t i = 0; i < batch_size_; ++i)
    seqs.push_back((*dataset_)[static_cast<size_t>(order_[static_cast<size_t>(cursor_ + i)])]);
  cursor_ += batch_size_;
  return stack_batch(seqs);
}

// ---------------------------------------------------------------------------
// Synthetic corpus.
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kDet = {"the", "a"};
const std::vector<std::string> kAdj = {"red",   "small", "old",  "happy",
                                       "quick", "quiet", "cold", "nice"};
const std::vector<std::string> kNoun = {"cat",  "dog",   "bird",  "fish",
                                        "man",  "woman", "child", "house",
                                        "tree", "river", "car",   "town"};
const std::vector<std::string> kVerb = {"sees",    "finds", "likes", "follows",
                                        "watches", "meets", "helps", "greets"};
const std::vector<std::string> kAdv = {"slowly", "quickly", "quietly",
                                       "gladly", "often",   "today"};
const std::vector<std::string> kPrep = {"in", "near", "by", "with"};
const std::vector<std::string> kTime = {"morning", "evening", "night", "noon"};

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[static_cast<size_t>(rng.below(pool.size()))];
}

void noun_phrase(std::vector<std::string>& words, Rng& rng, bool allow_adj) {
  words.push_back(pick(kDet, rng));
  if (allow_adj && rng.uniform() < 0.5) words.push_back(pick(kAdj, rng));
  words.push_back(pick(kNoun, rng));
}

std::string generate_sentence(Rng& rng) {
  std::vector<std::string> words;
  noun_phrase(words, rng, true);
  words.push_back(pick(kVerb, rng));
  noun_phrase(words, rng, true);
  if (rng.uniform() < 0.5) {
    words.push_back(pick(kPrep, rng));
    noun_phrase(words, rng, rng.uniform() < 0.5);
  }
  if (rng.uniform() < 0.4) words.push_back(pick(kAdv, rng));
  if (rng.uniform() < 0.3) {
    words.push_back("in");
    words.push_back("the");
    words.push_back(pick(kTime, rng));
  }
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> synthetic_corpus(int64_t count, int64_t min_words,
                                          int64_t max_words, Rng& rng) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  while (static_cast<int64_t>(out.size()) < count) {
    const std::string s = generate_sentence(rng);
    const auto words = static_cast<int64_t>(tokenize(s).size());
    if (words >= min_words && words <= max_words) out.push_back(s);
  }
  return out;
}

}  // namespace deepssc
