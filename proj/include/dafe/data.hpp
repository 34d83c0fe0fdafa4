#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dafe/domains.hpp"
#include "dafe/errors.hpp"
#include "dafe/rng.hpp"

namespace dafe {

using Sentence = std::vector<int>;

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

// Whitespace-token vocabulary shared between source and target sides.
// Ids 0..3 are reserved; content tokens follow in frequency order with
// lexicographic tie-breaking, so ids are stable across runs.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add_token(t);
  }

  // Builds from pre-split lines; max_size caps the total size including the
  // four reserved ids.
  static Vocabulary build(const std::vector<std::string>& lines,
                          std::size_t max_size) {
    if (max_size < 4) {
      throw ConfigError("vocab max_size must be at least 4 (reserved ids)");
    }
    std::map<std::string, std::size_t> counts;  // ordered: ties resolve lexically
    for (const std::string& line : lines) {
      std::istringstream is(line);
      std::string tok;
      while (is >> tok) ++counts[tok];
    }
    if (counts.empty()) {
      throw DataError("build_vocab: no tokens in input stream");
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                            counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) {
                       return a.second > b.second;  // stable: lexical ties stand
                     });
    Vocabulary v;
    const std::size_t budget = max_size - 4;
    for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) {
      v.add_token(ranked[i].first);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  int id_for(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return ids_.find(token) != ids_.end();
  }

  const std::string& token_for(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw LookupError("token id " + std::to_string(id) +
                        " outside vocabulary of size " +
                        std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  Sentence encode(const std::string& line) const {
    Sentence out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(id_for(tok));
    return out;
  }

  std::string decode(const Sentence& ids, bool strip_reserved = false) const {
    std::string out;
    for (int id : ids) {
      if (strip_reserved && id < 4) continue;
      if (!out.empty()) out += ' ';
      out += token_for(id);
    }
    return out;
  }

  // Non-reserved tokens in id order, for checkpointing.
  std::vector<std::string> content_tokens() const {
    return std::vector<std::string>(tokens_.begin() + 4, tokens_.end());
  }

  // Rebuilds a vocabulary whose ids 4.. follow the given token order.
  static Vocabulary from_content_tokens(const std::vector<std::string>& toks) {
    Vocabulary v;
    for (const std::string& t : toks) v.add_token(t);
    return v;
  }

  void add_token(const std::string& token) {
    if (ids_.count(token)) {
      throw DataError("duplicate token '" + token + "' in vocabulary");
    }
    ids_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------
// Corpora
// ---------------------------------------------------------------------------

enum class Provenance { kNatural, kCopied, kBackTranslated };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kNatural: return "natural";
    case Provenance::kCopied: return "copied";
    case Provenance::kBackTranslated: return "back_translated";
  }
  return "natural";
}

struct MonolingualCorpus {
  std::vector<Sentence> sentences;
  Domain domain = Domain::kIn;

  std::size_t size() const { return sentences.size(); }
};

struct ParallelCorpus {
  std::vector<Sentence> src;
  std::vector<Sentence> tgt;
  Domain domain = Domain::kOut;
  Provenance provenance = Provenance::kNatural;

  std::size_t size() const {
    if (src.size() != tgt.size()) {
      throw DataError("parallel corpus misaligned: " +
                      std::to_string(src.size()) + " source vs " +
                      std::to_string(tgt.size()) + " target sentences");
    }
    return src.size();
  }
};

inline void check_ids_below(const std::vector<Sentence>& sents,
                            std::size_t vocab_size, const char* what) {
  for (const Sentence& s : sents) {
    for (int id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        throw DataError(std::string(what) + ": token id " + std::to_string(id) +
                        " outside vocabulary of size " +
                        std::to_string(vocab_size));
      }
    }
  }
}

// The copy baseline: target-side monolingual text becomes its own source.
inline ParallelCorpus copy_corpus(const MonolingualCorpus& mono) {
  if (mono.sentences.empty()) throw DataError("copy_corpus: empty corpus");
  ParallelCorpus out;
  out.src = mono.sentences;
  out.tgt = mono.sentences;
  out.domain = mono.domain;
  out.provenance = Provenance::kCopied;
  return out;
}

// ---------------------------------------------------------------------------
// Text file I/O (one sentence per line; parallel data as .src/.tgt pairs)
// ---------------------------------------------------------------------------

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline void write_lines(const std::string& path,
                        const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const std::string& l : lines) out << l << '\n';
}

inline MonolingualCorpus load_mono(const std::string& path,
                                   const Vocabulary& vocab, Domain domain) {
  MonolingualCorpus c;
  c.domain = domain;
  for (const std::string& line : read_lines(path)) {
    Sentence s = vocab.encode(line);
    if (!s.empty()) c.sentences.push_back(std::move(s));
  }
  if (c.sentences.empty()) {
    throw DataError("corpus '" + path + "' contains no sentences");
  }
  return c;
}

inline ParallelCorpus load_parallel(const std::string& src_path,
                                    const std::string& tgt_path,
                                    const Vocabulary& vocab, Domain domain) {
  std::vector<std::string> src_lines = read_lines(src_path);
  std::vector<std::string> tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw DataError("parallel files misaligned: '" + src_path + "' has " +
                    std::to_string(src_lines.size()) + " lines, '" + tgt_path +
                    "' has " + std::to_string(tgt_lines.size()));
  }
  ParallelCorpus c;
  c.domain = domain;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    Sentence s = vocab.encode(src_lines[i]);
    Sentence t = vocab.encode(tgt_lines[i]);
    if (s.empty() || t.empty()) continue;  // skip blank-aligned pairs
    c.src.push_back(std::move(s));
    c.tgt.push_back(std::move(t));
  }
  if (c.size() == 0) {
    throw DataError("parallel corpus '" + src_path + "' is empty");
  }
  return c;
}

inline void save_parallel(const ParallelCorpus& corpus,
                          const Vocabulary& vocab, const std::string& stem,
                          const std::string& generator_id = "") {
  std::vector<std::string> src_lines, tgt_lines;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    src_lines.push_back(vocab.decode(corpus.src[i]));
    tgt_lines.push_back(vocab.decode(corpus.tgt[i]));
  }
  write_lines(stem + ".src", src_lines);
  write_lines(stem + ".tgt", tgt_lines);
  // Sidecar records where synthetic data came from.
  std::ofstream meta(stem + ".meta");
  if (!meta) throw DataError("cannot open '" + stem + ".meta' for writing");
  meta << "provenance=" << provenance_name(corpus.provenance) << '\n'
       << "domain=" << domain_name(corpus.domain) << '\n';
  if (!generator_id.empty()) meta << "generator=" << generator_id << '\n';
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

// Padded sentence pairs. tgt_in rows are BOS-prefixed, tgt_out rows
// EOS-suffixed, so position j of tgt_out is the label for position j of
// tgt_in. Padding (id 0) appears only after the sentence end.
struct Batch {
  std::vector<Sentence> src;
  std::vector<Sentence> tgt_in;
  std::vector<Sentence> tgt_out;
  std::vector<std::size_t> src_len;  // true lengths, before padding
  std::vector<std::size_t> tgt_len;  // length of tgt_in == tgt_out rows

  std::size_t size() const { return src.size(); }
};

// Shuffles sentence order, buckets by target length to limit padding, and
// emits every pair exactly once. Over-length sentences are truncated and
// counted through `truncated` when given.
inline std::vector<Batch> make_batches(const ParallelCorpus& corpus,
                                       std::size_t batch_size,
                                       std::uint64_t seed,
                                       std::size_t max_len = 64,
                                       std::size_t* truncated = nullptr) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  const std::size_t n = corpus.size();
  if (n == 0) throw DataError("make_batches: empty corpus");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return corpus.tgt[a].size() < corpus.tgt[b].size();
                   });

  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    chunks.emplace_back(order.begin() + start, order.begin() + end);
  }
  std::shuffle(chunks.begin(), chunks.end(), rng);

  std::size_t clipped = 0;
  auto truncate = [&](Sentence s) {
    if (s.size() > max_len) {
      s.resize(max_len);
      ++clipped;
    }
    return s;
  };

  std::vector<Batch> batches;
  for (const auto& chunk : chunks) {
    Batch b;
    std::size_t max_src = 0, max_tgt = 0;
    for (std::size_t idx : chunk) {
      Sentence x = truncate(corpus.src[idx]);
      Sentence y = truncate(corpus.tgt[idx]);
      Sentence yin, yout;
      yin.push_back(Vocabulary::kBos);
      yin.insert(yin.end(), y.begin(), y.end());
      yout = y;
      yout.push_back(Vocabulary::kEos);
      max_src = std::max(max_src, x.size());
      max_tgt = std::max(max_tgt, yin.size());
      b.src_len.push_back(x.size());
      b.tgt_len.push_back(yin.size());
      b.src.push_back(std::move(x));
      b.tgt_in.push_back(std::move(yin));
      b.tgt_out.push_back(std::move(yout));
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      b.src[i].resize(max_src, Vocabulary::kPad);
      b.tgt_in[i].resize(max_tgt, Vocabulary::kPad);
      b.tgt_out[i].resize(max_tgt, Vocabulary::kPad);
    }
    batches.push_back(std::move(b));
  }
  if (truncated) *truncated = clipped;
  return batches;
}

}  // namespace dafe
