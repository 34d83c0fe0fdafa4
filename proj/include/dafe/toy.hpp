#pragma once
// Synthetic ambiguity task for end-to-end experiments. The source language
// mixes unambiguous content tokens s0..s21 (translating to t0..t21 in every
// domain) with ambiguous tokens q0..q3 whose translation depends on the
// domain: a0..a3 out-of-domain, b0..b3 in-domain. Translation is word for
// word, so a model can only get the ambiguous positions right by knowing
// which domain it is decoding into — and the in-domain evidence is purely
// monolingual.
//
// Every sentence containing ambiguous index j also carries its signature
// content token (s_j source-side, hence t_j target-side). Monolingual text
// can then teach which in-domain sense goes with which context — b_j
// co-occurs with t_j — without ever seeing a source token, the same way
// topical context disambiguates senses in real corpora. Without the
// signatures the j-identity of the in-domain senses appears nowhere in the
// training signal and no model could do better than guessing among the b's.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "dafe/data.hpp"
#include "dafe/model.hpp"
#include "dafe/rng.hpp"

namespace dafe {

struct ToySpec {
  std::size_t content_pairs = 22;  // s_i -> t_i
  std::size_t ambiguous = 4;       // q_j -> a_j (out) / b_j (in)
  std::size_t n_train = 1200;      // out-of-domain parallel pairs
  std::size_t n_mono = 600;        // per-domain target monolingual sentences
  std::size_t n_dev = 120;         // in-domain parallel, model selection
  std::size_t n_test = 200;        // in-domain parallel, final scoring
  std::size_t min_len = 6;
  std::size_t max_len = 10;
  // Fraction of out-of-domain *parallel* pairs containing ambiguous tokens.
  // Domain-marked corpora (mono, dev, test) always carry 2-3 per sentence:
  // domain-specific senses are rare in generic parallel text but common in
  // domain text, and that asymmetry is what leaves room for adaptation to
  // matter. With fully dense ambiguity in the parallel data the out-domain
  // sense gets hammered into the shared parameters and no additive embedding
  // can flip it back; with no ambiguity at all the reverse model never learns
  // to emit q-tokens and back-translation collapses.
  double parallel_amb_prob = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (content_pairs < 1 || ambiguous < 1) {
      throw ConfigError("toy task needs at least one content pair and one "
                        "ambiguous token");
    }
    if (ambiguous > content_pairs) {
      throw ConfigError("each ambiguous index needs a signature content "
                        "token, so ambiguous <= content_pairs");
    }
    if (n_train < 1 || n_mono < 1 || n_dev < 1 || n_test < 1) {
      throw ConfigError("toy corpus sizes must be positive");
    }
    if (min_len < 2 || max_len < min_len) {
      throw ConfigError("toy sentence lengths must satisfy 2 <= min <= max");
    }
    if (parallel_amb_prob < 0.0 || parallel_amb_prob > 1.0) {
      throw ConfigError("parallel_amb_prob must lie in [0, 1]");
    }
  }

  // 4 reserved + s/t pairs + q + a + b
  std::size_t vocab_size() const {
    return 4 + 2 * content_pairs + 3 * ambiguous;
  }
};

struct ToyData {
  Vocabulary vocab;
  ParallelCorpus out_mt;       // X_out: out-of-domain parallel
  MonolingualCorpus in_mono;   // Y_in: in-domain target text
  MonolingualCorpus out_mono;  // Y_out: out-of-domain target text
  ParallelCorpus dev;          // in-domain, for early stopping / sweeps
  ParallelCorpus test;         // in-domain, held out
};

namespace detail {

inline std::string toy_token(const char* prefix, std::size_t i) {
  return std::string(prefix) + std::to_string(i);
}

}  // namespace detail

// Model sized for the toy task: big enough to learn it, small enough that a
// multi-thousand-round pipeline stays in CPU-minutes territory.
inline ModelConfig toy_model_config(const ToySpec& spec = ToySpec{}) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_size = 32;
  cfg.num_heads = 4;
  cfg.ff_size = 64;
  cfg.vocab_size = spec.vocab_size();
  cfg.max_len = 16;
  return cfg;
}

inline ToyData make_toy_task(const ToySpec& spec) {
  spec.validate();
  ToyData data;
  // fixed registration order keeps ids stable across runs
  for (std::size_t i = 0; i < spec.content_pairs; ++i) {
    data.vocab.add_token(detail::toy_token("s", i));
  }
  for (std::size_t j = 0; j < spec.ambiguous; ++j) {
    data.vocab.add_token(detail::toy_token("q", j));
  }
  for (std::size_t i = 0; i < spec.content_pairs; ++i) {
    data.vocab.add_token(detail::toy_token("t", i));
  }
  for (std::size_t j = 0; j < spec.ambiguous; ++j) {
    data.vocab.add_token(detail::toy_token("a", j));
  }
  for (std::size_t j = 0; j < spec.ambiguous; ++j) {
    data.vocab.add_token(detail::toy_token("b", j));
  }

  const int s0 = data.vocab.id_for(detail::toy_token("s", 0));
  const int q0 = data.vocab.id_for(detail::toy_token("q", 0));
  const int t0 = data.vocab.id_for(detail::toy_token("t", 0));
  const int a0 = data.vocab.id_for(detail::toy_token("a", 0));
  const int b0 = data.vocab.id_for(detail::toy_token("b", 0));

  // dense: 2-3 ambiguous tokens per sentence; otherwise only a
  // parallel_amb_prob share of sentences carry any, and then just 1-2
  auto source_sentence = [&](Rng& rng, bool dense) {
    std::uniform_int_distribution<std::size_t> len(spec.min_len, spec.max_len);
    std::uniform_int_distribution<int> n_amb_dense(2, 3);
    std::uniform_int_distribution<int> n_amb_sparse(1, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> content(
        0, static_cast<int>(spec.content_pairs) - 1);
    std::uniform_int_distribution<int> amb(
        0, static_cast<int>(spec.ambiguous) - 1);
    const std::size_t n = len(rng);
    // lay out slot kinds, then shuffle so ambiguous positions are uniform
    std::vector<int> is_amb(n, 0);
    const int k = dense    ? n_amb_dense(rng)
                  : unit(rng) < spec.parallel_amb_prob ? n_amb_sparse(rng)
                                                       : 0;
    for (int i = 0; i < k; ++i) is_amb[static_cast<std::size_t>(i)] = 1;
    std::shuffle(is_amb.begin(), is_amb.end(), rng);
    Sentence src(n);
    for (std::size_t i = 0; i < n; ++i) {
      src[i] = is_amb[i] ? q0 + amb(rng) : s0 + content(rng);
    }
    // plant the signature token of every ambiguous index on a content slot
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_amb[i]) slots.push_back(i);
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    std::size_t next = 0;
    std::vector<bool> planted(spec.ambiguous, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_amb[i]) continue;
      const std::size_t j = static_cast<std::size_t>(src[i] - q0);
      if (planted[j] || next >= slots.size()) continue;
      planted[j] = true;
      src[slots[next++]] = s0 + static_cast<int>(j);
    }
    return src;
  };
  auto map_target = [&](const Sentence& src, Domain d) {
    Sentence tgt(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] >= q0) {
        tgt[i] = (d == Domain::kOut ? a0 : b0) + (src[i] - q0);
      } else {
        tgt[i] = t0 + (src[i] - s0);
      }
    }
    return tgt;
  };
  auto parallel = [&](std::size_t n, Domain d, const char* label, bool dense) {
    ParallelCorpus c;
    c.domain = d;
    Rng rng = make_rng(spec.seed, std::string("toy.") + label);
    for (std::size_t i = 0; i < n; ++i) {
      c.src.push_back(source_sentence(rng, dense));
      c.tgt.push_back(map_target(c.src.back(), d));
    }
    return c;
  };
  auto mono = [&](std::size_t n, Domain d, const char* label) {
    MonolingualCorpus c;
    c.domain = d;
    Rng rng = make_rng(spec.seed, std::string("toy.") + label);
    for (std::size_t i = 0; i < n; ++i) {
      c.sentences.push_back(map_target(source_sentence(rng, true), d));
    }
    return c;
  };

  data.out_mt = parallel(spec.n_train, Domain::kOut, "train", false);
  data.in_mono = mono(spec.n_mono, Domain::kIn, "in_mono");
  data.out_mono = mono(spec.n_mono, Domain::kOut, "out_mono");
  data.dev = parallel(spec.n_dev, Domain::kIn, "dev", true);
  data.test = parallel(spec.n_test, Domain::kIn, "test", true);
  return data;
}

// Text-file form consumed by the CLI: parallel stems get .src/.tgt, mono
// corpora a single file each. Returns the directory actually written.
inline std::string write_toy_task(const ToyData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) { return dir + "/" + name; };
  auto dump = [&](const std::vector<Sentence>& ss, const std::string& file) {
    std::vector<std::string> lines;
    lines.reserve(ss.size());
    for (const Sentence& s : ss) lines.push_back(data.vocab.decode(s));
    write_lines(file, lines);
  };
  dump(data.out_mt.src, path("out_mt.src"));
  dump(data.out_mt.tgt, path("out_mt.tgt"));
  dump(data.in_mono.sentences, path("in_mono.txt"));
  dump(data.out_mono.sentences, path("out_mono.txt"));
  dump(data.dev.src, path("dev.src"));
  dump(data.dev.tgt, path("dev.tgt"));
  dump(data.test.src, path("test.src"));
  dump(data.test.tgt, path("test.tgt"));
  return dir;
}

}  // namespace dafe
