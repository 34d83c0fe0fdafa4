#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dafe/dafe.hpp"
#include "dafe/data.hpp"
#include "dafe/domains.hpp"
#include "dafe/errors.hpp"
#include "dafe/graph.hpp"
#include "dafe/parameter.hpp"
#include "dafe/rng.hpp"

namespace dafe {

struct ModelConfig {
  std::size_t num_layers = 2;    // encoder and decoder depth L
  std::size_t hidden_size = 64;  // d
  std::size_t num_heads = 4;
  std::size_t ff_size = 128;
  std::size_t vocab_size = 0;
  std::size_t max_len = 32;
  double dropout_rate = 0.0;

  void validate() const {
    if (num_layers < 1) throw ConfigError("model.num_layers must be >= 1");
    if (hidden_size < 1) throw ConfigError("model.hidden_size must be >= 1");
    if (num_heads < 1 || hidden_size % num_heads != 0) {
      throw ConfigError("model.hidden_size (" + std::to_string(hidden_size) +
                        ") must be divisible by model.num_heads (" +
                        std::to_string(num_heads) + ")");
    }
    if (ff_size < 1) throw ConfigError("model.ff_size must be >= 1");
    if (vocab_size < 5) {
      throw ConfigError("model.vocab_size must cover the reserved ids");
    }
    if (max_len < 2) throw ConfigError("model.max_len must be >= 2");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("model.dropout_rate must lie in [0,1)");
    }
  }

  // The original full-scale shape; kept for reference, far beyond what the
  // in-repo experiments run.
  static ModelConfig paper_scale() {
    ModelConfig c;
    c.num_layers = 4;
    c.hidden_size = 512;
    c.num_heads = 8;
    c.ff_size = 2048;
    c.max_len = 256;
    return c;
  }
};

// Sinusoidal positions: pe[p][2i] = sin(p / 10000^(2i/d)), pe[p][2i+1] the
// matching cos. max_len, when given, bounds seq_len.
inline Tensor positional_encoding(std::size_t seq_len, std::size_t d,
                                  std::size_t max_len = SIZE_MAX) {
  if (seq_len > max_len) {
    throw LengthError("sequence length " + std::to_string(seq_len) +
                      " exceeds max_len " + std::to_string(max_len));
  }
  Tensor pe({seq_len, d});
  for (std::size_t p = 0; p < seq_len; ++p) {
    for (std::size_t i = 0; 2 * i < d; ++i) {
      const double rate =
          std::pow(10000.0, (2.0 * static_cast<double>(i)) /
                                static_cast<double>(d));
      const double angle = static_cast<double>(p) / rate;
      pe.at(p, 2 * i) = std::sin(angle);
      if (2 * i + 1 < d) pe.at(p, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

// Composed per-layer encoder outputs for one sentence; hidden[l] is H^(l)
// after the additive domain/task vectors, l = 0..L.
struct EncoderState {
  std::vector<Var> hidden;
  std::vector<std::uint8_t> src_mask;  // 1 = real token, 0 = padding
  std::size_t seq_len = 0;
};

struct DecodeResult {
  Sentence tokens;        // without BOS/EOS
  bool truncated = false; // hit max_steps before EOS
};

// Pre-norm residual Transformer encoder-decoder over one sentence at a time.
// The encoder composes DAFE vectors into every layer output (including the
// embedding layer); the decoder is plain. All base parameters live in the
// shared store under ParamGroup::kBase.
class TransformerModel {
 public:
  TransformerModel(ParameterStore& store, const ModelConfig& cfg,
                   const FeatureEmbeddingTable* table, std::uint64_t init_seed)
      : store_(&store), cfg_(cfg), table_(table) {
    cfg_.validate();
    if (table_ != nullptr) {
      if (table_->dim() != cfg_.hidden_size ||
          table_->slots() != cfg_.num_layers + 1) {
        throw ConfigError("embedding table shape (" +
                          std::to_string(table_->slots()) + " slots x " +
                          std::to_string(table_->dim()) +
                          ") does not match model (L=" +
                          std::to_string(cfg_.num_layers) +
                          ", d=" + std::to_string(cfg_.hidden_size) + ")");
      }
    }
    init_parameters(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  const FeatureEmbeddingTable* table() const { return table_; }
  ParameterStore& store() const { return *store_; }

  EncoderState encode(Graph& g, const Sentence& src, Domain domain, Task task,
                      Rng* drop = nullptr) const {
    if (src.empty()) throw DataError("encode: empty source sentence");
    check_len(src.size());
    check_ids(src);
    const std::size_t n = src.size();

    EncoderState st;
    st.seq_len = n;
    st.src_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      st.src_mask[i] = src[i] == Vocabulary::kPad ? 0 : 1;
    }

    Var h = embed(g, src, drop);
    h = compose(g, h, domain, task, 0);
    st.hidden.push_back(h);

    BoolMat mask(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mask.at(i, j) = st.src_mask[j];
    }
    for (std::size_t l = 1; l <= cfg_.num_layers; ++l) {
      const std::string p = "enc.L" + std::to_string(l);
      Var x = h;
      Var nx = norm(g, x, p + ".ln1");
      Var a = g.add(x, maybe_drop(g, attention(g, nx, nx, nx, mask, p + ".attn"),
                                  drop));
      Var f = g.add(a, maybe_drop(g, ff(g, norm(g, a, p + ".ln2"), p + ".ff"),
                                  drop));
      h = compose(g, f, domain, task, l);
      st.hidden.push_back(h);
    }
    return st;
  }

  Var decode_logits(Graph& g, const EncoderState& enc, const Sentence& prefix,
                    Rng* drop = nullptr) const {
    if (prefix.empty()) throw DataError("decode_logits: empty target prefix");
    check_len(prefix.size());
    check_ids(prefix);
    const std::size_t t = prefix.size();
    const std::size_t s = enc.seq_len;

    BoolMat self_mask(t, t);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        self_mask.at(i, j) = prefix[j] == Vocabulary::kPad ? 0 : 1;
      }
    }
    // BOS at position 0 is never padding, so row 0 is never fully masked.
    BoolMat cross_mask(t, s);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < s; ++j) cross_mask.at(i, j) = enc.src_mask[j];
    }

    Var h = embed(g, prefix, drop);
    Var memory = enc.hidden.back();
    for (std::size_t l = 1; l <= cfg_.num_layers; ++l) {
      const std::string p = "dec.L" + std::to_string(l);
      Var x = h;
      Var nx = norm(g, x, p + ".ln1");
      Var a = g.add(
          x, maybe_drop(g, attention(g, nx, nx, nx, self_mask, p + ".self"),
                        drop));
      Var na = norm(g, a, p + ".ln2");
      Var c = g.add(
          a, maybe_drop(
                 g, attention(g, na, memory, memory, cross_mask, p + ".cross"),
                 drop));
      h = g.add(c, maybe_drop(g, ff(g, norm(g, c, p + ".ln3"), p + ".ff"),
                              drop));
    }
    Var hn = norm(g, h, "dec.final_ln");
    return g.affine(hn, g.leaf(p("out.w")), g.leaf(p("out.b")));
  }

  // Greedy argmax decoding with the MT task vector; lowest id wins ties.
  DecodeResult greedy_decode(const Sentence& src, Domain domain,
                             std::size_t max_steps) const {
    DecodeResult res;
    Sentence prefix = {Vocabulary::kBos};
    for (std::size_t step = 0; step < max_steps; ++step) {
      if (prefix.size() >= cfg_.max_len) break;
      Graph g;
      EncoderState enc = encode(g, src, domain, Task::kMt);
      Var logits = decode_logits(g, enc, prefix);
      const Tensor& lv = g.value(logits);
      const std::size_t last = prefix.size() - 1;
      int best = 0;
      double best_score = lv.at(last, 0);
      for (std::size_t v = 1; v < cfg_.vocab_size; ++v) {
        if (lv.at(last, v) > best_score) {
          best_score = lv.at(last, v);
          best = static_cast<int>(v);
        }
      }
      if (best == Vocabulary::kEos) return res;
      res.tokens.push_back(best);
      prefix.push_back(best);
    }
    res.truncated = true;
    return res;
  }

  // One attention block, exposed with its parameter prefix so tests can
  // exercise it with hand-set weights.
  Var attention(Graph& g, Var q_in, Var k_in, Var v_in, const BoolMat& mask,
                const std::string& pre) const {
    const std::size_t H = cfg_.num_heads;
    const std::size_t dh = cfg_.hidden_size / H;
    Var q = g.affine(q_in, g.leaf(p(pre + ".wq")), g.leaf(p(pre + ".bq")));
    Var k = g.affine(k_in, g.leaf(p(pre + ".wk")), g.leaf(p(pre + ".bk")));
    Var v = g.affine(v_in, g.leaf(p(pre + ".wv")), g.leaf(p(pre + ".bv")));
    std::vector<Var> heads;
    heads.reserve(H);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < H; ++h) {
      Var qh = g.slice_cols(q, h * dh, dh);
      Var kh = g.slice_cols(k, h * dh, dh);
      Var vh = g.slice_cols(v, h * dh, dh);
      Var scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
      Var probs = g.softmax_masked(scores, mask);
      heads.push_back(g.matmul(probs, vh));
    }
    Var ctx = heads.size() == 1 ? heads[0] : g.concat_cols(heads);
    return g.affine(ctx, g.leaf(p(pre + ".wo")), g.leaf(p(pre + ".bo")));
  }

  static constexpr double kLnEps = 1e-5;

 private:
  void check_len(std::size_t n) const {
    if (n > cfg_.max_len) {
      throw LengthError("sequence length " + std::to_string(n) +
                        " exceeds model max_len " +
                        std::to_string(cfg_.max_len));
    }
  }

  void check_ids(const Sentence& s) const {
    for (int id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
        throw DataError("token id " + std::to_string(id) +
                        " outside model vocabulary of size " +
                        std::to_string(cfg_.vocab_size));
      }
    }
  }

  Var embed(Graph& g, const Sentence& ids, Rng* drop) const {
    Var e = g.gather_rows(g.leaf(p("emb.tok")), ids);
    Var scaled = g.scale(e, std::sqrt(static_cast<double>(cfg_.hidden_size)));
    Var pos = g.constant(
        positional_encoding(ids.size(), cfg_.hidden_size, cfg_.max_len));
    return maybe_drop(g, g.add(scaled, pos), drop);
  }

  Var compose(Graph& g, Var h, Domain domain, Task task,
              std::size_t layer) const {
    if (table_ == nullptr) return h;
    return table_->compose(g, h, domain, task, layer);
  }

  Var norm(Graph& g, Var x, const std::string& pre) const {
    return g.layer_norm(x, g.leaf(p(pre + ".gain")), g.leaf(p(pre + ".bias")),
                        kLnEps);
  }

  Var ff(Graph& g, Var x, const std::string& pre) const {
    Var h1 = g.relu(g.affine(x, g.leaf(p(pre + ".w1")), g.leaf(p(pre + ".b1"))));
    return g.affine(h1, g.leaf(p(pre + ".w2")), g.leaf(p(pre + ".b2")));
  }

  Var maybe_drop(Graph& g, Var x, Rng* drop) const {
    if (drop == nullptr || cfg_.dropout_rate == 0.0) return x;
    return g.dropout(x, cfg_.dropout_rate, *drop);
  }

  Parameter& p(const std::string& id) const { return store_->require(id); }

  void init_parameters(std::uint64_t seed) {
    Rng rng = make_rng(seed, "model.init");
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_size));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto weight = [&](const std::string& id, std::size_t r, std::size_t c) {
      Tensor t({r, c});
      for (double& x : t.values()) x = u(rng);
      store_->create(id, ParamGroup::kBase, std::move(t));
    };
    auto bias = [&](const std::string& id, std::size_t n) {
      store_->create(id, ParamGroup::kBase, Tensor({n}));
    };
    auto ln = [&](const std::string& pre) {
      Tensor gain({cfg_.hidden_size});
      gain.fill(1.0);
      store_->create(pre + ".gain", ParamGroup::kBase, std::move(gain));
      store_->create(pre + ".bias", ParamGroup::kBase,
                     Tensor({cfg_.hidden_size}));
    };
    auto attn = [&](const std::string& pre) {
      for (const char* w : {"wq", "wk", "wv", "wo"}) {
        weight(pre + "." + w, cfg_.hidden_size, cfg_.hidden_size);
      }
      for (const char* b : {"bq", "bk", "bv", "bo"}) {
        bias(pre + "." + b, cfg_.hidden_size);
      }
    };
    auto ffp = [&](const std::string& pre) {
      weight(pre + ".w1", cfg_.hidden_size, cfg_.ff_size);
      bias(pre + ".b1", cfg_.ff_size);
      weight(pre + ".w2", cfg_.ff_size, cfg_.hidden_size);
      bias(pre + ".b2", cfg_.hidden_size);
    };

    weight("emb.tok", cfg_.vocab_size, cfg_.hidden_size);
    for (std::size_t l = 1; l <= cfg_.num_layers; ++l) {
      const std::string p = "enc.L" + std::to_string(l);
      ln(p + ".ln1");
      attn(p + ".attn");
      ln(p + ".ln2");
      ffp(p + ".ff");
    }
    for (std::size_t l = 1; l <= cfg_.num_layers; ++l) {
      const std::string p = "dec.L" + std::to_string(l);
      ln(p + ".ln1");
      attn(p + ".self");
      ln(p + ".ln2");
      attn(p + ".cross");
      ln(p + ".ln3");
      ffp(p + ".ff");
    }
    ln("dec.final_ln");
    weight("out.w", cfg_.hidden_size, cfg_.vocab_size);
    bias("out.b", cfg_.vocab_size);
  }

  ParameterStore* store_;
  ModelConfig cfg_;
  const FeatureEmbeddingTable* table_;
};

// Everything one run needs in a single ownership unit: parameters, optional
// DAFE table, network, vocabulary, and provenance flags. Members hold
// pointers into each other, so bundles live on the heap and never move.
struct ModelBundle {
  ParameterStore store;
  std::unique_ptr<FeatureEmbeddingTable> table;  // null -> plain multi-task net
  std::unique_ptr<TransformerModel> model;
  Vocabulary vocab;
  std::string direction = "forward";
  bool trained = false;

  ModelBundle() = default;
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  bool dafe_enabled() const { return table != nullptr; }
};

inline std::unique_ptr<ModelBundle> make_bundle(const ModelConfig& cfg,
                                                Vocabulary vocab,
                                                std::uint64_t init_seed,
                                                bool with_table = true,
                                                bool freeze_table = false) {
  auto b = std::make_unique<ModelBundle>();
  b->vocab = std::move(vocab);
  if (with_table) {
    b->table = std::make_unique<FeatureEmbeddingTable>(
        b->store, cfg.num_layers, cfg.hidden_size);
    b->table->register_defaults();
    if (freeze_table) b->table->freeze_all();
  }
  b->model = std::make_unique<TransformerModel>(b->store, cfg, b->table.get(),
                                                init_seed);
  return b;
}

}  // namespace dafe
