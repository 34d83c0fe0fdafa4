#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dafe/checkpoint.hpp"
#include "dafe/corruption.hpp"
#include "dafe/dafe.hpp"
#include "dafe/data.hpp"
#include "dafe/errors.hpp"
#include "dafe/graph.hpp"
#include "dafe/model.hpp"
#include "dafe/optimizer.hpp"
#include "dafe/rng.hpp"
#include "dafe/translate.hpp"

namespace dafe {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct StepRecord {
  std::size_t round;  // 1-based
  std::string step;
  double loss;
};

// Collects per-step records and optionally mirrors them to a file. Only
// deterministic fields go to the file so same-seed reruns produce
// byte-identical logs; wall-clock timing is reported separately on stderr.
class MetricsLog {
 public:
  MetricsLog() = default;
  MetricsLog(MetricsLog&&) = default;
  MetricsLog& operator=(MetricsLog&&) = default;

  void open(const std::string& path) {
    out_.open(path);
    if (!out_) throw DataError("cannot open metrics log '" + path + "'");
  }

  void step(std::size_t round, const std::string& name, double loss) {
    records_.push_back({round, name, loss});
    if (out_.is_open()) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", loss);
      out_ << "round=" << round << " step=" << name << " loss=" << buf << "\n";
    }
  }

  const std::vector<StepRecord>& records() const { return records_; }

 private:
  std::vector<StepRecord> records_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Objective steps
// ---------------------------------------------------------------------------

// Per-token mean cross-entropy over a batch, one combined graph. Rows are
// trimmed back to their true lengths; padding never reaches the model here.
inline Var batch_loss(Graph& g, const TransformerModel& m, const Batch& batch,
                      Domain domain, Task task, Rng* drop = nullptr) {
  if (batch.size() == 0) throw DataError("batch_loss: empty batch");
  double total_tokens = 0.0;
  std::vector<Var> parts;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Sentence src(batch.src[i].begin(),
                 batch.src[i].begin() + static_cast<long>(batch.src_len[i]));
    Sentence tin(batch.tgt_in[i].begin(),
                 batch.tgt_in[i].begin() + static_cast<long>(batch.tgt_len[i]));
    std::vector<int> tout(
        batch.tgt_out[i].begin(),
        batch.tgt_out[i].begin() + static_cast<long>(batch.tgt_len[i]));
    EncoderState st = m.encode(g, src, domain, task, drop);
    Var logits = m.decode_logits(g, st, tin, drop);
    Var ce = g.cross_entropy(logits, tout, Vocabulary::kPad);
    const double count = static_cast<double>(batch.tgt_len[i]);
    parts.push_back(g.scale(ce, count));
    total_tokens += count;
  }
  Var sum = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) sum = g.add(sum, parts[i]);
  return g.scale(sum, 1.0 / total_tokens);
}

// Forward, backward, then update exactly active_parameters(domain, task).
inline double objective_step(ModelBundle& b, Adam& opt, const Batch& batch,
                             Domain domain, Task task, Rng* drop = nullptr) {
  Graph g;
  Var loss = batch_loss(g, *b.model, batch, domain, task, drop);
  const double value = g.value(loss)[0];
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + task_name(task) +
                         " loss at optimizer step " +
                         std::to_string(opt.steps() + 1));
  }
  g.backward(loss);
  opt.step(b.store, active_parameters(b.store, domain, task));
  return value;
}

inline double mt_step(ModelBundle& b, Adam& opt, const Batch& batch,
                      Domain domain, Rng* drop = nullptr) {
  return objective_step(b, opt, batch, domain, Task::kMt, drop);
}

inline double lm_step(ModelBundle& b, Adam& opt, const Batch& batch,
                      Domain domain, Rng* drop = nullptr) {
  return objective_step(b, opt, batch, domain, Task::kLm, drop);
}

// Forward-only per-token MT loss over a parallel corpus, in corpus order.
inline double dev_loss(const ModelBundle& b, const ParallelCorpus& dev,
                       Domain domain) {
  const std::size_t cap = b.model->config().max_len;
  double nll = 0.0, tokens = 0.0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    Sentence src = dev.src[i];
    Sentence y = dev.tgt[i];
    if (src.size() > cap) src.resize(cap);
    if (y.size() > cap - 1) y.resize(cap - 1);
    Sentence tin = {Vocabulary::kBos};
    tin.insert(tin.end(), y.begin(), y.end());
    std::vector<int> tout = y;
    tout.push_back(Vocabulary::kEos);
    Graph g;
    EncoderState st = b.model->encode(g, src, domain, Task::kMt);
    Var logits = b.model->decode_logits(g, st, tin);
    Var ce = g.cross_entropy(logits, tout, Vocabulary::kPad);
    nll += g.value(ce)[0] * static_cast<double>(tout.size());
    tokens += static_cast<double>(tout.size());
  }
  return nll / tokens;
}

// ---------------------------------------------------------------------------
// Deterministic batch streams
// ---------------------------------------------------------------------------

// Cycles epochs over a parallel corpus; every epoch reshuffles with a seed
// split from (root, label, epoch).
class ParallelCursor {
 public:
  ParallelCursor(const ParallelCorpus* corpus, std::size_t batch_size,
                 std::size_t cap, std::uint64_t root, std::string label)
      : corpus_(corpus), batch_size_(batch_size), cap_(cap), root_(root),
        label_(std::move(label)) {
    build();
  }

  const Batch& next() {
    if (idx_ == batches_.size()) {
      ++epoch_;
      build();
    }
    return batches_[idx_++];
  }

  std::size_t truncated() const { return truncated_; }

 private:
  void build() {
    std::size_t t = 0;
    batches_ = make_batches(*corpus_, batch_size_,
                            split_seed(root_, label_ + ".order", epoch_), cap_,
                            &t);
    truncated_ += t;
    idx_ = 0;
  }

  const ParallelCorpus* corpus_;
  std::size_t batch_size_, cap_;
  std::uint64_t root_;
  std::string label_;
  std::vector<Batch> batches_;
  std::size_t idx_ = 0, epoch_ = 0, truncated_ = 0;
};

// Turns monolingual text into (C(y), y) pairs, re-corrupting every epoch
// with per-sentence seeds split from (root, label, epoch * size + i).
class DenoisingCursor {
 public:
  DenoisingCursor(const MonolingualCorpus* mono, const NoiseSpec& noise,
                  std::size_t batch_size, std::size_t cap, std::uint64_t root,
                  std::string label)
      : mono_(mono), noise_(noise), batch_size_(batch_size), cap_(cap),
        root_(root), label_(std::move(label)) {
    build();
  }

  const Batch& next() {
    if (idx_ == batches_.size()) {
      ++epoch_;
      build();
    }
    return batches_[idx_++];
  }

 private:
  void build() {
    ParallelCorpus pairs;
    pairs.domain = mono_->domain;
    const std::size_t n = mono_->size();
    for (std::size_t i = 0; i < n; ++i) {
      NoiseSpec ns = noise_;
      ns.seed = split_seed(root_, label_ + ".noise", epoch_ * n + i);
      pairs.src.push_back(corrupt(mono_->sentences[i], ns));
      pairs.tgt.push_back(mono_->sentences[i]);
    }
    batches_ = make_batches(pairs, batch_size_,
                            split_seed(root_, label_ + ".order", epoch_), cap_);
    idx_ = 0;
  }

  const MonolingualCorpus* mono_;
  NoiseSpec noise_;
  std::size_t batch_size_, cap_;
  std::uint64_t root_;
  std::string label_;
  std::vector<Batch> batches_;
  std::size_t idx_ = 0, epoch_ = 0;
};

// ---------------------------------------------------------------------------
// The training loop
// ---------------------------------------------------------------------------

struct Corpora {
  const ParallelCorpus* out_mt = nullptr;      // (X_out, Y_out)
  const MonolingualCorpus* in_mono = nullptr;  // Y_in
  const MonolingualCorpus* out_mono = nullptr; // Y_out as monolingual text
  const ParallelCorpus* in_mt = nullptr;       // synthetic in-domain pairs
  const ParallelCorpus* dev = nullptr;         // early-stop dev set
};

struct TrainConfig {
  std::size_t rounds = 2000;
  std::size_t reverse_rounds = 0;  // pipelines: 0 means "same as rounds"
  std::size_t batch_size = 8;
  AdamConfig adam;
  double noise_p_drop = 0.1;
  std::size_t noise_k = 3;
  std::uint64_t seed = 0;
  std::size_t mix_in_lm = 1;   // batches per sub-step per round
  std::size_t mix_out_lm = 1;
  std::size_t mix_out_mt = 1;
  std::size_t mix_in_mt = 1;
  std::size_t eval_every = 50;
  std::size_t patience = 200;  // rounds without dev improvement; 0 disables
  std::size_t ckpt_every = 0;  // 0 disables periodic checkpoints
  std::string ckpt_stem;
  std::size_t decode_max_steps = 0;  // back-translation cap; 0 -> max_len

  void validate() const {
    if (rounds < 1) throw ConfigError("train.rounds must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (mix_in_lm < 1 || mix_out_lm < 1 || mix_out_mt < 1 || mix_in_mt < 1) {
      throw ConfigError("train.mix counts must all be >= 1");
    }
    if (patience > 0 && eval_every == 0) {
      throw ConfigError("train.eval_every must be >= 1 when patience is set");
    }
    adam.validate();
    NoiseSpec probe{noise_p_drop, noise_k, 0};
    probe.validate();
  }
};

struct RoundLosses {
  double in_lm = 0.0, out_lm = 0.0, out_mt = 0.0, in_mt = 0.0;
  bool has_in_mt = false;
};

struct TrainSummary {
  std::size_t rounds_run = 0;
  bool stopped_early = false;
  double best_dev_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_round = 0;
  double wall_seconds = 0.0;
};

enum class TrainMode { kMtOnly, kAlgorithm1 };

// Runs either the full three-step round-robin (In-LM, Out-LM, Out-MT, plus
// an optional synthetic In-MT step) or a plain MT loop for the data-centric
// baselines. One Trainer drives one bundle to completion.
class Trainer {
 public:
  Trainer(ModelBundle& bundle, const Corpora& corpora, const TrainConfig& cfg,
          TrainMode mode, MetricsLog* log = nullptr,
          std::string step_prefix = "")
      : bundle_(&bundle), corpora_(corpora), cfg_(cfg), mode_(mode),
        log_(log), prefix_(std::move(step_prefix)), opt_(cfg.adam),
        drop_rng_(make_rng(cfg.seed, "dropout")) {
    cfg_.validate();
    const std::size_t cap = bundle.model->config().max_len - 1;
    if (corpora_.out_mt == nullptr || corpora_.out_mt->size() == 0) {
      throw ConfigError("training requires a parallel corpus");
    }
    out_mt_ = std::make_unique<ParallelCursor>(corpora_.out_mt,
                                               cfg_.batch_size, cap, cfg_.seed,
                                               "out_mt");
    if (mode_ == TrainMode::kAlgorithm1) {
      if (corpora_.in_mono == nullptr || corpora_.in_mono->size() == 0 ||
          corpora_.out_mono == nullptr || corpora_.out_mono->size() == 0) {
        throw ConfigError(
            "the round-robin schedule requires in- and out-of-domain "
            "monolingual corpora");
      }
      NoiseSpec noise{cfg_.noise_p_drop, cfg_.noise_k, 0};
      in_lm_ = std::make_unique<DenoisingCursor>(
          corpora_.in_mono, noise, cfg_.batch_size, cap, cfg_.seed, "in_lm");
      out_lm_ = std::make_unique<DenoisingCursor>(
          corpora_.out_mono, noise, cfg_.batch_size, cap, cfg_.seed, "out_lm");
      if (corpora_.in_mt != nullptr) {
        if (corpora_.in_mt->size() == 0) {
          throw ConfigError("synthetic in-domain corpus is empty");
        }
        in_mt_ = std::make_unique<ParallelCursor>(
            corpora_.in_mt, cfg_.batch_size, cap, cfg_.seed, "in_mt");
      }
    }
  }

  // One scheduler round; r is 0-based, logs are 1-based.
  RoundLosses round(std::size_t r) {
    RoundLosses rl;
    Rng* drop = bundle_->model->config().dropout_rate > 0.0 ? &drop_rng_
                                                            : nullptr;
    if (mode_ == TrainMode::kAlgorithm1) {
      for (std::size_t i = 0; i < cfg_.mix_in_lm; ++i) {
        rl.in_lm = lm_step(*bundle_, opt_, in_lm_->next(), Domain::kIn, drop);
        log(r, "in_lm", rl.in_lm);
      }
      for (std::size_t i = 0; i < cfg_.mix_out_lm; ++i) {
        rl.out_lm =
            lm_step(*bundle_, opt_, out_lm_->next(), Domain::kOut, drop);
        log(r, "out_lm", rl.out_lm);
      }
    }
    for (std::size_t i = 0; i < cfg_.mix_out_mt; ++i) {
      rl.out_mt = mt_step(*bundle_, opt_, out_mt_->next(),
                          corpora_.out_mt->domain, drop);
      log(r, "out_mt", rl.out_mt);
    }
    if (in_mt_ != nullptr) {
      for (std::size_t i = 0; i < cfg_.mix_in_mt; ++i) {
        rl.in_mt = mt_step(*bundle_, opt_, in_mt_->next(),
                           corpora_.in_mt->domain, drop);
        log(r, "in_mt", rl.in_mt);
      }
      rl.has_in_mt = true;
    }
    return rl;
  }

  TrainSummary run() {
    const auto t0 = std::chrono::steady_clock::now();
    TrainSummary s;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_round = 0;
    const bool early = corpora_.dev != nullptr && corpora_.dev->size() > 0 &&
                       cfg_.patience > 0 && cfg_.eval_every > 0;
    for (std::size_t r = 0; r < cfg_.rounds; ++r) {
      round(r);
      s.rounds_run = r + 1;
      if (cfg_.ckpt_every > 0 && !cfg_.ckpt_stem.empty() &&
          (r + 1) % cfg_.ckpt_every == 0) {
        bundle_->trained = true;
        save_checkpoint(*bundle_, cfg_.ckpt_stem + ".round" +
                                      std::to_string(r + 1) + ".ckpt");
      }
      if (early && (r + 1) % cfg_.eval_every == 0) {
        const double dl = dev_loss(*bundle_, *corpora_.dev, Domain::kIn);
        log(r, "dev", dl);
        if (dl < best - 1e-9) {
          best = dl;
          best_round = r + 1;
        } else if ((r + 1) - best_round >= cfg_.patience) {
          s.stopped_early = true;
          break;
        }
      }
    }
    if (best < std::numeric_limits<double>::infinity()) {
      s.best_dev_loss = best;
      s.best_round = best_round;
    }
    bundle_->trained = true;
    s.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return s;
  }

  Adam& optimizer() { return opt_; }

 private:
  void log(std::size_t r, const char* name, double loss) {
    if (log_ != nullptr) log_->step(r + 1, prefix_ + name, loss);
  }

  ModelBundle* bundle_;
  Corpora corpora_;
  TrainConfig cfg_;
  TrainMode mode_;
  MetricsLog* log_;
  std::string prefix_;
  Adam opt_;
  Rng drop_rng_;
  std::unique_ptr<ParallelCursor> out_mt_, in_mt_;
  std::unique_ptr<DenoisingCursor> in_lm_, out_lm_;
};

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

enum class Strategy {
  kBaseline,
  kCopy,
  kBack,
  kDafeWoEmbed,
  kDafe,
  kBackPlusDafe,
  kBackDafe,
  kBackDafePlusDafe,
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBaseline: return "baseline";
    case Strategy::kCopy: return "copy";
    case Strategy::kBack: return "back";
    case Strategy::kDafeWoEmbed: return "dafe_wo_embed";
    case Strategy::kDafe: return "dafe";
    case Strategy::kBackPlusDafe: return "back_plus_dafe";
    case Strategy::kBackDafe: return "back_dafe";
    case Strategy::kBackDafePlusDafe: return "back_dafe_plus_dafe";
  }
  return "baseline";
}

inline Strategy strategy_from_name(const std::string& s) {
  for (Strategy k :
       {Strategy::kBaseline, Strategy::kCopy, Strategy::kBack,
        Strategy::kDafeWoEmbed, Strategy::kDafe, Strategy::kBackPlusDafe,
        Strategy::kBackDafe, Strategy::kBackDafePlusDafe}) {
    if (s == strategy_name(k)) return k;
  }
  throw ConfigError("unknown strategy '" + s +
                    "' (expected baseline|copy|back|dafe_wo_embed|dafe|"
                    "back_plus_dafe|back_dafe|back_dafe_plus_dafe)");
}

inline ParallelCorpus swap_sides(const ParallelCorpus& c) {
  ParallelCorpus out;
  out.src = c.tgt;
  out.tgt = c.src;
  out.domain = c.domain;
  out.provenance = c.provenance;
  return out;
}

inline ParallelCorpus merge_parallel(const ParallelCorpus& a,
                                     const ParallelCorpus& b) {
  ParallelCorpus out;
  out.src = a.src;
  out.src.insert(out.src.end(), b.src.begin(), b.src.end());
  out.tgt = a.tgt;
  out.tgt.insert(out.tgt.end(), b.tgt.begin(), b.tgt.end());
  out.domain = a.domain;
  out.provenance = a.provenance == b.provenance ? a.provenance
                                                : Provenance::kNatural;
  return out;
}

struct PipelineInputs {
  Vocabulary vocab;
  ParallelCorpus out_mt;
  MonolingualCorpus in_mono;
  MonolingualCorpus out_mono;
  ParallelCorpus dev;  // leave empty to disable early stopping

  bool has_dev() const { return !dev.src.empty(); }
};

struct PipelineResult {
  std::unique_ptr<ModelBundle> model;
  std::unique_ptr<ModelBundle> reverse;  // set when the strategy trains one
  ParallelCorpus synthetic;
  bool has_synthetic = false;
  MetricsLog metrics;
  TrainSummary summary;
  TrainSummary reverse_summary;
};

// Table 1's eight settings, end to end. Everything derives from cfg.seed:
// reruns with identical inputs reproduce models and metrics bit for bit.
inline PipelineResult run_pipeline(Strategy strategy,
                                   const PipelineInputs& inputs,
                                   const ModelConfig& mcfg,
                                   const TrainConfig& cfg,
                                   const std::string& metrics_path = "") {
  cfg.validate();
  mcfg.validate();
  PipelineResult res;
  if (!metrics_path.empty()) res.metrics.open(metrics_path);

  const std::uint64_t fwd_init = split_seed(cfg.seed, "init.forward");
  const std::uint64_t rev_init = split_seed(cfg.seed, "init.reverse");
  TrainConfig fwd_cfg = cfg;
  fwd_cfg.seed = split_seed(cfg.seed, "train.forward");
  TrainConfig rev_cfg = cfg;
  rev_cfg.seed = split_seed(cfg.seed, "train.reverse");
  rev_cfg.rounds = cfg.reverse_rounds > 0 ? cfg.reverse_rounds : cfg.rounds;
  rev_cfg.patience = 0;  // reverse models run their fixed budget
  rev_cfg.ckpt_every = 0;

  const ParallelCorpus* dev = inputs.has_dev() ? &inputs.dev : nullptr;
  const std::size_t decode_cap =
      cfg.decode_max_steps > 0 ? cfg.decode_max_steps : mcfg.max_len;

  auto train_reverse_and_synthesize = [&](bool with_dafe) {
    res.reverse = make_bundle(mcfg, inputs.vocab, rev_init, with_dafe);
    res.reverse->direction = "reverse";
    ParallelCorpus swapped = swap_sides(inputs.out_mt);
    Corpora c;
    c.out_mt = &swapped;
    if (with_dafe) {
      c.in_mono = &inputs.in_mono;
      c.out_mono = &inputs.out_mono;
    }
    Trainer t(*res.reverse, c, rev_cfg,
              with_dafe ? TrainMode::kAlgorithm1 : TrainMode::kMtOnly,
              &res.metrics, "reverse.");
    res.reverse_summary = t.run();
    res.synthetic = back_translate(inputs.in_mono, *res.reverse, decode_cap);
    res.has_synthetic = true;
  };

  auto train_forward_plain = [&](const ParallelCorpus& corpus) {
    res.model = make_bundle(mcfg, inputs.vocab, fwd_init, false);
    Corpora c;
    c.out_mt = &corpus;
    c.dev = dev;
    Trainer t(*res.model, c, fwd_cfg, TrainMode::kMtOnly, &res.metrics);
    res.summary = t.run();
  };

  auto train_forward_dafe = [&](bool frozen, const ParallelCorpus* in_mt) {
    res.model = make_bundle(mcfg, inputs.vocab, fwd_init, true, frozen);
    Corpora c;
    c.out_mt = &inputs.out_mt;
    c.in_mono = &inputs.in_mono;
    c.out_mono = &inputs.out_mono;
    c.in_mt = in_mt;
    c.dev = dev;
    Trainer t(*res.model, c, fwd_cfg, TrainMode::kAlgorithm1, &res.metrics);
    res.summary = t.run();
  };

  switch (strategy) {
    case Strategy::kBaseline: {
      train_forward_plain(inputs.out_mt);
      break;
    }
    case Strategy::kCopy: {
      ParallelCorpus merged =
          merge_parallel(inputs.out_mt, copy_corpus(inputs.in_mono));
      train_forward_plain(merged);
      break;
    }
    case Strategy::kBack: {
      train_reverse_and_synthesize(false);
      ParallelCorpus merged = merge_parallel(inputs.out_mt, res.synthetic);
      train_forward_plain(merged);
      break;
    }
    case Strategy::kDafeWoEmbed: {
      train_forward_dafe(true, nullptr);
      break;
    }
    case Strategy::kDafe: {
      train_forward_dafe(false, nullptr);
      break;
    }
    case Strategy::kBackPlusDafe: {
      train_reverse_and_synthesize(false);
      train_forward_dafe(false, &res.synthetic);
      break;
    }
    case Strategy::kBackDafe: {
      train_reverse_and_synthesize(true);
      ParallelCorpus merged = merge_parallel(inputs.out_mt, res.synthetic);
      train_forward_plain(merged);
      break;
    }
    case Strategy::kBackDafePlusDafe: {
      train_reverse_and_synthesize(true);
      train_forward_dafe(false, &res.synthetic);
      break;
    }
  }
  return res;
}

}  // namespace dafe
