#pragma once
// Model scoring and the low-resource sweep harness. Scoring tokenization is
// the model's own word-level vocabulary, so numbers are comparable across
// runs of this codebase but not against externally published BLEU.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dafe/bleu.hpp"
#include "dafe/training.hpp"
#include "dafe/translate.hpp"

namespace dafe {

// Greedy-decodes every source with the given domain embedding and scores
// against the references. Sources longer than the positional range are
// truncated rather than rejected; references are never touched.
inline BleuReport evaluate_model(const ModelBundle& bundle,
                                 const ParallelCorpus& test, Domain domain,
                                 bool smoothed = false,
                                 std::size_t max_steps = 0) {
  const std::size_t n = test.size();
  const std::size_t cap =
      max_steps ? max_steps : bundle.model->config().max_len;
  std::vector<Sentence> hyps;
  hyps.reserve(n);
  for (const Sentence& src : test.src) {
    Sentence in = src;
    if (in.size() > bundle.model->config().max_len) {
      in.resize(bundle.model->config().max_len);
    }
    hyps.push_back(bundle.model->greedy_decode(in, domain, cap).tokens);
  }
  return bleu(hyps, test.tgt, smoothed);
}

// Keep floor(fraction * N) pairs, chosen by seeded shuffle but kept in their
// original corpus order. fraction == 1 therefore returns the corpus
// unchanged, which lets full-data sweep rows reproduce standalone runs
// bitwise.
inline ParallelCorpus subsample_parallel(const ParallelCorpus& corpus,
                                         double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("subsample fraction must lie in (0, 1], got " +
                      std::to_string(fraction));
  }
  const std::size_t n = corpus.size();
  const std::size_t keep =
      static_cast<std::size_t>(fraction * static_cast<double>(n));
  if (keep >= n) return corpus;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  ParallelCorpus out;
  out.domain = corpus.domain;
  out.provenance = corpus.provenance;
  for (std::size_t i : idx) {
    out.src.push_back(corpus.src[i]);
    out.tgt.push_back(corpus.tgt[i]);
  }
  return out;
}

struct SweepConfig {
  std::vector<double> fractions;
  std::vector<Strategy> strategies = {Strategy::kBack, Strategy::kDafe};
  bool smoothed = true;  // dev sets in sweeps are typically tiny
  std::size_t min_sentences = 10;

  void validate() const {
    if (fractions.empty()) throw ConfigError("sweep needs at least one fraction");
    for (double f : fractions) {
      if (!(f > 0.0) || f > 1.0) {
        throw ConfigError("sweep fractions must lie in (0, 1], got " +
                          std::to_string(f));
      }
    }
    if (strategies.empty()) {
      throw ConfigError("sweep needs at least one strategy");
    }
  }
};

struct SweepCell {
  double fraction = 0.0;
  Strategy strategy = Strategy::kBaseline;
  std::size_t pairs = 0;  // parallel pairs actually trained on
  BleuReport report;
};

struct SweepTable {
  std::vector<SweepCell> cells;     // fraction-major, strategy-minor
  std::vector<double> skipped;      // fractions below the sentence floor
};

// For each retained fraction, subsample the out-of-domain parallel corpus
// once and run every strategy on that same subsample; score each resulting
// model on the dev set with its in-domain embedding.
inline SweepTable low_resource_sweep(const PipelineInputs& inputs,
                                     const ModelConfig& mcfg,
                                     const TrainConfig& tcfg,
                                     const SweepConfig& scfg) {
  scfg.validate();
  if (!inputs.has_dev()) {
    throw ConfigError("the sweep scores dev BLEU and needs a dev corpus");
  }
  SweepTable table;
  const std::size_t n = inputs.out_mt.size();
  for (std::size_t fi = 0; fi < scfg.fractions.size(); ++fi) {
    const double f = scfg.fractions[fi];
    const std::size_t keep =
        static_cast<std::size_t>(f * static_cast<double>(n));
    if (keep < scfg.min_sentences) {
      std::fprintf(stderr,
                   "sweep: skipping fraction %g (%zu of %zu pairs is below "
                   "the floor of %zu)\n",
                   f, keep, n, scfg.min_sentences);
      table.skipped.push_back(f);
      continue;
    }
    PipelineInputs local = inputs;
    local.out_mt = subsample_parallel(
        inputs.out_mt, f, split_seed(tcfg.seed, "sweep.subsample", fi));
    for (Strategy s : scfg.strategies) {
      PipelineResult res = run_pipeline(s, local, mcfg, tcfg);
      SweepCell cell;
      cell.fraction = f;
      cell.strategy = s;
      cell.pairs = local.out_mt.size();
      cell.report =
          evaluate_model(*res.model, inputs.dev, Domain::kIn, scfg.smoothed);
      table.cells.push_back(cell);
    }
  }
  return table;
}

inline void write_sweep_tsv(const SweepTable& table, std::ostream& out) {
  out << "fraction\tstrategy\tpairs\tbleu\n";
  char buf[64];
  for (const SweepCell& c : table.cells) {
    std::snprintf(buf, sizeof(buf), "%.17g", c.fraction);
    out << buf << "\t" << strategy_name(c.strategy) << "\t" << c.pairs << "\t";
    std::snprintf(buf, sizeof(buf), "%.17g", c.report.bleu);
    out << buf << "\n";
  }
}

}  // namespace dafe
