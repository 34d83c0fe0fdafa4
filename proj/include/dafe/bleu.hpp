#pragma once
// Corpus BLEU: clipped n-gram precisions up to 4-grams combined by geometric
// mean, times the exponential brevity penalty. Counts live in BleuStats so
// disjoint test shards can be scored independently and merged before the
// final ratio computations.

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dafe/data.hpp"
#include "dafe/errors.hpp"

namespace dafe {

inline constexpr std::size_t kBleuOrder = 4;

struct BleuStats {
  std::size_t matched[kBleuOrder] = {0, 0, 0, 0};
  std::size_t total[kBleuOrder] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  void add(const Sentence& hyp, const Sentence& ref) {
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
      if (hyp.size() < n) break;
      std::map<std::vector<int>, std::size_t> ref_counts;
      if (ref.size() >= n) {
        for (std::size_t i = 0; i + n <= ref.size(); ++i) {
          std::vector<int> g(ref.begin() + i, ref.begin() + i + n);
          ++ref_counts[g];
        }
      }
      std::map<std::vector<int>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
        std::vector<int> g(hyp.begin() + i, hyp.begin() + i + n);
        ++hyp_counts[g];
      }
      for (const auto& [g, c] : hyp_counts) {
        auto it = ref_counts.find(g);
        const std::size_t clip = it == ref_counts.end() ? 0 : it->second;
        matched[n - 1] += c < clip ? c : clip;
        total[n - 1] += c;
      }
    }
  }

  BleuStats& operator+=(const BleuStats& other) {
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
      matched[n] += other.matched[n];
      total[n] += other.total[n];
    }
    hyp_len += other.hyp_len;
    ref_len += other.ref_len;
    return *this;
  }
};

struct BleuReport {
  double bleu = 0.0;  // [0, 100]
  double precisions[kBleuOrder] = {0.0, 0.0, 0.0, 0.0};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  bool smoothed = false;
};

// Unsmoothed scoring collapses to 0 as soon as any order has no matches,
// which is the honest corpus-level answer but useless on tiny dev sets.
// The smoothed variant add-one-smooths orders 2..4 (never the unigram, so
// fully disjoint output still scores 0); an order with no slots at all
// contributes a vacuous 1.
inline BleuReport finalize_bleu(const BleuStats& s, bool smoothed = false) {
  BleuReport r;
  r.hyp_len = s.hyp_len;
  r.ref_len = s.ref_len;
  r.smoothed = smoothed;
  if (s.hyp_len == 0) return r;
  r.brevity_penalty =
      s.hyp_len >= s.ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(s.ref_len) /
                               static_cast<double>(s.hyp_len));
  bool zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    double p;
    if (smoothed && n > 0) {
      p = static_cast<double>(s.matched[n] + 1) /
          static_cast<double>(s.total[n] + 1);
    } else {
      p = s.total[n] == 0 ? 0.0
                          : static_cast<double>(s.matched[n]) /
                                static_cast<double>(s.total[n]);
    }
    r.precisions[n] = p;
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  if (!zero) {
    r.bleu = 100.0 * r.brevity_penalty *
             std::exp(log_sum / static_cast<double>(kBleuOrder));
  }
  return r;
}

inline BleuReport bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references,
                       bool smoothed = false) {
  if (hypotheses.size() != references.size()) {
    throw DataError("BLEU needs one hypothesis per reference, got " +
                    std::to_string(hypotheses.size()) + " vs " +
                    std::to_string(references.size()));
  }
  if (hypotheses.empty()) throw DataError("BLEU over an empty corpus");
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    stats.add(hypotheses[i], references[i]);
  }
  return finalize_bleu(stats, smoothed);
}

inline std::string format_report(const BleuReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "BLEU = %.2f  %.1f/%.1f/%.1f/%.1f  (BP = %.3f, hyp_len = %zu, "
                "ref_len = %zu%s)",
                r.bleu, 100.0 * r.precisions[0], 100.0 * r.precisions[1],
                100.0 * r.precisions[2], 100.0 * r.precisions[3],
                r.brevity_penalty, r.hyp_len, r.ref_len,
                r.smoothed ? ", smoothed" : "");
  return buf;
}

// One key=value line with full precision, for logs and scripted consumers.
inline std::string report_record(const BleuReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "bleu=%.17g bp=%.17g p1=%.17g p2=%.17g p3=%.17g p4=%.17g "
                "hyp_len=%zu ref_len=%zu smoothed=%d",
                r.bleu, r.brevity_penalty, r.precisions[0], r.precisions[1],
                r.precisions[2], r.precisions[3], r.hyp_len, r.ref_len,
                r.smoothed ? 1 : 0);
  return buf;
}

}  // namespace dafe
