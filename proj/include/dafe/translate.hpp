#pragma once

#include <map>
#include <string>
#include <vector>

#include "dafe/data.hpp"
#include "dafe/domains.hpp"
#include "dafe/errors.hpp"
#include "dafe/model.hpp"

namespace dafe {

inline std::vector<Sentence> translate_corpus(const TransformerModel& model,
                                              const std::vector<Sentence>& src,
                                              Domain domain,
                                              std::size_t max_steps) {
  std::vector<Sentence> out;
  out.reserve(src.size());
  for (const Sentence& s : src) {
    out.push_back(model.greedy_decode(s, domain, max_steps).tokens);
  }
  return out;
}

// Synthetic parallel data from a reverse (target->source) model: every mono
// sentence keeps its place as the target, its greedy decode becomes the
// source. Decoding always runs under the out-domain vector: that is the only
// (domain, task=MT) pair the reverse model ever saw supervised translation
// for. Its in-domain vector was shaped purely by denoising reconstruction,
// and decoding with it tends to echo the input instead of translating it.
// The gain of a DAFE-trained backward model lives in its encoder, which has
// met in-domain text through the LM steps. The corpus label stays the mono
// corpus's domain; only the decode-time embedding is pinned.
inline ParallelCorpus back_translate(const MonolingualCorpus& mono,
                                     const ModelBundle& reverse,
                                     std::size_t max_steps) {
  if (mono.sentences.empty()) throw DataError("back_translate: empty corpus");
  if (!reverse.trained) {
    throw ConfigError(
        "reverse model is not marked trained; refusing to back-translate "
        "(train it first or pass a trained checkpoint)");
  }
  ParallelCorpus out;
  out.domain = mono.domain;
  out.provenance = Provenance::kBackTranslated;
  const std::size_t cap = reverse.model->config().max_len;
  for (const Sentence& y : mono.sentences) {
    Sentence enc_in = y;
    if (enc_in.size() > cap) enc_in.resize(cap);
    Sentence x = reverse.model->greedy_decode(enc_in, Domain::kOut, max_steps)
                     .tokens;
    // keep cardinality: an immediate-EOS decode still yields a usable pair
    if (x.empty()) x.push_back(Vocabulary::kUnk);
    out.src.push_back(std::move(x));
    out.tgt.push_back(y);
  }
  return out;
}

// Decodes the same source once per requested domain vector, everything else
// held fixed. Ordered by Domain for stable side-by-side output.
inline std::map<Domain, Sentence> probe_swap(const TransformerModel& model,
                                             const Sentence& src,
                                             const std::vector<Domain>& domains,
                                             std::size_t max_steps) {
  std::map<Domain, Sentence> out;
  for (Domain d : domains) {
    if (model.table() != nullptr && !model.table()->has_domain(domain_name(d))) {
      throw LookupError(std::string("domain '") + domain_name(d) +
                        "' not registered in this model");
    }
    out[d] = model.greedy_decode(src, d, max_steps).tokens;
  }
  return out;
}

}  // namespace dafe
