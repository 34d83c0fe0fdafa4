#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/rng.hpp"

namespace dafe {

// Hyperparameters of the denoising noise C(y): independent token drops
// followed by a bounded shuffle.
struct NoiseSpec {
  double p_drop = 0.1;
  std::size_t k = 3;  // max displacement of the shuffle
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
      throw ConfigError("noise.p_drop must lie in [0,1], got " +
                        std::to_string(p_drop));
    }
  }
};

// Pure in (tokens, spec): the RNG is seeded from spec.seed on every call.
//
// Drops each token with probability p_drop but always retains at least one
// (uniformly chosen if everything fell). Survivors are then reordered by
// sorting on jittered ranks i + U(0, k+1), which bounds every token's
// displacement from its survivor rank by k.
inline std::vector<int> corrupt(const std::vector<int>& tokens,
                                const NoiseSpec& spec) {
  if (tokens.empty()) throw DataError("corrupt: empty input sentence");
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> kept;
  kept.reserve(tokens.size());
  for (int tok : tokens) {
    if (unit(rng) >= spec.p_drop) kept.push_back(tok);
  }
  if (kept.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    kept.push_back(tokens[pick(rng)]);
  }

  std::uniform_real_distribution<double> jitter(
      0.0, static_cast<double>(spec.k) + 1.0);
  std::vector<std::pair<double, std::size_t>> keys(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    keys[i] = {static_cast<double>(i) + jitter(rng), i};
  }
  std::stable_sort(keys.begin(), keys.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<int> out(kept.size());
  for (std::size_t j = 0; j < keys.size(); ++j) out[j] = kept[keys[j].second];
  return out;
}

}  // namespace dafe
