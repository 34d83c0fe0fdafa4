#pragma once
// Plain-text run configuration: one `section.key = value` per line, `#`
// comments, later assignments win. Command-line overrides are applied on top
// in the same syntax, so a config file plus its overrides is a complete,
// replayable record of an experiment.

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dafe/corruption.hpp"
#include "dafe/model.hpp"
#include "dafe/training.hpp"

namespace dafe {

struct RunConfig {
  ModelConfig model;
  NoiseSpec noise;
  TrainConfig train;
  // corpus-role -> path; recognized roles: out_mt_src, out_mt_tgt, in_mono,
  // out_mono, dev_src, dev_tgt, test_src, test_tgt
  std::map<std::string, std::string> data;
  std::map<std::string, std::string> eval;
  bool seed_set = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " needs a non-negative integer, "
                      "got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " needs an unsigned integer, "
                      "got '" + v + "'");
  }
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " needs a number, got '" + v +
                      "'");
  }
}

// "section.key value" or "section.key = value"
inline std::pair<std::string, std::string> split_assignment(
    const std::string& line) {
  const std::size_t eq = line.find('=');
  std::string key, value;
  if (eq != std::string::npos) {
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
  } else {
    const std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string::npos) {
      throw ConfigError("config line has no value: '" + line + "'");
    }
    key = trim(line.substr(0, sp));
    value = trim(line.substr(sp + 1));
  }
  if (key.empty() || value.empty()) {
    throw ConfigError("malformed config line: '" + line + "'");
  }
  return {key, value};
}

inline void apply_key(RunConfig& rc, const std::string& key,
                      const std::string& v) {
  ModelConfig& m = rc.model;
  TrainConfig& t = rc.train;
  if (key == "model.num_layers") m.num_layers = to_size(key, v);
  else if (key == "model.hidden_size") m.hidden_size = to_size(key, v);
  else if (key == "model.num_heads") m.num_heads = to_size(key, v);
  else if (key == "model.ff_size") m.ff_size = to_size(key, v);
  else if (key == "model.vocab_size") m.vocab_size = to_size(key, v);
  else if (key == "model.max_len") m.max_len = to_size(key, v);
  else if (key == "model.dropout_rate") m.dropout_rate = to_double(key, v);
  else if (key == "noise.p_drop") rc.noise.p_drop = to_double(key, v);
  else if (key == "noise.k") rc.noise.k = to_size(key, v);
  else if (key == "train.rounds") t.rounds = to_size(key, v);
  else if (key == "train.reverse_rounds") t.reverse_rounds = to_size(key, v);
  else if (key == "train.batch_size") t.batch_size = to_size(key, v);
  else if (key == "train.lr") t.adam.lr = to_double(key, v);
  else if (key == "train.beta1") t.adam.beta1 = to_double(key, v);
  else if (key == "train.beta2") t.adam.beta2 = to_double(key, v);
  else if (key == "train.eps") t.adam.eps = to_double(key, v);
  else if (key == "train.clip_norm") t.adam.clip_norm = to_double(key, v);
  else if (key == "train.mix_in_lm") t.mix_in_lm = to_size(key, v);
  else if (key == "train.mix_out_lm") t.mix_out_lm = to_size(key, v);
  else if (key == "train.mix_out_mt") t.mix_out_mt = to_size(key, v);
  else if (key == "train.mix_in_mt") t.mix_in_mt = to_size(key, v);
  else if (key == "train.eval_every") t.eval_every = to_size(key, v);
  else if (key == "train.patience") t.patience = to_size(key, v);
  else if (key == "train.ckpt_every") t.ckpt_every = to_size(key, v);
  else if (key == "train.decode_max_steps") t.decode_max_steps = to_size(key, v);
  else if (key == "train.seed") {
    t.seed = to_u64(key, v);
    rc.seed_set = true;
  } else if (key.rfind("data.", 0) == 0) {
    rc.data[key.substr(5)] = v;
  } else if (key.rfind("eval.", 0) == 0) {
    rc.eval[key.substr(5)] = v;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace detail

// Overrides use the same "key=value" syntax as file lines and always win.
// The seed must come from one of the two; there is no wall-clock fallback.
inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  RunConfig rc;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto [key, value] = detail::split_assignment(line);
    detail::apply_key(rc, key, value);
  }
  for (const std::string& ov : overrides) {
    const auto [key, value] = detail::split_assignment(ov);
    detail::apply_key(rc, key, value);
  }
  if (!rc.seed_set) {
    throw ConfigError("train.seed is required; set it in the config file or "
                      "with an override");
  }
  rc.noise.validate();
  rc.train.noise_p_drop = rc.noise.p_drop;
  rc.train.noise_k = rc.noise.k;
  for (const auto& [role, p] : rc.data) {
    if (!std::filesystem::exists(p)) {
      throw ConfigError("data." + role + " points at a missing file: " + p);
    }
  }
  return rc;
}

struct LoadedCorpora {
  Vocabulary vocab;
  PipelineInputs inputs;
  ParallelCorpus test;
  bool has_test = false;
};

// Builds the vocabulary from the training-side corpora only (parallel
// + monolingual); dev and test encode unseen words as <unk>.
inline LoadedCorpora load_corpora(RunConfig& rc) {
  auto role = [&](const char* r) -> const std::string* {
    auto it = rc.data.find(r);
    return it == rc.data.end() ? nullptr : &it->second;
  };
  const std::string* mt_src = role("out_mt_src");
  const std::string* mt_tgt = role("out_mt_tgt");
  if (!mt_src || !mt_tgt) {
    throw ConfigError("data.out_mt_src and data.out_mt_tgt are required");
  }
  std::vector<std::string> lines;
  for (const char* r : {"out_mt_src", "out_mt_tgt", "in_mono", "out_mono"}) {
    if (const std::string* p = role(r)) {
      for (std::string& l : read_lines(*p)) lines.push_back(std::move(l));
    }
  }
  LoadedCorpora out;
  const std::size_t cap = rc.model.vocab_size > 0
                              ? rc.model.vocab_size
                              : std::numeric_limits<std::size_t>::max();
  out.vocab = Vocabulary::build(lines, cap);
  rc.model.vocab_size = out.vocab.size();

  out.inputs.vocab = out.vocab;
  out.inputs.out_mt =
      load_parallel(*mt_src, *mt_tgt, out.vocab, Domain::kOut);
  if (const std::string* p = role("in_mono")) {
    out.inputs.in_mono = load_mono(*p, out.vocab, Domain::kIn);
  }
  if (const std::string* p = role("out_mono")) {
    out.inputs.out_mono = load_mono(*p, out.vocab, Domain::kOut);
  }
  if (role("dev_src") || role("dev_tgt")) {
    const std::string* ds = role("dev_src");
    const std::string* dt = role("dev_tgt");
    if (!ds || !dt) throw ConfigError("dev corpus needs both dev_src and dev_tgt");
    out.inputs.dev = load_parallel(*ds, *dt, out.vocab, Domain::kIn);
  }
  if (role("test_src") || role("test_tgt")) {
    const std::string* ts = role("test_src");
    const std::string* tt = role("test_tgt");
    if (!ts || !tt) {
      throw ConfigError("test corpus needs both test_src and test_tgt");
    }
    out.test = load_parallel(*ts, *tt, out.vocab, Domain::kIn);
    out.has_test = true;
  }
  rc.model.validate();
  return out;
}

}  // namespace dafe
