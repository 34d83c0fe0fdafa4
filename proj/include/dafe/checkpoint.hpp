#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/model.hpp"
#include "dafe/parameter.hpp"

namespace dafe {

// Text checkpoints with hexfloat ("%a") values: round-trips are bit-exact
// and diffs stay line-oriented. A trailing FNV-1a checksum over the raw
// value bits guards against truncation or edits.

namespace detail {

inline std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw DataError("checkpoint: bad float '" + s + "' in " + where);
  }
  return v;
}

inline std::uint64_t fnv_update(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffull;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

inline void save_checkpoint(const ModelBundle& bundle,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  const ModelConfig& c = bundle.model->config();
  out << "dafe-checkpoint v1\n";
  out << "direction " << bundle.direction << "\n";
  out << "trained " << (bundle.trained ? 1 : 0) << "\n";
  out << "config num_layers " << c.num_layers << "\n";
  out << "config hidden_size " << c.hidden_size << "\n";
  out << "config num_heads " << c.num_heads << "\n";
  out << "config ff_size " << c.ff_size << "\n";
  out << "config vocab_size " << c.vocab_size << "\n";
  out << "config max_len " << c.max_len << "\n";
  out << "config dropout_rate " << detail::hexfloat(c.dropout_rate) << "\n";

  const std::vector<std::string> toks = bundle.vocab.content_tokens();
  out << "vocab " << toks.size() << "\n";
  for (const std::string& t : toks) out << t << "\n";

  out << "table " << (bundle.table ? 1 : 0) << "\n";
  if (bundle.table) {
    out << "frozen " << (bundle.table->frozen() ? 1 : 0) << "\n";
    out << "domains " << bundle.table->domains().size() << "\n";
    for (const auto& [name, group] : bundle.table->domains()) {
      out << name << " " << group_name(group) << "\n";
    }
    out << "tasks " << bundle.table->tasks().size() << "\n";
    for (const auto& [name, group] : bundle.table->tasks()) {
      out << name << " " << group_name(group) << "\n";
    }
  }

  std::uint64_t sum = 1469598103934665603ull;
  const auto params = bundle.store.all();
  out << "params " << params.size() << "\n";
  for (const Parameter* p : params) {
    out << "param " << p->id << " " << group_name(p->group) << " "
        << p->value.rank();
    for (std::size_t d : p->value.shape()) out << " " << d;
    out << "\n";
    const std::vector<double>& vals = p->value.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i) out << " ";
      out << detail::hexfloat(vals[i]);
      sum = detail::fnv_update(sum, vals[i]);
    }
    out << "\n";
  }
  char sumbuf[24];
  std::snprintf(sumbuf, sizeof(sumbuf), "%016llx",
                static_cast<unsigned long long>(sum));
  out << "checksum " << sumbuf << "\n";
  if (!out) throw DataError("write failure on '" + path + "'");
}

inline std::unique_ptr<ModelBundle> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) {
      throw DataError("checkpoint '" + path + "' ended early");
    }
    return line;
  };
  auto expect_kv = [&](const std::string& key) -> std::string {
    next_line();
    if (line.rfind(key + " ", 0) != 0) {
      throw DataError("checkpoint '" + path + "': expected '" + key +
                      "', got '" + line + "'");
    }
    return line.substr(key.size() + 1);
  };

  if (next_line() != "dafe-checkpoint v1") {
    throw DataError("'" + path + "' is not a dafe checkpoint");
  }
  const std::string direction = expect_kv("direction");
  const bool trained = expect_kv("trained") == "1";
  ModelConfig cfg;
  cfg.num_layers = std::stoul(expect_kv("config num_layers"));
  cfg.hidden_size = std::stoul(expect_kv("config hidden_size"));
  cfg.num_heads = std::stoul(expect_kv("config num_heads"));
  cfg.ff_size = std::stoul(expect_kv("config ff_size"));
  cfg.vocab_size = std::stoul(expect_kv("config vocab_size"));
  cfg.max_len = std::stoul(expect_kv("config max_len"));
  cfg.dropout_rate =
      detail::parse_hexfloat(expect_kv("config dropout_rate"), "config");

  const std::size_t vocab_count = std::stoul(expect_kv("vocab"));
  std::vector<std::string> toks(vocab_count);
  for (std::size_t i = 0; i < vocab_count; ++i) toks[i] = next_line();

  auto bundle = std::make_unique<ModelBundle>();
  bundle->vocab = Vocabulary::from_content_tokens(toks);
  bundle->direction = direction;
  bundle->trained = trained;

  const bool has_table = expect_kv("table") == "1";
  bool frozen = false;
  if (has_table) {
    frozen = expect_kv("frozen") == "1";
    bundle->table = std::make_unique<FeatureEmbeddingTable>(
        bundle->store, cfg.num_layers, cfg.hidden_size);
    const std::size_t nd = std::stoul(expect_kv("domains"));
    for (std::size_t i = 0; i < nd; ++i) {
      std::istringstream is(next_line());
      std::string name, group;
      if (!(is >> name >> group)) {
        throw DataError("checkpoint '" + path + "': bad domain line");
      }
      bundle->table->register_domain(name, group_from_name(group));
    }
    const std::size_t nt = std::stoul(expect_kv("tasks"));
    for (std::size_t i = 0; i < nt; ++i) {
      std::istringstream is(next_line());
      std::string name, group;
      if (!(is >> name >> group)) {
        throw DataError("checkpoint '" + path + "': bad task line");
      }
      bundle->table->register_task(name, group_from_name(group));
    }
  }
  bundle->model = std::make_unique<TransformerModel>(
      bundle->store, cfg, bundle->table.get(), /*init_seed=*/0);
  if (has_table && frozen) bundle->table->freeze_all();

  const std::size_t param_count = std::stoul(expect_kv("params"));
  if (param_count != bundle->store.size()) {
    throw DataError("checkpoint '" + path + "' holds " +
                    std::to_string(param_count) + " parameters, model needs " +
                    std::to_string(bundle->store.size()));
  }
  std::uint64_t sum = 1469598103934665603ull;
  for (std::size_t i = 0; i < param_count; ++i) {
    std::istringstream head(expect_kv("param"));
    std::string id, group;
    std::size_t rank = 0;
    if (!(head >> id >> group >> rank)) {
      throw DataError("checkpoint '" + path + "': bad param header");
    }
    std::vector<std::size_t> shape(rank);
    for (std::size_t d = 0; d < rank; ++d) {
      if (!(head >> shape[d])) {
        throw DataError("checkpoint '" + path + "': bad shape for " + id);
      }
    }
    Parameter& p = bundle->store.require(id);
    if (p.value.shape() != shape) {
      throw DataError("checkpoint '" + path + "': shape mismatch for " + id);
    }
    if (group_name(p.group) != group) {
      throw DataError("checkpoint '" + path + "': group mismatch for " + id);
    }
    std::istringstream vals(next_line());
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      std::string tok;
      if (!(vals >> tok)) {
        throw DataError("checkpoint '" + path + "': missing values for " + id);
      }
      p.value[k] = detail::parse_hexfloat(tok, id);
      sum = detail::fnv_update(sum, p.value[k]);
    }
  }
  char want[24];
  std::snprintf(want, sizeof(want), "%016llx",
                static_cast<unsigned long long>(sum));
  if (expect_kv("checksum") != want) {
    throw DataError("checkpoint '" + path + "' failed its value checksum");
  }
  return bundle;
}

}  // namespace dafe
