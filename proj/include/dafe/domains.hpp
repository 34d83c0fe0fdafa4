#pragma once

#include <string>

#include "dafe/errors.hpp"

namespace dafe {

// The two corpora the method distinguishes. Kept as an enum for the core
// workflow; the embedding table itself accepts arbitrary registered ids.
enum class Domain { kIn = 0, kOut = 1 };

enum class Task { kMt = 0, kLm = 1 };

inline const char* domain_name(Domain d) {
  return d == Domain::kIn ? "in" : "out";
}

inline Domain domain_from_name(const std::string& s) {
  if (s == "in") return Domain::kIn;
  if (s == "out") return Domain::kOut;
  throw ConfigError("unknown domain '" + s + "' (expected 'in' or 'out')");
}

inline const char* task_name(Task t) { return t == Task::kMt ? "mt" : "lm"; }

inline Task task_from_name(const std::string& s) {
  if (s == "mt") return Task::kMt;
  if (s == "lm") return Task::kLm;
  throw ConfigError("unknown task '" + s + "' (expected 'mt' or 'lm')");
}

}  // namespace dafe
