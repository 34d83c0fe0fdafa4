#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/tensor.hpp"

namespace dafe {

// The five disjoint trainable groups. Every parameter carries exactly one
// tag, assigned at construction; a training step updates base plus one
// domain group plus one task group.
enum class ParamGroup { kBase, kDomainIn, kDomainOut, kTaskMt, kTaskLm };

inline const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBase: return "base";
    case ParamGroup::kDomainIn: return "domain_in";
    case ParamGroup::kDomainOut: return "domain_out";
    case ParamGroup::kTaskMt: return "task_mt";
    case ParamGroup::kTaskLm: return "task_lm";
  }
  return "?";
}

inline ParamGroup group_from_name(const std::string& s) {
  if (s == "base") return ParamGroup::kBase;
  if (s == "domain_in") return ParamGroup::kDomainIn;
  if (s == "domain_out") return ParamGroup::kDomainOut;
  if (s == "task_mt") return ParamGroup::kTaskMt;
  if (s == "task_lm") return ParamGroup::kTaskLm;
  throw LookupError("unknown parameter group '" + s + "'");
}

constexpr ParamGroup kAllGroups[] = {ParamGroup::kBase, ParamGroup::kDomainIn,
                                     ParamGroup::kDomainOut,
                                     ParamGroup::kTaskMt, ParamGroup::kTaskLm};

// A named trainable array. grad has the same shape as value and
// accumulates across forward/backward passes until the optimizer step
// zeroes it. A non-trainable parameter never has its grad written.
struct Parameter {
  std::string id;
  ParamGroup group;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter(std::string id_, ParamGroup group_, Tensor value_)
      : id(std::move(id_)),
        group(group_),
        value(std::move(value_)),
        grad(value.shape()) {}
};

// Owns all parameters of one model. Iteration order is registration
// order, which makes checksums and checkpoints deterministic.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& create(std::string id, ParamGroup group, Tensor init) {
    if (index_.count(id)) {
      throw LookupError("duplicate parameter id '" + id + "'");
    }
    params_.push_back(
        std::make_unique<Parameter>(std::move(id), group, std::move(init)));
    index_[params_.back()->id] = params_.size() - 1;
    return *params_.back();
  }

  Parameter* find(const std::string& id) {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter& require(const std::string& id) {
    Parameter* p = find(id);
    if (!p) throw LookupError("no parameter with id '" + id + "'");
    return *p;
  }

  std::size_t size() const { return params_.size(); }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<Parameter*> group_members(ParamGroup g) {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
      if (p->group == g) out.push_back(p.get());
    }
    return out;
  }

  std::size_t group_value_count(ParamGroup g) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (p->group == g) n += p->value.numel();
    }
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.fill(0.0);
  }

  // FNV-1a over the raw IEEE-754 bit patterns of every value in the
  // group, in registration order. Bitwise equality of stored values
  // implies equal checksums, which is what the partition tests assert.
  std::uint64_t value_checksum(ParamGroup g) const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params_) {
      if (p->group != g) continue;
      for (double x : p->value.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int byte = 0; byte < 8; ++byte) {
          h ^= (bits >> (8 * byte)) & 0xffull;
          h *= 1099511628211ull;
        }
      }
    }
    return h;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dafe
