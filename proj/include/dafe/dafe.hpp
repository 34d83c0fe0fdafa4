#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dafe/domains.hpp"
#include "dafe/errors.hpp"
#include "dafe/graph.hpp"
#include "dafe/parameter.hpp"

namespace dafe {

inline ParamGroup domain_group(Domain d) {
  return d == Domain::kIn ? ParamGroup::kDomainIn : ParamGroup::kDomainOut;
}

inline ParamGroup task_group(Task t) {
  return t == Task::kMt ? ParamGroup::kTaskMt : ParamGroup::kTaskLm;
}

// Per-layer additive domain and task vectors, one d-sized vector per
// (id, layer) slot with layers 0..L (slot 0 sits on the embedding output).
// Vectors start at zero, which keeps an untrained model domain-neutral and
// makes the no-embedding ablation exact.
class FeatureEmbeddingTable {
 public:
  FeatureEmbeddingTable(ParameterStore& store, std::size_t enc_layers,
                        std::size_t d)
      : store_(&store), slots_(enc_layers + 1), d_(d) {}

  std::size_t slots() const { return slots_; }  // == L + 1
  std::size_t dim() const { return d_; }

  void register_domain(const std::string& name, ParamGroup group) {
    if (group != ParamGroup::kDomainIn && group != ParamGroup::kDomainOut) {
      throw ConfigError("domain '" + name + "' must gate with a domain group");
    }
    register_rows(domain_rows_, domain_order_, "domain", name, group);
  }

  void register_task(const std::string& name, ParamGroup group) {
    if (group != ParamGroup::kTaskMt && group != ParamGroup::kTaskLm) {
      throw ConfigError("task '" + name + "' must gate with a task group");
    }
    register_rows(task_rows_, task_order_, "task", name, group);
  }

  // The canonical setup every trainer uses.
  void register_defaults() {
    register_domain(domain_name(Domain::kIn), ParamGroup::kDomainIn);
    register_domain(domain_name(Domain::kOut), ParamGroup::kDomainOut);
    register_task(task_name(Task::kMt), ParamGroup::kTaskMt);
    register_task(task_name(Task::kLm), ParamGroup::kTaskLm);
  }

  bool has_domain(const std::string& name) const {
    return domain_rows_.count(name) != 0;
  }
  bool has_task(const std::string& name) const {
    return task_rows_.count(name) != 0;
  }

  Parameter& domain_vector(const std::string& name, std::size_t layer) const {
    return slot(domain_rows_, "domain", name, layer);
  }
  Parameter& task_vector(const std::string& name, std::size_t layer) const {
    return slot(task_rows_, "task", name, layer);
  }

  // Registration order, with the gating group of each entry (needed to
  // rebuild the table from a checkpoint header).
  const std::vector<std::pair<std::string, ParamGroup>>& domains() const {
    return domain_order_;
  }
  const std::vector<std::pair<std::string, ParamGroup>>& tasks() const {
    return task_order_;
  }

  // hidden_l + domain_vec[layer] + task_vec[layer], broadcast over positions.
  Var compose(Graph& g, Var base_out, const std::string& domain,
              const std::string& task, std::size_t layer) const {
    Var with_domain =
        g.add_rowvec(base_out, g.leaf(domain_vector(domain, layer)));
    return g.add_rowvec(with_domain, g.leaf(task_vector(task, layer)));
  }
  Var compose(Graph& g, Var base_out, Domain domain, Task task,
              std::size_t layer) const {
    return compose(g, base_out, domain_name(domain), task_name(task), layer);
  }

  // "w/o Embed" ablation: vectors stay frozen at their zero values, so the
  // network reduces to plain multi-task training.
  void freeze_all() {
    for (const auto& [name, group] : domain_order_) {
      for (std::size_t l = 0; l < slots_; ++l) {
        domain_vector(name, l).trainable = false;
      }
    }
    for (const auto& [name, group] : task_order_) {
      for (std::size_t l = 0; l < slots_; ++l) {
        task_vector(name, l).trainable = false;
      }
    }
  }

  bool frozen() const {
    for (const auto& [name, group] : domain_order_) {
      for (std::size_t l = 0; l < slots_; ++l) {
        if (domain_vector(name, l).trainable) return false;
      }
    }
    for (const auto& [name, group] : task_order_) {
      for (std::size_t l = 0; l < slots_; ++l) {
        if (task_vector(name, l).trainable) return false;
      }
    }
    return true;
  }

 private:
  using RowMap = std::map<std::string, std::vector<Parameter*>>;

  void register_rows(RowMap& rows,
                     std::vector<std::pair<std::string, ParamGroup>>& order,
                     const char* kind, const std::string& name,
                     ParamGroup group) {
    if (rows.count(name)) {
      throw LookupError(std::string(kind) + " '" + name +
                        "' already registered");
    }
    std::vector<Parameter*> layers(slots_);
    for (std::size_t l = 0; l < slots_; ++l) {
      const std::string id = "dafe." + std::string(kind) + "." + name + ".L" +
                             std::to_string(l);
      layers[l] = &store_->create(id, group, Tensor({d_}));
    }
    rows.emplace(name, std::move(layers));
    order.emplace_back(name, group);
  }

  Parameter& slot(const RowMap& rows, const char* kind, const std::string& name,
                  std::size_t layer) const {
    auto it = rows.find(name);
    if (it == rows.end()) {
      throw LookupError(std::string(kind) + " '" + name + "' not registered");
    }
    if (layer >= slots_) {
      throw LookupError(std::string(kind) + " layer " + std::to_string(layer) +
                        " out of range (table has layers 0.." +
                        std::to_string(slots_ - 1) + ")");
    }
    return *it->second[layer];
  }

  ParameterStore* store_;
  std::size_t slots_;
  std::size_t d_;
  RowMap domain_rows_;
  RowMap task_rows_;
  std::vector<std::pair<std::string, ParamGroup>> domain_order_;
  std::vector<std::pair<std::string, ParamGroup>> task_order_;
};

// Eq.-style active set: base plus the one domain and one task group the
// current step trains. The optimizer updates only these.
inline std::vector<Parameter*> active_parameters(ParameterStore& store,
                                                 Domain domain, Task task) {
  std::vector<Parameter*> out = store.group_members(ParamGroup::kBase);
  for (Parameter* p : store.group_members(domain_group(domain))) {
    out.push_back(p);
  }
  for (Parameter* p : store.group_members(task_group(task))) {
    out.push_back(p);
  }
  return out;
}

}  // namespace dafe
