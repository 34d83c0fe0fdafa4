#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/parameter.hpp"
#include "dafe/tensor.hpp"

namespace dafe {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global-norm cap over the active set; <=0 disables

  void validate() const {
    if (lr < 0.0) throw ConfigError("adam.lr must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ConfigError("adam betas must lie in [0,1)");
    }
    if (eps <= 0.0) throw ConfigError("adam.eps must be > 0");
  }
};

// Adaptive-moment updates restricted to the active parameter set. This is
// where partition gating lives: every step receives the groups picked by
// active_parameters(), touches only those values, and discards all other
// gradients afterwards. Moments are allocated lazily, so a parameter that
// was never active carries no optimizer state at all.
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return steps_; }

  void step(ParameterStore& store, const std::vector<Parameter*>& active) {
    ++steps_;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (Parameter* p : active) {
        if (!p->trainable) continue;
        for (double g : p->grad.values()) sq += g * g;
      }
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) {
        const double scale = cfg_.clip_norm / norm;
        for (Parameter* p : active) {
          if (!p->trainable) continue;
          for (double& g : p->grad.values()) g *= scale;
        }
      }
    }
    for (Parameter* p : active) {
      if (!p->trainable) continue;
      update(*p);
    }
    // Inactive groups may have collected gradients this step; the contract
    // is that their values never move, so those gradients die here.
    store.zero_grads();
  }

  bool has_state(const Parameter& p) const {
    return state_.find(p.id) != state_.end();
  }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
    std::size_t t = 0;  // per-parameter step count; advances only when active
  };

  void update(Parameter& p) {
    auto it = state_.find(p.id);
    if (it == state_.end()) {
      Moments mom;
      mom.m = Tensor(p.value.shape());
      mom.v = Tensor(p.value.shape());
      it = state_.emplace(p.id, std::move(mom)).first;
    }
    Moments& mom = it->second;
    ++mom.t;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(mom.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(mom.t));
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
      mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  AdamConfig cfg_;
  std::size_t steps_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace dafe
