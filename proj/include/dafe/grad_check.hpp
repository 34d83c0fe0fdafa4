#pragma once

#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "dafe/errors.hpp"
#include "dafe/parameter.hpp"
#include "dafe/rng.hpp"

namespace dafe {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

// Central-difference check of analytic gradients.
//
// run(with_grad) must rebuild the same deterministic forward pass and
// return the scalar loss; when with_grad is true it must also run
// backward so that gradients accumulate into the given parameters. The
// numeric path below never consults the backward pass, so it stays an
// independent oracle for it.
//
// Relative error per coordinate: |analytic - numeric| / max(1, |analytic|).
inline GradCheckReport grad_check(
    const std::function<double(bool)>& run,
    const std::vector<Parameter*>& params, double h,
    std::size_t max_coords_per_param = 8, std::uint64_t seed = 0) {
  if (h < 1e-6 || h > 1e-3) {
    throw ConfigError("grad_check: step size h must lie in [1e-6, 1e-3]");
  }
  const double l0 = run(false);
  const double l1 = run(false);
  std::uint64_t b0, b1;
  std::memcpy(&b0, &l0, sizeof(b0));
  std::memcpy(&b1, &l1, sizeof(b1));
  if (b0 != b1) {
    throw ReproducibilityError(
        "grad_check: loss not bit-identical across repeated evaluation");
  }

  for (Parameter* p : params) p->grad.fill(0.0);
  run(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad.values());

  Rng rng(split_seed(seed, "grad_check"));
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const std::size_t n = p.value.numel();
    std::vector<std::size_t> coords;
    if (n <= max_coords_per_param) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < max_coords_per_param; ++i) {
        coords.push_back(pick(rng));
      }
    }
    for (std::size_t c : coords) {
      const double orig = p.value[c];
      p.value[c] = orig + h;
      const double lp = run(false);
      p.value[c] = orig - h;
      const double lm = run(false);
      p.value[c] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi][c];
      const double rel =
          std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace dafe
