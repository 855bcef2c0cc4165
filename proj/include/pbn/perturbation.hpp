#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pbn/alias.hpp"
#include "pbn/errors.hpp"

namespace pbn {

// Grouped perturbation: nodes are perturbed k at a time with one alias draw
// over the 2^k flip patterns. One table serves every group; the last group
// of k' <= k nodes masks its draw, which preserves the per-node rate p.
struct perturbation_plan {
  std::uint32_t k = 0;        // group width after rebalancing
  std::uint32_t k_prime = 0;  // size of the last group
  std::uint32_t groups = 0;   // g = ceil(n'/k_max), then k = ceil(n'/g)
  std::uint64_t mask = 0;     // 2^k' - 1
  alias_table table;          // over the 2^k flip patterns

  static constexpr std::uint32_t kMaxWidth = 24;

  static perturbation_plan build(std::uint32_t n_kept, std::uint32_t k_max, double p) {
    if (n_kept < 1) throw model_error("perturbation plan needs at least one node");
    if (k_max < 1 || k_max > kMaxWidth)
      throw resource_error("perturbation group width must be in [1, 24]");

    perturbation_plan plan;
    plan.groups = (n_kept + k_max - 1) / k_max;
    plan.k = (n_kept + plan.groups - 1) / plan.groups;
    plan.k_prime = n_kept - plan.k * (plan.groups - 1);
    plan.mask = (1ULL << plan.k_prime) - 1;

    std::vector<double> probs(1ULL << plan.k);
    for (std::uint64_t c = 0; c < probs.size(); ++c) {
      const int ones = std::popcount(c);
      probs[c] = std::pow(p, ones) * std::pow(1.0 - p, static_cast<int>(plan.k) - ones);
    }
    plan.table = alias_table::build(probs);
    return plan;
  }
};

}  // namespace pbn
