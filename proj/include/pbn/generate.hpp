#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pbn/errors.hpp"
#include "pbn/model.hpp"
#include "pbn/rng.hpp"

namespace pbn {

struct generator_params {
  std::uint32_t n = 0;
  double target_density = 1.0;
  double leaf_pct = 0.0;            // fraction in [0, 1)
  std::uint32_t max_functions = 3;
  std::uint32_t max_parents = 5;
  std::uint64_t seed = 0;
  double perturbation_rate = 0.001;
};

// Random PBN with a prescribed leaf fraction and density. Determinism is part
// of the contract: equal parameters give structurally identical models.
//
// Construction: a random subset of round(leaf_pct*n) nodes is designated as
// leaves and the rest as the interest set. Kept nodes draw parents only from
// kept nodes; leaf i draws parents from kept nodes and later-designated
// leaves, so the designated set is exactly what leaf removal finds. Parent
// slots are distributed to hit the density target, then filled with random
// distinct parents and random truth tables.
inline model generate_random(const generator_params& gp) {
  if (gp.n < 2) throw model_error("generator needs n >= 2");
  if (gp.max_functions < 1 || gp.max_parents < 1)
    throw model_error("generator needs max_functions >= 1 and max_parents >= 1");
  if (!(gp.leaf_pct >= 0.0 && gp.leaf_pct < 1.0))
    throw model_error("leaf_pct must be in [0, 1)");
  if (!(gp.target_density > 0.0)) throw model_error("target density must be positive");
  if (!(gp.perturbation_rate > 0.0 && gp.perturbation_rate < 1.0))
    throw model_error("perturbation rate must be in (0,1)");
  if (gp.target_density >
      static_cast<double>(gp.max_parents) * static_cast<double>(gp.max_functions))
    throw resource_error("infeasible: target density exceeds max_parents * max_functions");

  xoshiro256 rng(gp.seed);
  const std::uint32_t n = gp.n;
  std::uint32_t leaves = static_cast<std::uint32_t>(std::llround(gp.leaf_pct * n));
  if (leaves > n - 1) leaves = n - 1;

  // Random designation: perm[0..leaves) are leaves, the rest is kept.
  std::vector<std::uint32_t> perm(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
  for (std::uint32_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);

  std::vector<std::int32_t> leaf_rank(n, -1);  // -1 for kept nodes
  for (std::uint32_t r = 0; r < leaves; ++r) leaf_rank[perm[r]] = static_cast<std::int32_t>(r);
  std::vector<std::uint32_t> kept;
  for (std::uint32_t v = 0; v < n; ++v)
    if (leaf_rank[v] < 0) kept.push_back(v);

  // Function counts: one per node plus extras from half the spare parent
  // budget, so average parent counts stay comfortably above 1.
  const std::uint64_t target_slots =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(gp.target_density * n)));
  const std::uint64_t extra_budget = target_slots > n ? target_slots - n : 0;
  std::uint64_t extra_functions =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(n) * (gp.max_functions - 1),
                              extra_budget / 2);

  std::vector<std::uint32_t> func_count(n, 1);
  {
    std::vector<std::uint32_t> eligible;
    if (gp.max_functions > 1)
      for (std::uint32_t v = 0; v < n; ++v) eligible.push_back(v);
    while (extra_functions > 0 && !eligible.empty()) {
      const std::size_t pick = rng.next_u64() % eligible.size();
      const std::uint32_t v = eligible[pick];
      if (++func_count[v] == gp.max_functions) {
        eligible[pick] = eligible.back();
        eligible.pop_back();
      }
      --extra_functions;
    }
  }

  // Parent pool size per node; leaf i may additionally read later leaves.
  auto pool_size = [&](std::uint32_t v) -> std::uint32_t {
    const std::uint32_t k = static_cast<std::uint32_t>(kept.size());
    if (leaf_rank[v] < 0) return k;
    return k + (leaves - 1 - static_cast<std::uint32_t>(leaf_rank[v]));
  };

  struct slot {
    std::uint32_t node;
    std::uint32_t cap;
    std::uint32_t phi = 0;
  };
  std::vector<slot> funcs;
  for (std::uint32_t v = 0; v < n; ++v) {
    const std::uint32_t cap =
        std::min({gp.max_parents, pool_size(v), boolean_function::kMaxParents});
    for (std::uint32_t j = 0; j < func_count[v]; ++j) funcs.push_back({v, cap});
  }

  std::uint64_t remaining = target_slots;
  if (remaining >= funcs.size()) {
    for (auto& f : funcs)
      if (f.cap > 0) {
        f.phi = 1;
        --remaining;
      }
  }
  {
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t j = 0; j < funcs.size(); ++j)
      if (funcs[j].phi < funcs[j].cap) eligible.push_back(j);
    while (remaining > 0 && !eligible.empty()) {
      const std::size_t pick = rng.next_u64() % eligible.size();
      const std::uint32_t j = eligible[pick];
      if (++funcs[j].phi == funcs[j].cap) {
        eligible[pick] = eligible.back();
        eligible.pop_back();
      }
      --remaining;
    }
  }
  const double realized_density =
      static_cast<double>(target_slots - remaining) / static_cast<double>(n);
  if (std::abs(realized_density - gp.target_density) > 0.15 * gp.target_density)
    throw resource_error("cannot realize target density " + std::to_string(gp.target_density) +
                         " under the parent caps (got " + std::to_string(realized_density) + ")");

  model m;
  m.perturbation_rate = gp.perturbation_rate;
  m.nodes.resize(n);
  for (std::uint32_t v = 0; v < n; ++v) m.nodes[v].name = "x" + std::to_string(v);

  std::vector<std::uint32_t> pool;
  for (const slot& f : funcs) {
    pool = kept;
    if (leaf_rank[f.node] >= 0) {
      for (std::uint32_t r = static_cast<std::uint32_t>(leaf_rank[f.node]) + 1; r < leaves; ++r)
        pool.push_back(perm[r]);
    }
    // Partial Fisher-Yates to pick phi distinct parents.
    for (std::uint32_t j = 0; j < f.phi; ++j) {
      const std::size_t pick = j + rng.next_u64() % (pool.size() - j);
      std::swap(pool[j], pool[pick]);
    }
    boolean_function bf;
    bf.parents.assign(pool.begin(), pool.begin() + f.phi);
    std::sort(bf.parents.begin(), bf.parents.end());
    bf.table = boolean_function::empty_table(f.phi);
    const std::uint64_t len = 1ULL << f.phi;
    for (std::uint64_t v = 0; v < len; ++v) bf.set_table_bit(v, rng.next_u64() & 1);
    m.nodes[f.node].functions.push_back(std::move(bf));
  }
  for (std::uint32_t v = 0; v < n; ++v) {
    node& nd = m.nodes[v];
    double sum = 0.0;
    nd.selection_probs.resize(nd.functions.size());
    for (double& c : nd.selection_probs) {
      c = 0.2 + 0.8 * rng.next_double();
      sum += c;
    }
    for (double& c : nd.selection_probs) c /= sum;
  }
  m.interest = kept;
  std::sort(m.interest.begin(), m.interest.end());

  validate(m);
  return m;
}

}  // namespace pbn
