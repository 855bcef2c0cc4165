#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pbn/model.hpp"

namespace pbn {

// The model after leaf removal, plus the bookkeeping needed to relate it
// back to the original node numbering.
struct reduced_model {
  model kept;                          // functions re-indexed to kept nodes
  std::vector<std::uint32_t> removed;  // original indices, in removal order
  std::vector<std::int32_t> index_map; // original index -> kept index, -1 if removed
  double leaf_no_perturb_prob = 1.0;   // t = (1-p)^removed.size()
  std::uint32_t original_n = 0;

  std::uint32_t kept_count() const { return kept.size(); }
};

// A leaf is a node that is not of interest and, after iteratively removing
// leaf children, has no children left. A self-loop counts as a child, so a
// node that reads itself is never a leaf. Returns the removed nodes in a
// valid removal order (each has no remaining children when removed).
inline std::vector<std::uint32_t> find_leaves(const model& m) {
  const std::uint32_t n = m.size();
  // Distinct parent lists per node; child_count[u] = number of distinct nodes
  // that read u (self-reads included).
  std::vector<std::vector<std::uint32_t>> parents_of(n);
  std::vector<std::uint32_t> child_count(n, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    std::vector<std::uint32_t> ps;
    for (const boolean_function& f : m.nodes[v].functions)
      ps.insert(ps.end(), f.parents.begin(), f.parents.end());
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    for (auto u : ps) ++child_count[u];
    parents_of[v] = std::move(ps);
  }

  const std::vector<bool> interest = m.interest_mask();
  std::vector<bool> alive(n, true);
  std::vector<std::uint32_t> worklist, removed;
  for (std::uint32_t v = 0; v < n; ++v)
    if (!interest[v] && child_count[v] == 0) worklist.push_back(v);
  // FIFO over the worklist keeps the removal order deterministic.
  for (std::size_t head = 0; head < worklist.size(); ++head) {
    const std::uint32_t v = worklist[head];
    alive[v] = false;
    removed.push_back(v);
    for (auto u : parents_of[v]) {
      if (!alive[u]) continue;
      if (--child_count[u] == 0 && !interest[u]) worklist.push_back(u);
    }
  }
  return removed;
}

inline reduced_model reduce(const model& m) {
  reduced_model rm;
  rm.original_n = m.size();
  rm.removed = find_leaves(m);

  std::vector<bool> is_removed(m.size(), false);
  for (auto v : rm.removed) is_removed[v] = true;

  rm.index_map.assign(m.size(), -1);
  std::vector<std::uint32_t> kept_orig;
  for (std::uint32_t v = 0; v < m.size(); ++v) {
    if (is_removed[v]) continue;
    rm.index_map[v] = static_cast<std::int32_t>(kept_orig.size());
    kept_orig.push_back(v);
  }

  rm.kept.perturbation_rate = m.perturbation_rate;
  rm.kept.nodes.reserve(kept_orig.size());
  for (auto v : kept_orig) {
    node nd = m.nodes[v];
    for (boolean_function& f : nd.functions)
      for (auto& pidx : f.parents) pidx = static_cast<std::uint32_t>(rm.index_map[pidx]);
    rm.kept.nodes.push_back(std::move(nd));
  }
  for (auto i : m.interest)
    if (rm.index_map[i] >= 0)
      rm.kept.interest.push_back(static_cast<std::uint32_t>(rm.index_map[i]));
  std::sort(rm.kept.interest.begin(), rm.kept.interest.end());

  rm.leaf_no_perturb_prob =
      std::pow(1.0 - m.perturbation_rate, static_cast<double>(rm.removed.size()));
  return rm;
}

// True means at least one leaf was perturbed this step; the step then leaves
// the kept nodes unchanged.
inline bool check_leaf_perturbation(double t, double u) { return u > t; }

}  // namespace pbn
