#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pbn/alias.hpp"
#include "pbn/errors.hpp"
#include "pbn/model.hpp"
#include "pbn/reduction.hpp"

namespace pbn {

// One entry per valuation of the group's parent union; entry v packs the
// outputs of all members (member 0 = least-significant bit).
struct combined_function {
  std::vector<std::uint32_t> parents;   // group parent union, ascending node index
  std::vector<std::uint64_t> outputs;   // 2^parents.size() packed member outputs
  double selection_prob = 1.0;
};

struct node_group {
  std::vector<std::uint32_t> members;   // node indices in the reduced model
  std::vector<combined_function> functions;
  std::optional<alias_table> alias;     // absent when only one combined function
};

struct grouping_plan {
  std::vector<node_group> groups;       // multi-function groups first
  std::vector<std::uint32_t> cum;       // cum[i] = nodes in groups 0..i-1

  std::uint32_t group_count() const { return static_cast<std::uint32_t>(groups.size()); }
};

// Per-group cap on materialized truth-table entries (combined-function count
// times 2^|parent union|). Groups whose tables would not fit trigger another
// round of the partition loop with one more group.
inline constexpr std::uint64_t kMaxGroupTableEntries = 1ULL << 22;

// Cap on the total materialized entries across all multi-function groups;
// theta alone bounds combined-function counts, not table widths.
inline constexpr std::uint64_t kMaxTotalTableEntries = 1ULL << 24;

// Smallest m with m * (product of weights)^(1/m) <= theta, evaluated in
// log space. No m-1 grouping of the weights can fit the budget below this.
inline std::uint32_t lower_bound(std::span<const std::uint32_t> weights, std::uint64_t theta) {
  double log_product = 0.0;
  for (auto w : weights) log_product += std::log(static_cast<double>(w));
  const double log_theta = std::log(static_cast<double>(theta));
  for (std::uint32_t m = 1;; ++m) {
    if (std::log(static_cast<double>(m)) + log_product / m <= log_theta + 1e-12) return m;
  }
}

// Greedy multiway partition with products instead of sums: items sorted by
// descending weight (ties by original index), each appended to the group with
// the smallest current product (empty = 1, ties by lowest group index).
// Returns m lists of original indices into `weights`.
inline std::vector<std::vector<std::uint32_t>> greedy_partition(
    std::span<const std::uint32_t> weights, std::uint32_t m) {
  std::vector<std::uint32_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  });

  std::vector<std::vector<std::uint32_t>> groups(m);
  std::vector<double> product(m, 1.0);
  for (auto idx : order) {
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < m; ++j)
      if (product[j] < product[best]) best = j;
    groups[best].push_back(idx);
    product[best] *= static_cast<double>(weights[idx]);
  }
  return groups;
}

namespace detail {

inline std::vector<std::uint32_t> parent_union(const model& m,
                                               std::span<const std::uint32_t> members) {
  std::vector<std::uint32_t> u;
  for (auto v : members)
    for (const boolean_function& f : m.nodes[v].functions)
      u.insert(u.end(), f.parents.begin(), f.parents.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace detail

// Cartesian product of the members' predictor functions. Member 0's choice
// varies slowest across the returned list; tables are indexed by the parent
// union valuation with the lowest-indexed parent as the least-significant bit.
inline std::vector<combined_function> combine(std::span<const std::uint32_t> members,
                                              const model& m,
                                              std::uint64_t max_entries = kMaxGroupTableEntries) {
  const std::size_t width = members.size();
  if (width == 0 || width > 64) throw model_error("group must have 1..64 members");

  std::vector<std::uint32_t> uni = detail::parent_union(m, members);
  std::uint64_t combos = 1;
  for (auto v : members) {
    combos *= m.nodes[v].function_count();
    if (combos > max_entries) throw resource_error("too many combined functions in one group");
  }
  if (uni.size() >= 40 || (combos << uni.size()) > max_entries)
    throw resource_error("combined function tables exceed the memory budget");

  // Per member function: positions of its parents inside the union.
  std::vector<std::uint32_t> pos_of(m.size());
  for (std::uint32_t j = 0; j < uni.size(); ++j) pos_of[uni[j]] = j;

  const std::uint64_t table_len = 1ULL << uni.size();
  std::vector<combined_function> out;
  out.reserve(combos);

  std::vector<std::uint32_t> choice(width, 0);
  for (std::uint64_t c = 0; c < combos; ++c) {
    // Decode combo index, member 0 slowest.
    std::uint64_t rem = c;
    for (std::size_t j = width; j-- > 0;) {
      const std::uint32_t lc = m.nodes[members[j]].function_count();
      choice[j] = static_cast<std::uint32_t>(rem % lc);
      rem /= lc;
    }
    combined_function cf;
    cf.parents = uni;
    cf.outputs.assign(table_len, 0);
    cf.selection_prob = 1.0;
    for (std::size_t j = 0; j < width; ++j)
      cf.selection_prob *= m.nodes[members[j]].selection_probs[choice[j]];
    for (std::uint64_t v = 0; v < table_len; ++v) {
      std::uint64_t packed = 0;
      for (std::size_t j = 0; j < width; ++j) {
        const boolean_function& f = m.nodes[members[j]].functions[choice[j]];
        std::uint64_t fv = 0;
        for (std::size_t b = 0; b < f.parents.size(); ++b)
          fv |= ((v >> pos_of[f.parents[b]]) & 1) << b;
        packed |= static_cast<std::uint64_t>(f.table_bit(fv)) << j;
      }
      cf.outputs[v] = packed;
    }
    out.push_back(std::move(cf));
  }
  return out;
}

namespace detail {

inline node_group make_group(std::vector<std::uint32_t> members, const model& m) {
  node_group g;
  g.functions = combine(members, m);
  g.members = std::move(members);
  if (g.functions.size() > 1) {
    std::vector<double> probs;
    probs.reserve(g.functions.size());
    for (const auto& f : g.functions) probs.push_back(f.selection_prob);
    g.alias = alias_table::build(probs);
  }
  return g;
}

}  // namespace detail

// Full partition of the reduced model's nodes: multi-function nodes through
// the lower bound + greedy loop under the combined-function budget theta,
// single-function nodes grouped by shared parents under max_group_parents,
// with the total of their 2^|union| table sizes also held under theta.
inline grouping_plan partition(const reduced_model& rm, std::uint64_t theta,
                               std::uint32_t max_group_parents) {
  const model& m = rm.kept;
  const std::uint32_t n = m.size();
  if (n == 0) throw model_error("cannot partition an empty model");

  std::vector<std::uint32_t> multi, singles;
  for (std::uint32_t v = 0; v < n; ++v)
    (m.nodes[v].function_count() >= 2 ? multi : singles).push_back(v);

  grouping_plan plan;

  if (!multi.empty()) {
    std::vector<std::uint32_t> weights;
    weights.reserve(multi.size());
    for (auto v : multi) {
      const std::uint32_t w = m.nodes[v].function_count();
      if (w > theta)
        throw resource_error("node " + m.nodes[v].name +
                             " has more predictor functions than theta allows");
      weights.push_back(w);
    }

    const std::uint32_t m_count = static_cast<std::uint32_t>(multi.size());
    std::uint32_t mm = std::min(lower_bound(weights, theta), m_count);
    for (;; ++mm) {
      auto parts = greedy_partition(weights, std::min(mm, m_count));
      long double weight_sum = 0.0L, entry_total = 0.0L;
      bool fits = true;
      for (const auto& part : parts) {
        if (part.empty()) continue;
        long double product = 1.0L;
        std::vector<std::uint32_t> members;
        members.reserve(part.size());
        for (auto idx : part) {
          product *= weights[idx];
          members.push_back(multi[idx]);
        }
        weight_sum += product;
        std::sort(members.begin(), members.end());
        const auto uni = detail::parent_union(m, members);
        const long double entries = product * std::exp2(static_cast<double>(uni.size()));
        entry_total += entries;
        // The total-entry cap is advisory: with one node per group the
        // tables are as small as they can get, so only per-group limits bind.
        if (uni.size() >= 40 || entries > static_cast<long double>(kMaxGroupTableEntries) ||
            (mm < m_count &&
             entry_total > static_cast<long double>(kMaxTotalTableEntries))) {
          fits = false;
          break;
        }
      }
      if (fits && weight_sum <= static_cast<long double>(theta)) {
        for (auto& part : parts) {
          if (part.empty()) continue;
          std::vector<std::uint32_t> members;
          for (auto idx : part) members.push_back(multi[idx]);
          std::sort(members.begin(), members.end());
          plan.groups.push_back(detail::make_group(std::move(members), m));
        }
        break;
      }
      if (mm >= m_count)
        throw resource_error("theta too small: even one node per group exceeds the budget");
    }
  }

  // Single-function nodes: add each to the group sharing the most parents,
  // subject to the parent-union cap and the running 2^|union| total <= theta.
  struct single_group {
    std::vector<std::uint32_t> members;
    std::vector<std::uint32_t> uni;  // sorted parent union
  };
  std::vector<single_group> sgroups;
  long double table_total = 0.0L;

  auto merged_union = [](const std::vector<std::uint32_t>& a,
                         const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  };

  for (auto v : singles) {
    std::vector<std::uint32_t> ps = m.nodes[v].functions[0].parents;
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    if (ps.size() > max_group_parents)
      throw resource_error("node " + m.nodes[v].name +
                           " has more parents than max_group_parents");

    int best = -1;
    std::size_t best_share = 0;
    bool have_best = false;
    for (std::size_t j = 0; j < sgroups.size(); ++j) {
      const auto& g = sgroups[j];
      if (g.members.size() >= 64) continue;
      auto uni = merged_union(g.uni, ps);
      if (uni.size() > max_group_parents) continue;
      const long double new_total = table_total -
                                    std::exp2(static_cast<long double>(g.uni.size())) +
                                    std::exp2(static_cast<long double>(uni.size()));
      if (new_total > static_cast<long double>(theta)) continue;
      std::vector<std::uint32_t> shared;
      std::set_intersection(g.uni.begin(), g.uni.end(), ps.begin(), ps.end(),
                            std::back_inserter(shared));
      if (!have_best || shared.size() > best_share) {
        best = static_cast<int>(j);
        best_share = shared.size();
        have_best = true;
      }
    }
    if (have_best) {
      auto& g = sgroups[static_cast<std::size_t>(best)];
      table_total -= std::exp2(static_cast<long double>(g.uni.size()));
      g.uni = merged_union(g.uni, ps);
      table_total += std::exp2(static_cast<long double>(g.uni.size()));
      g.members.push_back(v);
    } else {
      table_total += std::exp2(static_cast<long double>(ps.size()));
      if (table_total > static_cast<long double>(theta))
        throw resource_error("single-function group tables exceed theta");
      sgroups.push_back({{v}, std::move(ps)});
    }
  }
  for (auto& g : sgroups) plan.groups.push_back(detail::make_group(std::move(g.members), m));

  plan.cum.resize(plan.groups.size() + 1, 0);
  for (std::size_t i = 0; i < plan.groups.size(); ++i)
    plan.cum[i + 1] = plan.cum[i] + static_cast<std::uint32_t>(plan.groups[i].members.size());
  return plan;
}

}  // namespace pbn
