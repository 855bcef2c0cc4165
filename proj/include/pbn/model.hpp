#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "pbn/bitstate.hpp"
#include "pbn/errors.hpp"

namespace pbn {

// One predictor function as a truth table over an ordered parent list.
// Bit v of the table is the output when the parents, read with parents[0]
// as the least-significant bit, encode the integer v.
struct boolean_function {
  std::vector<std::uint32_t> parents;
  std::vector<std::uint64_t> table;  // 2^parents.size() bits, packed

  static constexpr std::uint32_t kMaxParents = 30;

  std::uint32_t parent_count() const { return static_cast<std::uint32_t>(parents.size()); }

  bool table_bit(std::uint64_t v) const { return (table[v >> 6] >> (v & 63)) & 1; }

  void set_table_bit(std::uint64_t v, bool b) {
    const std::uint64_t bit = 1ULL << (v & 63);
    if (b)
      table[v >> 6] |= bit;
    else
      table[v >> 6] &= ~bit;
  }

  static std::vector<std::uint64_t> empty_table(std::uint32_t phi) {
    return std::vector<std::uint64_t>(((1ULL << phi) + 63) / 64, 0);
  }

  bool eval(const state& s) const {
    std::uint64_t v = 0;
    for (std::size_t j = 0; j < parents.size(); ++j)
      v |= static_cast<std::uint64_t>(s.test(parents[j])) << j;
    return table_bit(v);
  }
};

struct node {
  std::string name;
  std::vector<boolean_function> functions;
  std::vector<double> selection_probs;  // same length as functions, sums to 1

  std::uint32_t function_count() const { return static_cast<std::uint32_t>(functions.size()); }
};

// A full PBN: nodes with predictor functions, the perturbation rate, and the
// set of nodes whose long-run behaviour the analysis cares about.
struct model {
  std::vector<node> nodes;
  double perturbation_rate = 0.0;
  std::vector<std::uint32_t> interest;  // sorted ascending

  std::uint32_t size() const { return static_cast<std::uint32_t>(nodes.size()); }

  std::vector<bool> interest_mask() const {
    std::vector<bool> mask(nodes.size(), false);
    for (auto i : interest) mask[i] = true;
    return mask;
  }
};

// Predicate atom over model-order node indices: "node == value".
struct predicate_term {
  std::uint32_t node;
  bool value;
};

inline constexpr double kProbSumTolerance = 1e-9;

// Checks every structural invariant and renormalizes selection probabilities
// whose sum is within tolerance of 1. Throws model_error otherwise.
inline void validate(model& m) {
  if (m.nodes.empty()) throw model_error("model must have at least one node");
  if (!(m.perturbation_rate > 0.0 && m.perturbation_rate < 1.0))
    throw model_error("perturbation rate must be in (0,1)");
  const std::uint32_t n = m.size();
  for (std::uint32_t i = 0; i < n; ++i) {
    node& nd = m.nodes[i];
    if (nd.functions.empty())
      throw model_error("node " + nd.name + " has no predictor functions");
    if (nd.selection_probs.size() != nd.functions.size())
      throw model_error("node " + nd.name + " probability/function count mismatch");
    double sum = 0.0;
    for (double c : nd.selection_probs) {
      if (!(c > 0.0) || c > 1.0 + kProbSumTolerance)
        throw model_error("node " + nd.name + " has a selection probability outside (0,1]");
      sum += c;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", sum);
      throw model_error("node " + nd.name + ": selection probabilities sum to " + buf);
    }
    for (double& c : nd.selection_probs) c /= sum;
    for (const boolean_function& f : nd.functions) {
      if (f.parent_count() > boolean_function::kMaxParents)
        throw model_error("node " + nd.name + " has a function with more than 30 parents");
      for (auto pidx : f.parents)
        if (pidx >= n)
          throw model_error("node " + nd.name + " references a nonexistent parent");
      const std::uint64_t bits = 1ULL << f.parent_count();
      if (f.table.size() != (bits + 63) / 64)
        throw model_error("node " + nd.name + " truth table has the wrong length");
    }
  }
  for (auto i : m.interest)
    if (i >= n) throw model_error("interest set references a nonexistent node");
}

// D(G) = (1/n) * sum of parent counts over all predictor functions.
inline double density(const model& m) {
  std::uint64_t total = 0;
  for (const node& nd : m.nodes)
    for (const boolean_function& f : nd.functions) total += f.parent_count();
  return static_cast<double>(total) / static_cast<double>(m.size());
}

}  // namespace pbn
