#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pbn/errors.hpp"

namespace pbn {

// Walker alias table: O(1) sampling from a fixed finite distribution.
// Construction uses the two-worklist (small/large) variant.
class alias_table {
public:
  alias_table() = default;

  static alias_table build(std::span<const double> probs) {
    const std::size_t n = probs.size();
    if (n == 0) throw model_error("alias table needs a non-empty distribution");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw model_error("alias table needs non-negative probabilities");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw model_error("alias table input probabilities must sum to 1");

    alias_table t;
    t.prob_.assign(n, 1.0);
    t.alias_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) t.alias_[i] = i;

    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = probs[i] * static_cast<double>(n) / sum;

    std::vector<std::uint32_t> small, large;
    for (std::uint32_t i = 0; i < n; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);

    while (!small.empty() && !large.empty()) {
      const std::uint32_t s = small.back();
      const std::uint32_t l = large.back();
      small.pop_back();
      t.prob_[s] = scaled[s];
      t.alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (std::uint32_t i : small) t.prob_[i] = 1.0;
    for (std::uint32_t i : large) t.prob_[i] = 1.0;
    return t;
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(prob_.size()); }

  std::uint32_t next(double u1, double u2) const {
    std::uint32_t i = static_cast<std::uint32_t>(u1 * static_cast<double>(prob_.size()));
    if (i >= prob_.size()) i = static_cast<std::uint32_t>(prob_.size()) - 1;
    return u2 < prob_[i] ? i : alias_[i];
  }

  // Single-uniform draw: the integer part of u*n picks the cell and the
  // fractional part is the coin against the cell's cutoff. Cell and coin are
  // exactly independent for a real-valued uniform, so the sampled
  // distribution is the same as with two draws at half the generator cost.
  template <class Rng>
  std::uint32_t next(Rng& r) const {
    const double u = r.next_double() * static_cast<double>(prob_.size());
    std::uint32_t i = static_cast<std::uint32_t>(u);
    if (i >= prob_.size()) i = static_cast<std::uint32_t>(prob_.size()) - 1;
    return (u - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
  }

  // The distribution the table actually samples, computed by exact
  // enumeration of its cells. Test oracles compare this to the input.
  std::vector<double> implied_distribution() const {
    const std::size_t n = prob_.size();
    std::vector<double> out(n, 0.0);
    const double cell = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] += cell * prob_[i];
      out[alias_[i]] += cell * (1.0 - prob_[i]);
    }
    return out;
  }

  const std::vector<double>& cutoffs() const { return prob_; }
  const std::vector<std::uint32_t>& aliases() const { return alias_; }

private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace pbn
