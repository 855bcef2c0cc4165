#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pbn/errors.hpp"
#include "pbn/model.hpp"

namespace pbn {

inline constexpr std::uint32_t kExactMaxNodes = 12;

// Row-major 2^n x 2^n transition matrix of the chain induced by the model.
// State w encodes node i in bit i. `leaf_no_perturb_prob` folds removed-leaf
// perturbations in: with probability 1-t the state is returned unchanged when
// no listed node is perturbed. t = 1 gives the plain full-model chain.
inline std::vector<double> exact_transition_matrix(const model& m,
                                                   double leaf_no_perturb_prob = 1.0) {
  const std::uint32_t n = m.size();
  if (n > kExactMaxNodes) throw resource_error("exact transition matrix limited to 12 nodes");
  const std::uint64_t states = 1ULL << n;
  const double p = m.perturbation_rate;
  const double t = leaf_no_perturb_prob;

  // q[s*n+i] = P(selected function of node i outputs 1 in state s).
  std::vector<double> q(states * n, 0.0);
  for (std::uint64_t s = 0; s < states; ++s) {
    state st = state::from_uint(s, n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const node& nd = m.nodes[i];
      double out1 = 0.0;
      for (std::size_t j = 0; j < nd.functions.size(); ++j)
        if (nd.functions[j].eval(st)) out1 += nd.selection_probs[j];
      q[s * n + i] = out1;
    }
  }

  std::vector<double> pow_p(n + 1), pow_1p(n + 1);
  pow_p[0] = pow_1p[0] = 1.0;
  for (std::uint32_t i = 1; i <= n; ++i) {
    pow_p[i] = pow_p[i - 1] * p;
    pow_1p[i] = pow_1p[i - 1] * (1.0 - p);
  }

  std::vector<double> mat(states * states, 0.0);
  for (std::uint64_t s = 0; s < states; ++s) {
    double* row = mat.data() + s * states;
    for (std::uint64_t sp = 0; sp < states; ++sp) {
      double entry = 0.0;
      if (sp != s) {
        const int d = std::popcount(s ^ sp);
        entry += pow_p[d] * pow_1p[n - d];
      }
      double fprod = 1.0;
      for (std::uint32_t i = 0; i < n; ++i) {
        const double q1 = q[s * n + i];
        fprod *= ((sp >> i) & 1) ? q1 : 1.0 - q1;
      }
      entry += pow_1p[n] * ((sp == s ? 1.0 - t : 0.0) + t * fprod);
      row[sp] = entry;
    }
  }
  return mat;
}

// Stationary vector by power iteration, to L1 residual |piP - pi| <= tol.
inline std::vector<double> stationary_distribution(std::span<const double> matrix,
                                                   std::size_t states, double tol = 1e-12,
                                                   std::size_t max_iter = 1000000) {
  std::vector<double> pi(states, 1.0 / static_cast<double>(states));
  std::vector<double> next(states, 0.0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    for (auto& v : next) v = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      const double ps = pi[s];
      if (ps == 0.0) continue;
      const double* row = matrix.data() + s * states;
      for (std::size_t sp = 0; sp < states; ++sp) next[sp] += ps * row[sp];
    }
    double residual = 0.0, sum = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      residual += std::abs(next[s] - pi[s]);
      sum += next[s];
    }
    for (auto& v : next) v /= sum;
    pi.swap(next);
    if (residual <= tol) return pi;
  }
  throw resource_error("power iteration did not converge");
}

// Exact predicate-weighted mass under the limiting distribution.
inline double marginal_steady_state_exact(const model& m,
                                          std::span<const predicate_term> predicate) {
  const std::uint32_t n = m.size();
  for (const auto& term : predicate)
    if (term.node >= n) throw model_error("predicate references a nonexistent node");
  const auto mat = exact_transition_matrix(m);
  const std::uint64_t states = 1ULL << n;
  const auto pi = stationary_distribution(mat, states);
  double mass = 0.0;
  for (std::uint64_t s = 0; s < states; ++s) {
    bool match = true;
    for (const auto& term : predicate)
      if (((s >> term.node) & 1) != static_cast<std::uint64_t>(term.value)) {
        match = false;
        break;
      }
    if (match) mass += pi[s];
  }
  return mass;
}

}  // namespace pbn
