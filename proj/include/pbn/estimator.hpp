#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pbn/engine.hpp"
#include "pbn/errors.hpp"

namespace pbn {

// Speedup regression: y = b1 + b2*x1 + b3*x1^2 + b4*x2 + b5*x2^2 with fixed
// coefficients, x1 the leaf fraction in [0,1], x2 the network density.
inline constexpr std::array<double, 5> kSpeedupCoefficients = {2.89, 2.71, 2.40, -1.65, 0.71};

inline double predict_speedup(double leaf_fraction, double density) {
  const auto& b = kSpeedupCoefficients;
  return b[0] + b[1] * leaf_fraction + b[2] * leaf_fraction * leaf_fraction + b[3] * density +
         b[4] * density * density;
}

// Acklam's rational approximation for the standard normal quantile, polished
// with one Halley step on erfc.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw model_error("normal quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

struct estimation_request {
  std::vector<predicate_term> predicate;
  double precision = 1e-3;          // half-width r of the target interval
  double confidence = 0.95;
  std::uint64_t pilot = 10000;      // pilot run length
  double burn_epsilon = 0.0;        // 0 -> use precision
  std::uint32_t max_refinements = 20;
  // Safety factor on the required sample size. The two-state formula is
  // exact only for a first-order Markov projection; mild higher-order
  // dependence that escapes the order test would otherwise undersize N.
  double sample_inflation = 1.3;
};

struct estimation_result {
  double estimate = 0.0;
  std::uint64_t sample_size_used = 0;
  std::uint64_t burn_in_used = 0;
  double wall_seconds = 0.0;
  bool degenerate = false;
};

namespace detail {

// Streaming transition counts of a thinned binary series.
struct thinned_counts {
  std::uint64_t trans[2][2] = {{0, 0}, {0, 0}};
  bool prev = false;
  bool have_prev = false;

  void feed(bool z) {
    if (have_prev) ++trans[prev][z];
    prev = z;
    have_prev = true;
  }

  bool rates(double& alpha, double& beta) const {
    const std::uint64_t from0 = trans[0][0] + trans[0][1];
    const std::uint64_t from1 = trans[1][0] + trans[1][1];
    if (from0 == 0 || from1 == 0 || trans[0][1] == 0 || trans[1][0] == 0) return false;
    alpha = static_cast<double>(trans[0][1]) / static_cast<double>(from0);
    beta = static_cast<double>(trans[1][0]) / static_cast<double>(from1);
    return true;
  }
};

// BIC comparison of a second-order versus first-order Markov fit of the
// kappa-thinned series; negative means first-order is adequate.
inline double markov_order_bic(const std::vector<bool>& z, std::uint64_t kappa) {
  double n_ijk[2][2][2] = {};
  double total = 0.0;
  for (std::size_t t = 2 * kappa; t < z.size(); t += kappa) {
    n_ijk[z[t - 2 * kappa]][z[t - kappa]][z[t]] += 1.0;
    total += 1.0;
  }
  if (total < 8.0) return -1.0;  // too short to reject first order
  double g2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double nij = n_ijk[i][j][0] + n_ijk[i][j][1];
        const double njk = n_ijk[0][j][k] + n_ijk[1][j][k];
        const double nj = n_ijk[0][j][0] + n_ijk[0][j][1] + n_ijk[1][j][0] + n_ijk[1][j][1];
        if (n_ijk[i][j][k] > 0.0 && nij > 0.0 && njk > 0.0 && nj > 0.0)
          g2 += 2.0 * n_ijk[i][j][k] * std::log(n_ijk[i][j][k] * nj / (nij * njk));
      }
  return g2 - 2.0 * std::log(total);
}

}  // namespace detail

// Two-state Markov chain stopping rule (Raftery-Lewis style): project the
// trajectory onto the binary predicate; from a pilot run find the smallest
// thinning kappa at which the projected process is adequately first-order
// Markov (BIC test), estimate the thinned chain's transition probabilities
// alpha = P(0->1) and beta = P(1->0), size the burn-in and required sample
// length from them (times kappa in raw steps), then sample with
// re-estimation until the requirement is met. Returns the post-burn-in
// frequency over all raw samples.
template <class Stepper, class Rng>
estimation_result estimate_steady_state(Stepper& stepper, state& s,
                                        const compiled_predicate& predicate,
                                        const estimation_request& req, Rng& rng) {
  if (!(req.precision > 0.0 && req.precision < 1.0))
    throw model_error("precision must be in (0,1)");
  if (!(req.confidence > 0.0 && req.confidence < 1.0))
    throw model_error("confidence must be in (0,1)");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // Pilot: store the projected series, widened up to 5 times if the
  // projected process never moves both ways.
  constexpr std::uint64_t kMaxThin = 16;
  constexpr std::size_t kMaxStoredPilot = 1ULL << 22;
  std::vector<bool> pilot_series;
  std::uint64_t pilot = std::max<std::uint64_t>(req.pilot, 100);
  pilot_series.reserve(std::min<std::uint64_t>(pilot + 1, kMaxStoredPilot));
  pilot_series.push_back(eval_predicate(predicate, s));

  detail::thinned_counts raw;
  raw.feed(pilot_series.back());
  std::uint64_t pilot_done = 0;
  auto advance_pilot = [&](std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i) {
      stepper.step(s, rng);
      const bool z = eval_predicate(predicate, s);
      raw.feed(z);
      if (pilot_series.size() < kMaxStoredPilot) pilot_series.push_back(z);
      ++pilot_done;
    }
  };
  double alpha = 0.0, beta = 0.0;
  advance_pilot(pilot);
  for (int widen = 0; widen < 5 && !raw.rates(alpha, beta); ++widen) {
    pilot *= 10;
    advance_pilot(pilot - pilot_done);
  }
  if (!raw.rates(alpha, beta)) {
    std::uint64_t ones = 0;
    for (std::size_t i = 1; i < pilot_series.size(); ++i) ones += pilot_series[i];
    estimation_result res;
    res.estimate = static_cast<double>(ones) / static_cast<double>(pilot_series.size() - 1);
    res.sample_size_used = pilot_done;
    res.degenerate = true;
    res.wall_seconds = elapsed();
    return res;
  }

  // Smallest thinning at which a first-order fit is preferred.
  std::uint64_t kappa = 1;
  while (kappa < kMaxThin && detail::markov_order_bic(pilot_series, kappa) > 0.0) ++kappa;
  {
    detail::thinned_counts thin;
    for (std::size_t t = 0; t < pilot_series.size(); t += kappa) thin.feed(pilot_series[t]);
    if (!thin.rates(alpha, beta)) kappa = 1;  // thinned pilot degenerate: fall back
  }

  const double z = inverse_normal_cdf(0.5 * (1.0 + req.confidence));
  const double eps = req.burn_epsilon > 0.0 ? req.burn_epsilon : req.precision;
  auto burn_in_for = [&](double a, double b) -> std::uint64_t {
    const double lambda = 1.0 - a - b;
    if (lambda <= 0.0) return kappa;
    const double num = std::log(eps * (a + b) / std::max(a, b));
    return kappa * (static_cast<std::uint64_t>(std::ceil(num / std::log(lambda))) + 1);
  };
  auto sample_size_for = [&](double a, double b) -> std::uint64_t {
    const double ratio = z / req.precision;
    const double n =
        a * b * (2.0 - a - b) / std::pow(a + b, 3.0) * ratio * ratio * req.sample_inflation;
    return kappa * std::max<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(n)), 100);
  };

  const std::uint64_t burn = burn_in_for(alpha, beta);
  std::uint64_t target = sample_size_for(alpha, beta);

  // Restart counting: discard the burn-in, then sample with re-estimation
  // of the thinned transition rates.
  detail::thinned_counts thin;
  std::uint64_t ones = 0, recorded = 0;
  bool cur = pilot_series.back();
  auto advance = [&](std::uint64_t count, bool record) {
    for (std::uint64_t i = 0; i < count; ++i) {
      stepper.step(s, rng);
      cur = eval_predicate(predicate, s);
      if (record) {
        ones += cur;
        ++recorded;
        if (recorded % kappa == 0) thin.feed(cur);
      }
    }
  };
  advance(burn, false);
  for (std::uint32_t refinement = 0; recorded < target; ++refinement) {
    advance(target - recorded, true);
    if (refinement >= req.max_refinements) break;
    if (thin.rates(alpha, beta)) target = std::max(target, sample_size_for(alpha, beta));
  }

  estimation_result res;
  res.estimate = static_cast<double>(ones) / static_cast<double>(recorded);
  res.sample_size_used = recorded;
  res.burn_in_used = burn;
  res.wall_seconds = elapsed();
  return res;
}

}  // namespace pbn
