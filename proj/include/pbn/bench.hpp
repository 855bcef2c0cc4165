#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pbn/engine.hpp"
#include "pbn/errors.hpp"
#include "pbn/generate.hpp"
#include "pbn/io.hpp"
#include "pbn/rng.hpp"

namespace pbn {

enum class sim_method { old_method, reduction_method, grouped_method };

inline const char* method_name(sim_method m) {
  switch (m) {
    case sim_method::old_method: return "old";
    case sim_method::reduction_method: return "reduced";
    case sim_method::grouped_method: return "grouped";
  }
  return "?";
}

inline sim_method parse_method(const std::string& s) {
  if (s == "old") return sim_method::old_method;
  if (s == "reduced") return sim_method::reduction_method;
  if (s == "grouped") return sim_method::grouped_method;
  throw model_error("unknown method '" + s + "' (expected old|reduced|grouped)");
}

struct corpus_entry {
  std::uint32_t n = 0;
  double density = 1.0;
  double leaf_pct = 0.0;
  std::uint64_t seed = 0;
};

struct method_timing {
  sim_method method;
  double prep_seconds = 0.0;  // preparation only, never counted in sim time
  double sim_seconds = 0.0;
};

struct benchmark_record {
  corpus_entry entry;
  std::vector<method_timing> timings;

  const method_timing* timing(sim_method m) const {
    for (const auto& t : timings)
      if (t.method == m) return &t;
    return nullptr;
  }

  // sim time of `base` over sim time of `m`.
  double speedup(sim_method m, sim_method base) const {
    const method_timing* a = timing(base);
    const method_timing* b = timing(m);
    if (!a || !b || b->sim_seconds <= 0.0) return 0.0;
    return a->sim_seconds / b->sim_seconds;
  }
};

struct benchmark_config {
  std::vector<corpus_entry> corpus;
  std::uint64_t steps = 10'000'000;
  std::uint64_t warmup = 0;
  int repeats = 3;  // median reported
  std::vector<sim_method> methods = {sim_method::old_method, sim_method::reduction_method,
                                     sim_method::grouped_method};
  std::uint32_t max_functions = 3;
  std::uint32_t max_parents = 5;
  double perturbation_rate = 0.001;
  std::uint64_t theta = kDefaultTheta;
  std::uint32_t k_max = kDefaultGroupWidth;
  std::uint32_t max_group_parents = kDefaultMaxGroupParents;
  std::uint64_t sim_seed = 42;
};

// One line per entry: `n density leaf_pct seed`. '#' comments allowed.
inline std::vector<corpus_entry> parse_corpus(std::istream& in) {
  std::vector<corpus_entry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::tokenize(line);
    if (tok.empty()) continue;
    if (tok.size() != 4)
      throw parse_error(lineno, "expected 'n density leaf_pct seed'");
    corpus_entry e;
    e.n = static_cast<std::uint32_t>(detail::parse_uint(tok[0], lineno, "network size"));
    e.density = detail::parse_double(tok[1], lineno, "density");
    e.leaf_pct = detail::parse_double(tok[2], lineno, "leaf fraction");
    e.seed = detail::parse_uint(tok[3], lineno, "seed");
    out.push_back(e);
  }
  return out;
}

namespace detail {

template <class Fn>
double timed_seconds(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Per-node statistics are off in the timed loops so the measurement is the
// stepper itself, at identical cost for every method.
template <class Stepper>
double timed_run(Stepper& stepper, std::uint64_t warmup, std::uint64_t steps,
                 std::uint64_t seed) {
  xoshiro256 rng(seed);
  state s(stepper.state_bits());
  sim_options opt;
  opt.count_nodes = false;
  simulate(stepper, s, warmup, rng, opt);
  return timed_seconds([&] { simulate(stepper, s, steps, rng, opt); });
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace detail

inline method_timing run_one(const model& m, sim_method method, const benchmark_config& cfg) {
  method_timing out;
  out.method = method;
  std::vector<double> preps, sims;
  for (int rep = 0; rep < std::max(1, cfg.repeats); ++rep) {
    switch (method) {
      case sim_method::old_method: {
        std::optional<reference_simulator> sim;
        preps.push_back(detail::timed_seconds([&] { sim.emplace(m); }));
        sims.push_back(detail::timed_run(*sim, cfg.warmup, cfg.steps, cfg.sim_seed));
        break;
      }
      case sim_method::reduction_method: {
        reduced_model rm;
        preps.push_back(detail::timed_seconds([&] { rm = reduce(m); }));
        reduced_simulator sim(rm);
        sims.push_back(detail::timed_run(sim, cfg.warmup, cfg.steps, cfg.sim_seed));
        break;
      }
      case sim_method::grouped_method: {
        prepared_simulation ps;
        preps.push_back(detail::timed_seconds(
            [&] { ps = prepare(m, cfg.theta, cfg.k_max, cfg.max_group_parents); }));
        grouped_simulator sim(ps);
        sims.push_back(detail::timed_run(sim, cfg.warmup, cfg.steps, cfg.sim_seed));
        break;
      }
    }
  }
  out.prep_seconds = detail::median(preps);
  out.sim_seconds = detail::median(sims);
  return out;
}

inline std::vector<benchmark_record> run_benchmark(const benchmark_config& cfg) {
  if (cfg.methods.empty()) throw model_error("benchmark needs at least one method");
  std::vector<benchmark_record> records;
  for (const corpus_entry& entry : cfg.corpus) {
    generator_params gp;
    gp.n = entry.n;
    gp.target_density = entry.density;
    gp.leaf_pct = entry.leaf_pct;
    gp.max_functions = cfg.max_functions;
    gp.max_parents = cfg.max_parents;
    gp.seed = entry.seed;
    gp.perturbation_rate = cfg.perturbation_rate;
    const model m = generate_random(gp);

    benchmark_record rec;
    rec.entry = entry;
    for (sim_method method : cfg.methods) rec.timings.push_back(run_one(m, method, cfg));
    records.push_back(std::move(rec));
  }
  return records;
}

// One CSV row per (model, method). speedup_vs_old is 0 when the old method
// was not part of the run.
inline void write_benchmark_csv(std::ostream& out,
                                const std::vector<benchmark_record>& records,
                                std::uint64_t steps) {
  if (records.empty()) throw model_error("no benchmark records to report");
  out << "n,density,leaf_pct,seed,method,prep_seconds,sim_seconds,steps,speedup_vs_old\n";
  for (const auto& rec : records) {
    for (const auto& t : rec.timings) {
      out << rec.entry.n << ',' << format_prob(rec.entry.density) << ','
          << format_prob(rec.entry.leaf_pct) << ',' << rec.entry.seed << ','
          << method_name(t.method) << ',' << format_prob(t.prep_seconds) << ','
          << format_prob(t.sim_seconds) << ',' << steps << ','
          << format_prob(rec.speedup(t.method, sim_method::old_method)) << '\n';
    }
  }
}

// Whitespace-separated surface data (leaf fraction, density, grouped-over-old
// speedup), ready for gnuplot splot.
inline void write_speedup_surface(std::ostream& out,
                                  const std::vector<benchmark_record>& records) {
  if (records.empty()) throw model_error("no benchmark records to report");
  out << "# leaf_pct density speedup_grouped_over_old\n";
  for (const auto& rec : records) {
    const double s = rec.speedup(sim_method::grouped_method, sim_method::old_method);
    if (s > 0.0)
      out << format_prob(rec.entry.leaf_pct) << ' ' << format_prob(rec.entry.density) << ' '
          << format_prob(s) << '\n';
  }
}

}  // namespace pbn
