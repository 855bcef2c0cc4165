// pbn: structure-based simulation of probabilistic Boolean networks.
//
// Exit codes: 0 success, 1 usage error, 2 model error, 3 resource limit.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pbn/bench.hpp"
#include "pbn/engine.hpp"
#include "pbn/errors.hpp"
#include "pbn/estimator.hpp"
#include "pbn/generate.hpp"
#include "pbn/grouping.hpp"
#include "pbn/io.hpp"
#include "pbn/reduction.hpp"
#include "pbn/rng.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pbn::model_error("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

pbn::model load_model(const std::string& path) { return pbn::parse_model(read_file(path)); }

std::vector<pbn::predicate_term> parse_predicate(const std::string& text, const pbn::model& m) {
  std::vector<pbn::predicate_term> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '&')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || (part.substr(eq + 1) != "0" && part.substr(eq + 1) != "1"))
      throw pbn::model_error("predicate atoms must look like '<name>=<0|1>'");
    const std::string name = part.substr(0, eq);
    bool found = false;
    for (std::uint32_t i = 0; i < m.size(); ++i)
      if (m.nodes[i].name == name) {
        out.push_back({i, part.substr(eq + 1) == "1"});
        found = true;
        break;
      }
    if (!found) throw pbn::model_error("predicate references unknown node '" + name + "'");
  }
  if (out.empty()) throw pbn::model_error("empty predicate");
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pbn::model_error("cannot write '" + path + "'");
  out << content;
}

struct csv_row {
  std::uint32_t node;
  std::string name;
  std::uint64_t ones;
};

std::string stats_csv(const std::vector<csv_row>& rows, std::uint64_t steps) {
  std::ostringstream out;
  out << "node,name,one_count,steps,frequency\n";
  for (const auto& r : rows) {
    const double freq =
        steps == 0 ? 0.0 : static_cast<double>(r.ones) / static_cast<double>(steps);
    out << r.node << ',' << r.name << ',' << r.ones << ',' << steps << ','
        << pbn::format_prob(freq) << '\n';
  }
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-based simulation of probabilistic Boolean networks"};
  app.require_subcommand(1);

  // Shared budget/seed knobs.
  std::uint64_t seed = 0;
  std::uint64_t theta = pbn::kDefaultTheta;
  std::uint32_t k_max = pbn::kDefaultGroupWidth;
  std::uint32_t max_group_parents = pbn::kDefaultMaxGroupParents;

  // generate
  auto* cmd_gen = app.add_subcommand("generate", "Generate a random PBN");
  pbn::generator_params gp;
  std::string gen_out;
  cmd_gen->add_option("--n", gp.n, "Node count")->required();
  cmd_gen->add_option("--density", gp.target_density, "Target density")->required();
  cmd_gen->add_option("--leaf-pct", gp.leaf_pct, "Leaf fraction in [0,1)");
  cmd_gen->add_option("--max-functions", gp.max_functions, "Max functions per node");
  cmd_gen->add_option("--max-parents", gp.max_parents, "Max parents per function");
  cmd_gen->add_option("--perturbation", gp.perturbation_rate, "Perturbation rate p");
  cmd_gen->add_option("-o,--output", gen_out, "Output file (default stdout)");

  // reduce
  auto* cmd_reduce = app.add_subcommand("reduce", "Report the leaf reduction of a model");
  std::string reduce_model;
  cmd_reduce->add_option("--model", reduce_model, "PBN file")->required();

  // plan
  auto* cmd_plan = app.add_subcommand("plan", "Report the node-grouping plan");
  std::string plan_model;
  cmd_plan->add_option("--model", plan_model, "PBN file")->required();

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate a model and report statistics");
  std::string sim_model, sim_method_name = "grouped", sim_csv;
  std::uint64_t sim_steps = 1000000;
  cmd_sim->add_option("--model", sim_model, "PBN file")->required();
  cmd_sim->add_option("--steps", sim_steps, "Steps to simulate");
  cmd_sim->add_option("--method", sim_method_name, "old|reduced|grouped");
  cmd_sim->add_option("--report-csv", sim_csv, "Write node statistics CSV here");

  // estimate
  auto* cmd_est = app.add_subcommand("estimate", "Estimate a steady-state probability");
  std::string est_model, est_pred, est_method_name = "grouped";
  double est_precision = 1e-3, est_confidence = 0.95;
  cmd_est->add_option("--model", est_model, "PBN file")->required();
  cmd_est->add_option("--predicate", est_pred, "e.g. \"x1=1&x2=0\"")->required();
  cmd_est->add_option("--precision", est_precision, "Target half-width r");
  cmd_est->add_option("--confidence", est_confidence, "Confidence level");
  cmd_est->add_option("--method", est_method_name, "old|grouped");

  // predict
  auto* cmd_pred = app.add_subcommand("predict", "Predict the grouped-over-old speedup");
  double pred_leaves = 0.0, pred_density = 1.0;
  cmd_pred->add_option("--leaves", pred_leaves, "Leaf fraction in [0,1]")->required();
  cmd_pred->add_option("--density", pred_density, "Network density")->required();

  // benchmark
  auto* cmd_bench = app.add_subcommand("benchmark", "Time the methods over a corpus");
  std::string bench_config, bench_out, bench_surface;
  pbn::benchmark_config bc;
  std::vector<std::string> bench_methods = {"old", "reduced", "grouped"};
  cmd_bench->add_option("--config", bench_config, "Corpus file: 'n density leaf_pct seed' lines")
      ->required();
  cmd_bench->add_option("--steps", bc.steps, "Steps per timed run");
  cmd_bench->add_option("--warmup", bc.warmup, "Warmup steps before timing");
  cmd_bench->add_option("--repeats", bc.repeats, "Repeats per run (median reported)");
  cmd_bench->add_option("--methods", bench_methods, "Methods to compare");
  cmd_bench->add_option("--max-functions", bc.max_functions, "Generator: max functions");
  cmd_bench->add_option("--max-parents", bc.max_parents, "Generator: max parents");
  cmd_bench->add_option("--perturbation", bc.perturbation_rate, "Generator: perturbation rate");
  cmd_bench->add_option("-o,--output", bench_out, "CSV output (default stdout)");
  cmd_bench->add_option("--surface", bench_surface, "Also write gnuplot surface data here");

  for (auto* sub : {cmd_gen, cmd_sim, cmd_est, cmd_bench})
    sub->add_option("--seed", seed, "RNG seed");
  for (auto* sub : {cmd_plan, cmd_sim, cmd_est, cmd_bench}) {
    sub->add_option("--theta", theta, "Combined-function budget");
    sub->add_option("--k", k_max, "Perturbation group width cap");
    sub->add_option("--max-group-parents", max_group_parents,
                    "Parent cap for single-function groups");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_gen) {
      gp.seed = seed;
      const pbn::model m = pbn::generate_random(gp);
      write_output(gen_out, pbn::serialize_model(m));
    } else if (*cmd_reduce) {
      const pbn::model m = load_model(reduce_model);
      const pbn::reduced_model rm = pbn::reduce(m);
      std::cout << "leaves " << rm.removed.size() << "\n"
                << "kept " << rm.kept_count() << "\n"
                << "t " << pbn::format_prob(rm.leaf_no_perturb_prob) << "\n";
    } else if (*cmd_plan) {
      const pbn::model m = load_model(plan_model);
      const pbn::reduced_model rm = pbn::reduce(m);
      const pbn::grouping_plan plan = pbn::partition(rm, theta, max_group_parents);
      std::uint64_t multi_products = 0, table_entries = 0;
      std::cout << "groups " << plan.group_count() << "\ngroup_sizes";
      for (const auto& g : plan.groups) {
        std::cout << ' ' << g.members.size();
        if (g.functions.size() > 1) multi_products += g.functions.size();
        table_entries += g.functions.size() * g.functions.front().outputs.size();
      }
      std::cout << "\ncombined_function_sum " << multi_products << "\nmemory_estimate_bytes "
                << table_entries * sizeof(std::uint64_t) << "\n";
    } else if (*cmd_sim) {
      const pbn::model m = load_model(sim_model);
      const pbn::sim_method method = pbn::parse_method(sim_method_name);
      pbn::xoshiro256 rng(seed);
      std::vector<csv_row> rows;
      std::uint64_t steps_done = 0;
      if (method == pbn::sim_method::old_method) {
        pbn::reference_simulator sim(m);
        pbn::state s(sim.state_bits());
        const auto tr = pbn::simulate(sim, s, sim_steps, rng);
        for (std::uint32_t i = 0; i < m.size(); ++i)
          rows.push_back({i, m.nodes[i].name, tr.one_counts[i]});
        steps_done = tr.steps;
      } else if (method == pbn::sim_method::reduction_method) {
        const pbn::reduced_model rm = pbn::reduce(m);
        pbn::reduced_simulator sim(rm);
        pbn::state s(sim.state_bits());
        const auto tr = pbn::simulate(sim, s, sim_steps, rng);
        for (std::uint32_t v = 0; v < m.size(); ++v)
          if (rm.index_map[v] >= 0)
            rows.push_back({v, m.nodes[v].name, tr.one_counts[rm.index_map[v]]});
        steps_done = tr.steps;
      } else {
        const pbn::prepared_simulation ps = pbn::prepare(m, theta, k_max, max_group_parents);
        pbn::grouped_simulator sim(ps);
        pbn::state s(sim.state_bits());
        const auto tr = pbn::simulate(sim, s, sim_steps, rng);
        for (std::uint32_t v = 0; v < m.size(); ++v)
          if (ps.reduced.index_map[v] >= 0)
            rows.push_back(
                {v, m.nodes[v].name,
                 tr.one_counts[ps.engine_pos[ps.reduced.index_map[v]]]});
        steps_done = tr.steps;
      }
      const std::string csv = stats_csv(rows, steps_done);
      if (!sim_csv.empty())
        write_output(sim_csv, csv);
      else
        std::cout << csv;
    } else if (*cmd_est) {
      const pbn::model m = load_model(est_model);
      const auto pred = parse_predicate(est_pred, m);
      pbn::estimation_request req;
      req.predicate = pred;
      req.precision = est_precision;
      req.confidence = est_confidence;
      pbn::xoshiro256 rng(seed);
      pbn::estimation_result res;
      double prep_seconds = 0.0;
      if (est_method_name == "old") {
        const auto start = std::chrono::steady_clock::now();
        pbn::reference_simulator sim(m);
        const auto cp = pbn::compile_predicate(pred, m);
        prep_seconds = seconds_since(start);
        pbn::state s(sim.state_bits());
        res = pbn::estimate_steady_state(sim, s, cp, req, rng);
      } else if (est_method_name == "grouped") {
        const auto start = std::chrono::steady_clock::now();
        const pbn::prepared_simulation ps = pbn::prepare(m, theta, k_max, max_group_parents);
        const auto cp = pbn::compile_predicate(pred, ps);
        prep_seconds = seconds_since(start);
        pbn::grouped_simulator sim(ps);
        pbn::state s(sim.state_bits());
        res = pbn::estimate_steady_state(sim, s, cp, req, rng);
      } else {
        throw pbn::model_error("estimate supports --method old|grouped");
      }
      std::cout << "estimate " << pbn::format_prob(res.estimate) << "\n"
                << "sample_size " << res.sample_size_used << "\n"
                << "burn_in " << res.burn_in_used << "\n"
                << "preprocessing_seconds " << pbn::format_prob(prep_seconds) << "\n"
                << "simulation_seconds " << pbn::format_prob(res.wall_seconds) << "\n";
      if (res.degenerate) std::cout << "degenerate 1\n";
    } else if (*cmd_pred) {
      std::cout << pbn::format_prob(pbn::predict_speedup(pred_leaves, pred_density)) << "\n";
    } else if (*cmd_bench) {
      std::ifstream cfg(bench_config);
      if (!cfg) throw pbn::model_error("cannot open '" + bench_config + "'");
      bc.corpus = pbn::parse_corpus(cfg);
      bc.methods.clear();
      for (const auto& name : bench_methods) bc.methods.push_back(pbn::parse_method(name));
      bc.theta = theta;
      bc.k_max = k_max;
      bc.max_group_parents = max_group_parents;
      bc.sim_seed = seed;
      const auto records = pbn::run_benchmark(bc);
      std::ostringstream csv;
      pbn::write_benchmark_csv(csv, records, bc.steps);
      write_output(bench_out, csv.str());
      if (!bench_surface.empty()) {
        std::ostringstream surf;
        pbn::write_speedup_surface(surf, records);
        write_output(bench_surface, surf.str());
      }
    }
  } catch (const pbn::resource_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const pbn::model_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
