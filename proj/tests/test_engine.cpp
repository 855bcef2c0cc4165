#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pbn/engine.hpp"
#include "pbn/exact.hpp"
#include "pbn/generate.hpp"
#include "pbn/io.hpp"

using pbn::model;
using pbn::state;

TEST_CASE("exact transition matrix") {
  SUBCASE("one node, constant-1 function, p=0.1") {
    const model m = pbn::parse_model(
        "pbn 1\nperturbation 0.1\nnode a\n  f 1 1\n");
    const auto mat = pbn::exact_transition_matrix(m);
    CHECK(mat[0 * 2 + 0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(mat[0 * 2 + 1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mat[1 * 2 + 0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(mat[1 * 2 + 1] == doctest::Approx(0.9).epsilon(1e-15));
  }

  SUBCASE("rows sum to 1 and off-diagonal entries are positive") {
    pbn::xoshiro256 rng(71);
    for (int trial = 0; trial < 100; ++trial) {
      const model m = oracles::random_small_model(rng, 4, 0.05 + 0.4 * rng.next_double());
      const auto mat = pbn::exact_transition_matrix(m);
      const std::uint64_t states = 1ULL << m.size();
      for (std::uint64_t s = 0; s < states; ++s) {
        double sum = 0.0;
        for (std::uint64_t sp = 0; sp < states; ++sp) {
          sum += mat[s * states + sp];
          if (sp != s) REQUIRE(mat[s * states + sp] > 0.0);
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }

  SUBCASE("size limit enforced") {
    pbn::xoshiro256 rng(72);
    const model m = oracles::random_small_model(rng, 4, 0.1);
    CHECK_THROWS_AS(
        [&] {
          model big = m;
          big.nodes.resize(13, m.nodes[0]);
          for (std::uint32_t i = 4; i < 13; ++i) big.nodes[i].name = "y" + std::to_string(i);
          return pbn::exact_transition_matrix(big);
        }(),
        pbn::resource_error);
  }
}

TEST_CASE("stationary distribution oracle") {
  SUBCASE("constant-1 node at p=0.1: pi(1) = 10/11") {
    const model m = pbn::parse_model(
        "pbn 1\nperturbation 0.1\nnode a\n  f 1 1\n");
    const std::vector<pbn::predicate_term> pred{{0, true}};
    CHECK(pbn::marginal_steady_state_exact(m, pred) ==
          doctest::Approx(10.0 / 11.0).epsilon(1e-10));
  }

  SUBCASE("identity node at p=0.5 is uniform") {
    const model m = pbn::parse_model(
        "pbn 1\nperturbation 0.5\nnode a\n  f 1 10 a\n");
    const std::vector<pbn::predicate_term> pred{{0, true}};
    CHECK(pbn::marginal_steady_state_exact(m, pred) == doctest::Approx(0.5).epsilon(1e-10));
  }

  SUBCASE("fixed point property on random models") {
    pbn::xoshiro256 rng(73);
    for (int trial = 0; trial < 50; ++trial) {
      const model m = oracles::random_small_model(rng, 4, 0.25);
      const std::uint64_t states = 1ULL << m.size();
      const auto mat = pbn::exact_transition_matrix(m);
      const auto pi = pbn::stationary_distribution(mat, states);
      for (std::uint64_t sp = 0; sp < states; ++sp) {
        double next = 0.0;
        for (std::uint64_t s = 0; s < states; ++s) next += pi[s] * mat[s * states + sp];
        REQUIRE(std::abs(next - pi[sp]) <= 1e-11);
      }
    }
  }
}

TEST_CASE("reference stepper follows Eq. 1 on forced draws") {
  const model m = pbn::parse_model(
      "pbn 2\n"
      "perturbation 0.4\n"
      "node x0\n"
      "  f 1 10 x0\n"
      "node x1\n"
      "  f 1 10 x1\n");
  pbn::reference_simulator sim(m);

  SUBCASE("no perturbation, identity functions keep the state") {
    state s = state::from_uint(0b01, 2);
    oracles::scripted_rng rng({0.9, 0.9});  // both draws above p
    sim.step(s, rng);
    CHECK(s.to_uint() == 0b01);
  }

  SUBCASE("forced full perturbation flips both bits, functions skipped") {
    state s = state::from_uint(0b01, 2);
    oracles::scripted_rng rng({0.1, 0.1});  // both below p
    sim.step(s, rng);
    CHECK(s.to_uint() == 0b10);
    CHECK(rng.consumed() == 2);  // no selection draws happened
  }
}

TEST_CASE("grouped stepper hand-traced perturbation") {
  // Four identity nodes, k_max=2 -> two groups of 2; force c=0b01 in group 1.
  const model m = pbn::parse_model(
      "pbn 4\n"
      "perturbation 0.2\n"
      "node x0\n  f 1 10 x0\n"
      "node x1\n  f 1 10 x1\n"
      "node x2\n  f 1 10 x2\n"
      "node x3\n  f 1 10 x3\n");
  const auto ps = pbn::prepare(m, 1ULL << 20, 2, 18);
  REQUIRE(ps.pplan.groups == 2);
  REQUIRE(ps.pplan.k == 2);
  pbn::grouped_simulator sim(ps);

  // Find a single uniform that makes the shared table emit the wanted cell
  // (integer part of u*n picks the cell, fractional part is the coin).
  const auto& t = ps.pplan.table;
  auto find_uniform = [&](std::uint64_t want) -> double {
    for (std::uint32_t cell = 0; cell < t.size(); ++cell) {
      if (t.cutoffs()[cell] > 0.0 && cell == want)
        return (cell + t.cutoffs()[cell] * 0.5) / t.size();
      if (t.cutoffs()[cell] < 1.0 && t.aliases()[cell] == want)
        return (cell + t.cutoffs()[cell] + (1.0 - t.cutoffs()[cell]) * 0.5) / t.size();
    }
    FAIL("pattern not reachable");
    return 0.0;
  };
  const double z = find_uniform(0);
  const double o = find_uniform(0b01);

  state s(4);
  oracles::scripted_rng rng({z, o});
  sim.step(s, rng);
  CHECK(rng.consumed() == 2);  // one draw per group, perturbed -> no leaf check
  CHECK(s.test(2));            // bit at offset 2 (group 1, low bit) flipped
  CHECK_FALSE(s.test(0));
  CHECK_FALSE(s.test(1));
  CHECK_FALSE(s.test(3));
}

TEST_CASE("prepare") {
  SUBCASE("no leaves: t = 1, reduction is the identity") {
    pbn::xoshiro256 rng(81);
    const model m = oracles::random_small_model(rng, 5, 0.1);
    const auto ps = pbn::prepare(m);
    CHECK(ps.t() == 1.0);
    CHECK(ps.kept_count() == 5);
  }

  SUBCASE("96 nodes with 37.5% leaves keeps 60") {
    pbn::generator_params gp;
    gp.n = 96;
    gp.target_density = 1.78;
    gp.leaf_pct = 0.375;
    gp.seed = 9;
    const auto ps = pbn::prepare(pbn::generate_random(gp));
    CHECK(ps.kept_count() == 60);
  }

  SUBCASE("deterministic") {
    pbn::generator_params gp;
    gp.n = 40;
    gp.target_density = 2.0;
    gp.leaf_pct = 0.3;
    gp.seed = 10;
    const model m = pbn::generate_random(gp);
    const auto a = pbn::prepare(m);
    const auto b = pbn::prepare(m);
    CHECK(a.engine_nodes == b.engine_nodes);
    CHECK(a.gplan.cum == b.gplan.cum);
    REQUIRE(a.gplan.groups.size() == b.gplan.groups.size());
    for (std::size_t i = 0; i < a.gplan.groups.size(); ++i) {
      CHECK(a.gplan.groups[i].members == b.gplan.groups[i].members);
      REQUIRE(a.gplan.groups[i].functions.size() == b.gplan.groups[i].functions.size());
      for (std::size_t j = 0; j < a.gplan.groups[i].functions.size(); ++j)
        CHECK(a.gplan.groups[i].functions[j].outputs == b.gplan.groups[i].functions[j].outputs);
    }
  }

  SUBCASE("compact per-function tables are faithful slices of the combined tables") {
    pbn::xoshiro256 rng(83);
    for (int trial = 0; trial < 10; ++trial) {
      const model m = oracles::random_small_model(rng, 6, 0.1);
      const auto ps = pbn::prepare(m);
      for (std::size_t i = 0; i < ps.gplan.groups.size(); ++i) {
        const auto& g = ps.gplan.groups[i];
        const auto& uni = g.functions.front().parents;
        for (std::size_t c = 0; c < g.functions.size(); ++c) {
          const auto& fe = ps.fns[ps.exec[i].fn_begin + c];
          // Every union valuation, restricted to the compact gather bits,
          // must hit a table entry equal to the full combined output.
          for (std::uint64_t v = 0; v < g.functions[c].outputs.size(); ++v) {
            std::uint64_t vs = 0;
            for (std::uint32_t b = 0; b < fe.gather_count; ++b) {
              const std::uint32_t node =
                  ps.engine_nodes[ps.fn_gather[fe.gather_begin + b]];
              std::uint32_t pos = 0;
              while (uni[pos] != node) ++pos;
              vs |= ((v >> pos) & 1ULL) << b;
            }
            REQUIRE(ps.fn_tables[fe.table_begin + vs] == g.functions[c].outputs[v]);
          }
        }
      }
    }
  }

  SUBCASE("engine permutation is a bijection consistent with groups") {
    pbn::generator_params gp;
    gp.n = 50;
    gp.target_density = 2.0;
    gp.leaf_pct = 0.2;
    gp.seed = 11;
    const auto ps = pbn::prepare(pbn::generate_random(gp));
    for (std::uint32_t r = 0; r < ps.kept_count(); ++r)
      CHECK(ps.engine_nodes[ps.engine_pos[r]] == r);
    std::uint32_t bit = 0;
    for (std::size_t i = 0; i < ps.gplan.groups.size(); ++i) {
      CHECK(ps.exec[i].offset == bit);
      for (auto v : ps.gplan.groups[i].members) CHECK(ps.engine_pos[v] == bit++);
    }
  }
}

TEST_CASE("one-step distributions match the exact matrix (small random models)") {
  pbn::xoshiro256 rng(82);
  for (int trial = 0; trial < 40; ++trial) {
    const std::uint32_t n = 2 + rng.next_u64() % 5;
    const double p = (trial % 2) ? 0.25 : 0.01;
    const model m = oracles::random_small_model(rng, n, p);
    const auto mat = pbn::exact_transition_matrix(m);
    const auto ps = pbn::prepare(m, 1ULL << 20, 3, 18);
    const std::uint64_t states = 1ULL << n;
    for (std::uint64_t s = 0; s < states; ++s) {
      const auto ref = oracles::reference_row(m, s);
      const auto grp = oracles::grouped_row(ps, oracles::model_to_engine(ps, s));
      for (std::uint64_t sp = 0; sp < states; ++sp) {
        REQUIRE(std::abs(ref[sp] - mat[s * states + sp]) <= 1e-10);
        REQUIRE(std::abs(grp[oracles::model_to_engine(ps, sp)] - mat[s * states + sp]) <=
                1e-10);
      }
    }
  }
}

TEST_CASE("reduced stepper one-step distribution matches the folded matrix") {
  pbn::xoshiro256 rng(83);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 10; ++trial) {
    model m = oracles::random_small_model(rng, 6, 0.1, 2, 2);
    m.interest = {0, 1, 2};
    const auto rm = pbn::reduce(m);
    if (rm.removed.empty()) continue;
    ++checked;
    const auto mat = pbn::exact_transition_matrix(rm.kept, rm.leaf_no_perturb_prob);
    const std::uint64_t states = 1ULL << rm.kept_count();
    for (std::uint64_t s = 0; s < states; ++s) {
      const auto row = oracles::reference_row(rm.kept, s, rm.leaf_no_perturb_prob);
      for (std::uint64_t sp = 0; sp < states; ++sp)
        REQUIRE(std::abs(row[sp] - mat[s * states + sp]) <= 1e-10);
    }
  }
  CHECK(checked == 10);
}

TEST_CASE("simulate") {
  const model m = pbn::parse_model(
      "pbn 1\nperturbation 0.5\nnode a\n  f 1 10 a\n");

  SUBCASE("zero steps leaves everything untouched") {
    pbn::reference_simulator sim(m);
    state s = state::from_uint(1, 1);
    pbn::xoshiro256 rng(1);
    const auto tr = pbn::simulate(sim, s, 0, rng);
    CHECK(tr.steps == 0);
    CHECK(tr.one_counts == std::vector<std::uint64_t>{0});
    CHECK(s.to_uint() == 1);
  }

  SUBCASE("identity node at p=0.5 spends half its time at 1") {
    pbn::reference_simulator sim(m);
    state s(1);
    pbn::xoshiro256 rng(2);
    const auto tr = pbn::simulate(sim, s, 1000000, rng);
    const double freq = static_cast<double>(tr.one_counts[0]) / 1e6;
    CHECK(std::abs(freq - 0.5) < 0.002);
  }

  SUBCASE("same seed, same counts; different seed differs") {
    pbn::generator_params gp;
    gp.n = 30;
    gp.target_density = 2.0;
    gp.leaf_pct = 0.2;
    gp.seed = 5;
    gp.perturbation_rate = 0.01;
    const model g = pbn::generate_random(gp);
    const auto ps = pbn::prepare(g);
    pbn::grouped_simulator sim(ps);
    auto run = [&](std::uint64_t seed) {
      state s(sim.state_bits());
      pbn::xoshiro256 rng(seed);
      return pbn::simulate(sim, s, 20000, rng).one_counts;
    };
    CHECK(run(42) == run(42));
    CHECK(run(42) != run(43));
  }

  SUBCASE("predicate hit counting") {
    pbn::reference_simulator sim(m);
    const std::vector<pbn::predicate_term> pred{{0, true}};
    const auto cp = pbn::compile_predicate(pred, m);
    state s(1);
    pbn::xoshiro256 rng(3);
    pbn::sim_options opt;
    opt.predicate = &cp;
    const auto tr = pbn::simulate(sim, s, 10000, rng, opt);
    CHECK(tr.predicate_hits == tr.one_counts[0]);
  }
}

TEST_CASE("predicate compilation") {
  model m = pbn::parse_model(
      "pbn 3\n"
      "perturbation 0.01\n"
      "node a\n  f 1 10 a\n"
      "node b\n  f 1 10 a\n"
      "node c\n  f 1 10 b\n");
  m.interest = {0, 1};
  const auto rm = pbn::reduce(m);
  REQUIRE(rm.removed == std::vector<std::uint32_t>{2});

  const std::vector<pbn::predicate_term> ok{{1, true}};
  const std::vector<pbn::predicate_term> leafy{{2, false}};
  const std::vector<pbn::predicate_term> bogus{{7, true}};

  CHECK(pbn::compile_predicate(ok, rm).size() == 1);
  CHECK_THROWS_AS(pbn::compile_predicate(leafy, rm), pbn::model_error);
  CHECK_THROWS_AS(pbn::compile_predicate(bogus, m), pbn::model_error);

  // Engine-space compilation lands on the permuted bit.
  const auto ps = pbn::prepare(m);
  const auto cp = pbn::compile_predicate(ok, ps);
  REQUIRE(cp.size() == 1);
  CHECK(cp[0].first == ps.engine_pos[rm.index_map[1]]);
}

TEST_CASE("all three steppers agree statistically") {
  pbn::generator_params gp;
  gp.n = 24;
  gp.target_density = 2.0;
  gp.leaf_pct = 0.25;
  gp.seed = 77;
  gp.perturbation_rate = 0.05;
  const model m = pbn::generate_random(gp);
  const auto rm = pbn::reduce(m);
  const auto ps = pbn::prepare(m);
  const std::uint64_t steps = 400000;

  pbn::reference_simulator ref(m);
  state s1(ref.state_bits());
  pbn::xoshiro256 r1(1);
  const auto t1 = pbn::simulate(ref, s1, steps, r1);

  pbn::reduced_simulator red(rm);
  state s2(red.state_bits());
  pbn::xoshiro256 r2(2);
  const auto t2 = pbn::simulate(red, s2, steps, r2);

  pbn::grouped_simulator grp(ps);
  state s3(grp.state_bits());
  pbn::xoshiro256 r3(3);
  const auto t3 = pbn::simulate(grp, s3, steps, r3);

  for (std::uint32_t v = 0; v < m.size(); ++v) {
    if (rm.index_map[v] < 0) continue;
    const double f1 = static_cast<double>(t1.one_counts[v]) / steps;
    const double f2 = static_cast<double>(t2.one_counts[rm.index_map[v]]) / steps;
    const double f3 =
        static_cast<double>(t3.one_counts[ps.engine_pos[rm.index_map[v]]]) / steps;
    REQUIRE(std::abs(f1 - f2) < 0.02);
    REQUIRE(std::abs(f1 - f3) < 0.02);
  }
}
