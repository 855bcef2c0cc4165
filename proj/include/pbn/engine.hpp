#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pbn/alias.hpp"
#include "pbn/bitstate.hpp"
#include "pbn/errors.hpp"
#include "pbn/grouping.hpp"
#include "pbn/model.hpp"
#include "pbn/perturbation.hpp"
#include "pbn/reduction.hpp"

namespace pbn {

// Everything the Preparation step produces: the reduced model, the shared
// perturbation table and mask, the grouping plan with combined functions and
// per-group alias tables, and the node permutation into engine bit order
// (the concatenation of the groups' member lists).
struct prepared_simulation {
  reduced_model reduced;
  perturbation_plan pplan;
  grouping_plan gplan;
  std::vector<std::uint32_t> engine_pos;    // reduced index -> engine bit
  std::vector<std::uint32_t> engine_nodes;  // engine bit -> reduced index

  struct group_exec {
    std::uint32_t offset;                 // cum[i]: bit offset of the group
    std::uint32_t fn_begin;               // first entry in fns for this group
    std::uint32_t alias_begin;            // into alias_prob/alias_idx
    std::uint32_t alias_size;             // 0 when only one combined function
    std::vector<std::uint32_t> gather;    // engine bits of the parent union
  };
  std::vector<group_exec> exec;

  // The groups' alias tables flattened into two contiguous arrays so the hot
  // loop never chases per-group heap pointers.
  std::vector<double> alias_prob;
  std::vector<std::uint32_t> alias_idx;

  // Compact per-combined-function execution data. The plan's combined tables
  // are indexed by the whole group parent union; the hot loop instead gathers
  // only the chosen member functions' own parents and looks up a table sliced
  // down to those bits. The slices are equivalent (a combined function never
  // reads union bits outside its members' chosen parents) but keep the
  // working set cache-resident and the gather width minimal.
  // Gather lists shorter than kFixedGather are padded with the always-zero
  // state bit (index kept_count) so the hot loop can read a fixed number of
  // slots without a data-dependent trip count.
  static constexpr std::uint32_t kFixedGather = 8;

  struct fn_exec {
    std::size_t gather_begin;             // into fn_gather
    std::size_t table_begin;              // into fn_tables, 2^gather_count wide
    std::uint32_t gather_count;
  };
  std::vector<fn_exec> fns;
  std::vector<std::uint32_t> fn_gather;   // engine bit positions
  std::vector<std::uint64_t> fn_tables;   // packed member outputs

  double t() const { return reduced.leaf_no_perturb_prob; }
  std::uint32_t kept_count() const { return reduced.kept_count(); }

  state engine_state_from_reduced(const state& s) const {
    state out(kept_count());
    for (std::uint32_t r = 0; r < kept_count(); ++r)
      if (s.test(r)) out.set(engine_pos[r], true);
    return out;
  }

  state reduced_state_from_engine(const state& s) const {
    state out(kept_count());
    for (std::uint32_t e = 0; e < kept_count(); ++e)
      if (s.test(e)) out.set(engine_nodes[e], true);
    return out;
  }
};

inline constexpr std::uint64_t kDefaultTheta = 1ULL << 25;
inline constexpr std::uint32_t kDefaultGroupWidth = 16;
inline constexpr std::uint32_t kDefaultMaxGroupParents = 18;

inline prepared_simulation prepare(const model& m, std::uint64_t theta = kDefaultTheta,
                                   std::uint32_t k_max = kDefaultGroupWidth,
                                   std::uint32_t max_group_parents = kDefaultMaxGroupParents) {
  prepared_simulation ps;
  ps.reduced = reduce(m);
  const std::uint32_t n = ps.reduced.kept_count();
  if (n == 0) throw model_error("network reduction removed every node");
  ps.pplan = perturbation_plan::build(n, k_max, m.perturbation_rate);
  ps.gplan = partition(ps.reduced, theta, max_group_parents);

  ps.engine_pos.assign(n, 0);
  ps.engine_nodes.clear();
  for (const node_group& g : ps.gplan.groups)
    for (auto v : g.members) {
      ps.engine_pos[v] = static_cast<std::uint32_t>(ps.engine_nodes.size());
      ps.engine_nodes.push_back(v);
    }

  ps.exec.reserve(ps.gplan.groups.size());
  std::vector<std::uint32_t> uni_pos(n, 0);
  std::vector<std::uint32_t> choice, own;
  for (std::size_t i = 0; i < ps.gplan.groups.size(); ++i) {
    const node_group& g = ps.gplan.groups[i];
    prepared_simulation::group_exec ge;
    ge.offset = ps.gplan.cum[i];
    ge.fn_begin = static_cast<std::uint32_t>(ps.fns.size());
    ge.alias_begin = static_cast<std::uint32_t>(ps.alias_prob.size());
    ge.alias_size = 0;
    if (g.alias) {
      ge.alias_size = g.alias->size();
      ps.alias_prob.insert(ps.alias_prob.end(), g.alias->cutoffs().begin(),
                           g.alias->cutoffs().end());
      ps.alias_idx.insert(ps.alias_idx.end(), g.alias->aliases().begin(),
                          g.alias->aliases().end());
    }
    const auto& uni = g.functions.front().parents;
    ge.gather.reserve(uni.size());
    for (auto pidx : uni) ge.gather.push_back(ps.engine_pos[pidx]);
    for (std::uint32_t j = 0; j < uni.size(); ++j) uni_pos[uni[j]] = j;

    choice.assign(g.members.size(), 0);
    for (std::size_t c = 0; c < g.functions.size(); ++c) {
      // Decode the combo index, member 0's choice varying slowest (the
      // order combine() emits).
      std::size_t rem = c;
      for (std::size_t j = g.members.size(); j-- > 0;) {
        const std::uint32_t lc = ps.reduced.kept.nodes[g.members[j]].function_count();
        choice[j] = static_cast<std::uint32_t>(rem % lc);
        rem /= lc;
      }
      own.clear();
      for (std::size_t j = 0; j < g.members.size(); ++j) {
        const auto& ops =
            ps.reduced.kept.nodes[g.members[j]].functions[choice[j]].parents;
        own.insert(own.end(), ops.begin(), ops.end());
      }
      std::sort(own.begin(), own.end());
      own.erase(std::unique(own.begin(), own.end()), own.end());

      prepared_simulation::fn_exec fe;
      fe.gather_begin = ps.fn_gather.size();
      fe.gather_count = static_cast<std::uint32_t>(own.size());
      fe.table_begin = ps.fn_tables.size();
      for (auto pidx : own) ps.fn_gather.push_back(ps.engine_pos[pidx]);
      for (std::size_t b = own.size(); b < prepared_simulation::kFixedGather; ++b)
        ps.fn_gather.push_back(n);  // padding: the always-zero state bit
      const std::uint64_t len = 1ULL << own.size();
      const auto& full = g.functions[c].outputs;
      for (std::uint64_t v = 0; v < len; ++v) {
        std::uint64_t vf = 0;
        for (std::size_t b = 0; b < own.size(); ++b)
          vf |= ((v >> b) & 1ULL) << uni_pos[own[b]];
        ps.fn_tables.push_back(full[vf]);
      }
      ps.fns.push_back(fe);
    }
    ps.exec.push_back(std::move(ge));
  }
  return ps;
}

// Node-by-node stepper: per-node perturbation draws, per-node function
// selection through alias tables, synchronous application.
class reference_simulator {
public:
  explicit reference_simulator(const model& m)
      : model_(&m), gamma_(m.size()), next_(m.size()) {
    selectors_.reserve(m.nodes.size());
    for (const node& nd : m.nodes) {
      if (nd.function_count() > 1)
        selectors_.push_back(alias_table::build(nd.selection_probs));
      else
        selectors_.emplace_back();
    }
  }

  std::uint32_t state_bits() const { return model_->size(); }

  template <class Rng>
  void step(state& s, Rng& rng) {
    if (perturb(s, rng)) return;
    apply_functions(s, rng);
  }

  // Draws the n per-node Bernoulli(p) flips; applies and reports whether any
  // fired (in which case function application is skipped this step).
  template <class Rng>
  bool perturb(state& s, Rng& rng) {
    const double p = model_->perturbation_rate;
    const std::uint32_t n = model_->size();
    gamma_.clear();
    bool any = false;
    for (std::uint32_t i = 0; i < n; ++i)
      if (rng.next_double() < p) {
        gamma_.set(i, true);
        any = true;
      }
    if (any) s.xor_with(gamma_);
    return any;
  }

  template <class Rng>
  void apply_functions(state& s, Rng& rng) {
    next_.clear();
    for (std::uint32_t i = 0; i < model_->size(); ++i) {
      const node& nd = model_->nodes[i];
      const std::uint32_t j = nd.function_count() > 1 ? selectors_[i]->next(rng) : 0;
      if (nd.functions[j].eval(s)) next_.set(i, true);
    }
    s.swap(next_);
  }

private:
  const model* model_;
  std::vector<std::optional<alias_table>> selectors_;
  state gamma_, next_;
};

// Reference stepping on the reduced model plus the constant-time check for
// perturbations of the removed leaves.
class reduced_simulator {
public:
  explicit reduced_simulator(const reduced_model& rm) : rm_(&rm), inner_(rm.kept) {}

  std::uint32_t state_bits() const { return rm_->kept_count(); }
  const reduced_model& reduced() const { return *rm_; }

  template <class Rng>
  void step(state& s, Rng& rng) {
    if (inner_.perturb(s, rng)) return;
    if (check_leaf_perturbation(rm_->leaf_no_perturb_prob, rng.next_double())) return;
    inner_.apply_functions(s, rng);
  }

private:
  const reduced_model* rm_;
  reference_simulator inner_;
};

// The structure-based stepper: grouped perturbation with the shared alias
// table and last-group mask, the leaf check, then one combined-function
// selection and table lookup per group. States are in engine bit order.
class grouped_simulator {
public:
  explicit grouped_simulator(const prepared_simulation& ps)
      : ps_(&ps), next_(ps.kept_count()) {}

  std::uint32_t state_bits() const { return ps_->kept_count(); }
  const prepared_simulation& prepared() const { return *ps_; }

  template <class Rng>
  void step(state& s, Rng& rng) {
    const perturbation_plan& pp = ps_->pplan;
    bool perturbed = false;
    for (std::uint32_t i = 0; i < pp.groups; ++i) {
      std::uint64_t c = pp.table.next(rng);
      if (i + 1 == pp.groups) c &= pp.mask;
      if (c != 0) {
        s.xor_chunk(c, i * pp.k);
        perturbed = true;
      }
    }
    if (perturbed) return;
    if (check_leaf_perturbation(ps_->t(), rng.next_double())) return;

    next_.clear();
    const auto* fns = ps_->fns.data();
    const auto* gbits = ps_->fn_gather.data();
    const auto* tables = ps_->fn_tables.data();
    const auto* aprob = ps_->alias_prob.data();
    const auto* aidx = ps_->alias_idx.data();
    // Raw word pointers: the or-store below cannot alias the vectors'
    // control blocks, but the compiler can only keep the pointers in
    // registers when we hoist them ourselves.
    const std::uint64_t* sw = s.data();
    std::uint64_t* nw = next_.data();
    for (std::size_t i = 0; i < ps_->exec.size(); ++i) {
      const auto& ge = ps_->exec[i];
      std::uint32_t idx = 0;
      if (ge.alias_size != 0) {
        const double u = rng.next_double() * static_cast<double>(ge.alias_size);
        std::uint32_t c = static_cast<std::uint32_t>(u);
        if (c >= ge.alias_size) c = ge.alias_size - 1;
        idx = (u - static_cast<double>(c)) < aprob[ge.alias_begin + c]
                  ? c
                  : aidx[ge.alias_begin + c];
      }
      const auto& fe = fns[ge.fn_begin + idx];
      const std::uint32_t* gb = gbits + fe.gather_begin;
      std::uint64_t v = 0;
      if (fe.gather_count <= prepared_simulation::kFixedGather) {
        // Fixed trip count; padded slots read the always-zero bit.
        for (std::uint32_t b = 0; b < prepared_simulation::kFixedGather; ++b)
          v |= ((sw[gb[b] >> 6] >> (gb[b] & 63)) & 1ULL) << b;
      } else {
        for (std::uint32_t b = 0; b < fe.gather_count; ++b)
          v |= ((sw[gb[b] >> 6] >> (gb[b] & 63)) & 1ULL) << b;
      }
      const std::uint64_t out = tables[fe.table_begin + v];
      const std::uint32_t w = ge.offset >> 6, sh = ge.offset & 63;
      nw[w] |= out << sh;
      if (sh != 0) {
        const std::uint64_t hi = out >> (64 - sh);
        if (hi != 0) nw[w + 1] |= hi;
      }
    }
    s.swap(next_);
  }

private:
  const prepared_simulation* ps_;
  state next_;
};

struct trajectory {
  std::uint64_t steps = 0;
  std::vector<std::uint64_t> one_counts;  // per state bit, when enabled
  std::uint64_t predicate_hits = 0;
};

// Predicate compiled to state-layout bit positions.
using compiled_predicate = std::vector<std::pair<std::uint32_t, bool>>;

inline bool eval_predicate(const compiled_predicate& pred, const state& s) {
  for (const auto& [bit, val] : pred)
    if (s.test(bit) != val) return false;
  return true;
}

inline compiled_predicate compile_predicate(std::span<const predicate_term> pred,
                                            const model& m) {
  compiled_predicate out;
  for (const auto& term : pred) {
    if (term.node >= m.size()) throw model_error("predicate references a nonexistent node");
    out.emplace_back(term.node, term.value);
  }
  return out;
}

inline compiled_predicate compile_predicate(std::span<const predicate_term> pred,
                                            const reduced_model& rm) {
  compiled_predicate out;
  for (const auto& term : pred) {
    if (term.node >= rm.original_n)
      throw model_error("predicate references a nonexistent node");
    const std::int32_t r = rm.index_map[term.node];
    if (r < 0) throw model_error("predicate references a removed leaf node");
    out.emplace_back(static_cast<std::uint32_t>(r), term.value);
  }
  return out;
}

inline compiled_predicate compile_predicate(std::span<const predicate_term> pred,
                                            const prepared_simulation& ps) {
  compiled_predicate out = compile_predicate(pred, ps.reduced);
  for (auto& [bit, val] : out) bit = ps.engine_pos[bit];
  return out;
}

struct sim_options {
  bool count_nodes = true;
  const compiled_predicate* predicate = nullptr;
};

// Applies the stepper `steps` times, accumulating running statistics.
// Identical (stepper, seed, initial state, steps) gives identical results.
template <class Stepper, class Rng>
trajectory simulate(Stepper& stepper, state& s, std::uint64_t steps, Rng& rng,
                    const sim_options& opt = {}) {
  trajectory tr;
  if (opt.count_nodes) tr.one_counts.assign(s.size(), 0);
  for (std::uint64_t step = 0; step < steps; ++step) {
    stepper.step(s, rng);
    if (opt.count_nodes)
      for (std::uint32_t i = 0; i < s.size(); ++i) tr.one_counts[i] += s.test(i);
    if (opt.predicate && eval_predicate(*opt.predicate, s)) ++tr.predicate_hits;
  }
  tr.steps = steps;
  return tr;
}

}  // namespace pbn
