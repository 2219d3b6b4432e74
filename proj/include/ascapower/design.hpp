#pragma once
// Declarative experimental-design model.
//
// A design is a set of factors (crossed or nested) and interactions.  From a
// model we generate balanced run tables (optionally enlarged by whole-design
// replication or by raising one factor's level count), sum-coded regression
// matrices, degrees of freedom, and the ancestor/descendant ordering among
// effects that drives F-ratio denominator pooling.
//
// Conventions (fixed, documented):
//   - Levels are enumerated in declaration order; the last level of every
//     sum contrast carries the -1 row.
//   - A nested factor's level index is global: cell * r + within, where the
//     cell enumerates its direct parents' global levels in nested_in order
//     (first parent major) and r is the per-cell level count.
//   - An interaction's cell index enumerates its member factors' global
//     levels in member order (first member major).

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ascapower/distribution.hpp"

namespace ascapower {

using EffectId = std::string;

struct FactorSpec {
  EffectId id;
  std::string name;  // display label; empty means use id
  int levels = 0;    // per ancestor cell when nested
  std::vector<EffectId> nested_in;  // direct parents; empty = top-level
  Distribution dist;
  double coeff = 0.0;  // standard-deviation coefficient k_f

  const std::string& label() const { return name.empty() ? id : name; }
};

struct InteractionSpec {
  EffectId id;
  std::vector<EffectId> factors;  // >= 2 member factor ids
  Distribution dist;
  double coeff = 0.0;  // k_i

  const std::string& label() const { return id; }
};

struct DesignModel {
  std::vector<FactorSpec> factors;
  std::vector<InteractionSpec> interactions;
  double residual_coeff = 1.0;  // k_e
  Distribution residual_dist;

  const FactorSpec* find_factor(const EffectId& id) const {
    for (const auto& f : factors)
      if (f.id == id) return &f;
    return nullptr;
  }
  const InteractionSpec* find_interaction(const EffectId& id) const {
    for (const auto& i : interactions)
      if (i.id == id) return &i;
    return nullptr;
  }
  bool has_effect(const EffectId& id) const {
    return find_factor(id) != nullptr || find_interaction(id) != nullptr;
  }
  // Factors first, then interactions, both in declaration order.
  std::vector<EffectId> effect_order() const {
    std::vector<EffectId> out;
    out.reserve(factors.size() + interactions.size());
    for (const auto& f : factors) out.push_back(f.id);
    for (const auto& i : interactions) out.push_back(i.id);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

// Transitive ancestor set of a factor (its parents, their parents, ...).
// Tolerates malformed models: unknown ids are skipped, cycles are cut.
inline void collect_ancestors(const DesignModel& m, const EffectId& id,
                              std::set<EffectId>& out) {
  const FactorSpec* f = m.find_factor(id);
  if (!f) return;
  for (const auto& p : f->nested_in) {
    if (out.insert(p).second) collect_ancestors(m, p, out);
  }
}

}  // namespace detail

// Returns every invariant violation with a human-readable location; empty
// means the model is well formed.  Violations are data, not failures.
inline std::vector<std::string> validate_model(const DesignModel& m) {
  std::vector<std::string> v;
  std::set<EffectId> seen;
  for (const auto& f : m.factors) {
    if (f.id.empty()) v.push_back("factor with empty id");
    if (!seen.insert(f.id).second)
      v.push_back("duplicate effect id '" + f.id + "'");
    if (f.levels < 2)
      v.push_back("factor '" + f.id + "': levels must be >= 2 (got " +
                  std::to_string(f.levels) + ")");
    if (f.coeff < 0.0)
      v.push_back("factor '" + f.id + "': coeff must be >= 0");
    std::set<EffectId> parents;
    for (const auto& p : f.nested_in) {
      if (p == f.id) v.push_back("factor '" + f.id + "' nested in itself");
      if (!m.find_factor(p))
        v.push_back("factor '" + f.id + "': unknown parent '" + p + "'");
      if (!parents.insert(p).second)
        v.push_back("factor '" + f.id + "': duplicate parent '" + p + "'");
    }
    std::set<EffectId> anc;
    detail::collect_ancestors(m, f.id, anc);
    if (anc.count(f.id))
      v.push_back("factor '" + f.id + "': nesting cycle");
  }
  for (const auto& i : m.interactions) {
    if (i.id.empty()) v.push_back("interaction with empty id");
    if (!seen.insert(i.id).second)
      v.push_back("duplicate effect id '" + i.id + "'");
    if (i.factors.size() < 2)
      v.push_back("interaction '" + i.id + "': needs >= 2 factors");
    if (i.coeff < 0.0)
      v.push_back("interaction '" + i.id + "': coeff must be >= 0");
    std::set<EffectId> members;
    for (const auto& fid : i.factors) {
      if (!m.find_factor(fid))
        v.push_back("interaction '" + i.id + "': unknown factor '" + fid +
                    "'");
      if (!members.insert(fid).second)
        v.push_back("interaction '" + i.id + "': duplicate factor '" + fid +
                    "'");
    }
    // No member may be nested (transitively) inside another member.
    for (const auto& fid : i.factors) {
      std::set<EffectId> anc;
      detail::collect_ancestors(m, fid, anc);
      for (const auto& other : i.factors) {
        if (other != fid && anc.count(other))
          v.push_back("interaction '" + i.id + "' contains nested pair ('" +
                      fid + "' is nested in '" + other + "')");
      }
    }
  }
  if (!(m.residual_coeff > 0.0))
    v.push_back("residual coeff k_e must be > 0");
  return v;
}

inline void require_valid(const DesignModel& m) {
  auto v = validate_model(m);
  if (v.empty()) return;
  std::string msg = "invalid design model:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Run tables

struct ReplicationPlan {
  enum class Kind { kBase, kWholeExperiment, kFactorLevels };
  Kind kind = Kind::kBase;
  EffectId factor;  // for kFactorLevels
  int eta = 1;      // replication count or new level count

  static ReplicationPlan base() { return {}; }
  static ReplicationPlan whole_experiment(int eta) {
    return {Kind::kWholeExperiment, {}, eta};
  }
  static ReplicationPlan factor_levels(EffectId f, int eta) {
    return {Kind::kFactorLevels, std::move(f), eta};
  }
};

struct RunTable {
  int n_runs = 0;
  std::vector<EffectId> factor_ids;       // model declaration order
  std::vector<std::vector<int>> columns;  // [factor][run] global level index
  std::vector<int> global_levels;         // per factor
  std::vector<int> levels_per_cell;       // r_f; equals global for top-level
  std::vector<int> ancestor_cells;        // global_levels / levels_per_cell

  int factor_index(const EffectId& id) const {
    for (std::size_t i = 0; i < factor_ids.size(); ++i)
      if (factor_ids[i] == id) return static_cast<int>(i);
    throw std::invalid_argument("unknown factor '" + id + "' in run table");
  }
  int level(int factor_idx, int run) const { return columns[factor_idx][run]; }

  // Cell index of an interaction at a run: member factors' global levels in
  // member order, first member major.
  int interaction_cell(const InteractionSpec& spec, int run) const {
    int idx = 0;
    for (const auto& fid : spec.factors) {
      const int fi = factor_index(fid);
      idx = idx * global_levels[fi] + columns[fi][run];
    }
    return idx;
  }
  int interaction_cells(const InteractionSpec& spec) const {
    int n = 1;
    for (const auto& fid : spec.factors) n *= global_levels[factor_index(fid)];
    return n;
  }
};

namespace detail {

// Per-factor level counts after applying a factor-enlargement override.
inline int planned_levels(const FactorSpec& f, const ReplicationPlan& plan) {
  if (plan.kind == ReplicationPlan::Kind::kFactorLevels && plan.factor == f.id)
    return plan.eta;
  return f.levels;
}

}  // namespace detail

// Full-factorial crossing of top-level factor levels and nested cells.
// whole_experiment(eta) repeats every base run eta times (copies adjacent);
// factor_levels(f, eta) regenerates the full factorial with f's level count
// set to eta (nested children and interactions grow accordingly).
inline RunTable build_run_table(const DesignModel& model,
                                const ReplicationPlan& plan =
                                    ReplicationPlan::base()) {
  require_valid(model);
  if (plan.eta < 1)
    throw std::invalid_argument("replication eta must be >= 1 (got " +
                                std::to_string(plan.eta) + ")");
  if (plan.kind == ReplicationPlan::Kind::kFactorLevels &&
      !model.find_factor(plan.factor))
    throw std::invalid_argument("replication plan names unknown factor '" +
                                plan.factor + "'");
  if (plan.kind == ReplicationPlan::Kind::kFactorLevels && plan.eta < 2)
    throw std::invalid_argument("factor level count must be >= 2");

  const int nf = static_cast<int>(model.factors.size());
  RunTable t;
  t.factor_ids.reserve(nf);
  for (const auto& f : model.factors) t.factor_ids.push_back(f.id);

  // Global level counts, resolved in dependency order.
  t.global_levels.assign(nf, 0);
  t.levels_per_cell.assign(nf, 0);
  t.ancestor_cells.assign(nf, 0);
  std::vector<int> order;  // indices in an order where parents precede
  {
    std::vector<char> done(nf, 0);
    // Simple fixed-point pass; validate_model guarantees a DAG.
    bool progress = true;
    while (static_cast<int>(order.size()) < nf && progress) {
      progress = false;
      for (int i = 0; i < nf; ++i) {
        if (done[i]) continue;
        bool ready = true;
        for (const auto& p : model.factors[i].nested_in)
          if (!done[t.factor_index(p)]) ready = false;
        if (ready) {
          done[i] = 1;
          order.push_back(i);
          progress = true;
        }
      }
    }
    if (static_cast<int>(order.size()) != nf)
      throw std::logic_error("factor nesting is not a DAG");
  }
  for (int i : order) {
    const auto& f = model.factors[i];
    const int r = detail::planned_levels(f, plan);
    int cells = 1;
    for (const auto& p : f.nested_in) cells *= t.global_levels[t.factor_index(p)];
    t.levels_per_cell[i] = r;
    t.ancestor_cells[i] = cells;
    t.global_levels[i] = cells * r;
  }

  // Base runs: mixed-radix product over declaration-order slots (top-level:
  // level; nested: within-cell replicate), last slot varying fastest.
  long base_runs = 1;
  std::vector<int> radix(nf);
  for (int i = 0; i < nf; ++i) {
    radix[i] = t.levels_per_cell[i];
    base_runs *= radix[i];
  }
  if (base_runs > 10'000'000)
    throw std::invalid_argument("design too large: " +
                                std::to_string(base_runs) + " base runs");

  const int eta_whole =
      plan.kind == ReplicationPlan::Kind::kWholeExperiment ? plan.eta : 1;
  t.n_runs = static_cast<int>(base_runs) * eta_whole;
  t.columns.assign(nf, std::vector<int>(t.n_runs, 0));

  std::vector<int> slot(nf, 0);
  std::vector<int> global(nf, 0);
  int run = 0;
  for (long b = 0; b < base_runs; ++b) {
    // Resolve global indices, parents before children.
    for (int i : order) {
      const auto& f = model.factors[i];
      if (f.nested_in.empty()) {
        global[i] = slot[i];
      } else {
        int cell = 0;
        for (const auto& p : f.nested_in) {
          const int pi = t.factor_index(p);
          cell = cell * t.global_levels[pi] + global[pi];
        }
        global[i] = cell * t.levels_per_cell[i] + slot[i];
      }
    }
    for (int copy = 0; copy < eta_whole; ++copy, ++run)
      for (int i = 0; i < nf; ++i) t.columns[i][run] = global[i];
    // Advance mixed radix, last slot fastest.
    for (int i = nf - 1; i >= 0; --i) {
      if (++slot[i] < radix[i]) break;
      slot[i] = 0;
    }
  }
  return t;
}

// Checks an externally supplied run table (e.g. CSV ingestion) against the
// model: level ranges and nested-index consistency.  Returns violations.
inline std::vector<std::string> validate_run_table(const DesignModel& model,
                                                   const RunTable& t) {
  std::vector<std::string> v;
  const int nf = static_cast<int>(model.factors.size());
  if (static_cast<int>(t.factor_ids.size()) != nf ||
      static_cast<int>(t.columns.size()) != nf) {
    v.push_back("run table does not cover every model factor");
    return v;
  }
  for (int i = 0; i < nf; ++i) {
    const auto& f = model.factors[i];
    if (t.factor_ids[i] != f.id)
      v.push_back("run-table column " + std::to_string(i) + " is '" +
                  t.factor_ids[i] + "', expected '" + f.id + "'");
  }
  if (!v.empty()) return v;
  for (int i = 0; i < nf; ++i) {
    const auto& f = model.factors[i];
    for (int n = 0; n < t.n_runs; ++n) {
      const int g = t.columns[i][n];
      if (g < 0 || g >= t.global_levels[i]) {
        v.push_back("run " + std::to_string(n) + ", factor '" + f.id +
                    "': level index " + std::to_string(g) +
                    " out of range [0, " +
                    std::to_string(t.global_levels[i]) + ")");
        continue;
      }
      if (!f.nested_in.empty()) {
        int cell = 0;
        for (const auto& p : f.nested_in) {
          const int pi = t.factor_index(p);
          cell = cell * t.global_levels[pi] + t.columns[pi][n];
        }
        if (g / t.levels_per_cell[i] != cell)
          v.push_back("run " + std::to_string(n) + ", factor '" + f.id +
                      "': nested level " + std::to_string(g) +
                      " inconsistent with parent levels");
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Degrees of freedom

struct DofTable {
  std::vector<std::pair<EffectId, int>> effects;  // effect order
  int residual = 0;
  int total = 0;  // = N: intercept + effects + residual

  int effect_dof(const EffectId& id) const {
    for (const auto& [eid, d] : effects)
      if (eid == id) return d;
    throw std::invalid_argument("unknown effect '" + id + "'");
  }
};

// Factor DoF: L-1 for top-level, cells*(r-1) for nested.  Interaction DoF:
// product of member factor DoFs.  Residual: (N-1) - sum of effect DoFs.
inline DofTable degrees_of_freedom(const DesignModel& model,
                                   const RunTable& t) {
  DofTable d;
  std::map<EffectId, int> factor_dof;
  for (std::size_t i = 0; i < model.factors.size(); ++i) {
    const auto& f = model.factors[i];
    const int dof = t.ancestor_cells[i] * (t.levels_per_cell[i] - 1);
    factor_dof[f.id] = dof;
    d.effects.emplace_back(f.id, dof);
  }
  for (const auto& ia : model.interactions) {
    int dof = 1;
    for (const auto& fid : ia.factors) dof *= factor_dof.at(fid);
    d.effects.emplace_back(ia.id, dof);
  }
  int sum = 0;
  for (const auto& [id, dof] : d.effects) sum += dof;
  d.residual = (t.n_runs - 1) - sum;
  d.total = t.n_runs;
  if (d.residual <= 0)
    throw std::runtime_error(
        "saturated design: residual degrees of freedom = " +
        std::to_string(d.residual));
  return d;
}

// ---------------------------------------------------------------------------
// Descendants (Hasse ordering)

// For a factor: its nested factors plus every interaction containing it; for
// an interaction: higher-order interactions containing all its members.
// Transitively closed.
inline std::set<EffectId> descendants(const DesignModel& model,
                                      const EffectId& id) {
  if (!model.has_effect(id))
    throw std::invalid_argument("unknown effect '" + id + "'");
  std::set<EffectId> out;
  std::vector<EffectId> frontier{id};
  while (!frontier.empty()) {
    const EffectId cur = frontier.back();
    frontier.pop_back();
    std::vector<EffectId> direct;
    if (model.find_factor(cur)) {
      for (const auto& f : model.factors)
        if (std::find(f.nested_in.begin(), f.nested_in.end(), cur) !=
            f.nested_in.end())
          direct.push_back(f.id);
      for (const auto& ia : model.interactions)
        if (std::find(ia.factors.begin(), ia.factors.end(), cur) !=
            ia.factors.end())
          direct.push_back(ia.id);
    } else {
      const auto* ia = model.find_interaction(cur);
      for (const auto& other : model.interactions) {
        if (other.id == cur) continue;
        bool contains_all = true;
        for (const auto& fid : ia->factors)
          if (std::find(other.factors.begin(), other.factors.end(), fid) ==
              other.factors.end())
            contains_all = false;
        if (contains_all) direct.push_back(other.id);
      }
    }
    for (const auto& nid : direct)
      if (nid != id && out.insert(nid).second) frontier.push_back(nid);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sum-coded regression matrix

struct CodingMatrix {
  Eigen::MatrixXd matrix;  // N x (1 + sum of effect DoFs); column 0 is 1s
  struct Span {
    EffectId id;
    int offset = 0;
    int width = 0;
  };
  std::vector<Span> spans;  // effect order

  const Span& span(const EffectId& id) const {
    for (const auto& s : spans)
      if (s.id == id) return s;
    throw std::invalid_argument("no coding span for effect '" + id + "'");
  }
  int columns() const { return static_cast<int>(matrix.cols()); }
  int runs() const { return static_cast<int>(matrix.rows()); }
};

// Sum coding.  Top-level factor with L levels: L-1 columns, level l < L-1 is
// the indicator of level l minus the indicator of level L-1.  Nested factor:
// per ancestor cell, (r-1) such contrasts over the within-cell index, zero
// outside the cell.  Interaction: all element-wise products of one column
// from each member block, first member major.
inline CodingMatrix build_coding_matrix(const RunTable& t,
                                        const DesignModel& model) {
  require_valid(model);
  {
    auto v = validate_run_table(model, t);
    if (!v.empty()) {
      std::string msg = "run table does not match model:";
      for (const auto& s : v) msg += "\n  - " + s;
      throw std::invalid_argument(msg);
    }
  }
  const int n = t.n_runs;
  std::map<EffectId, Eigen::MatrixXd> factor_blocks;

  for (std::size_t i = 0; i < model.factors.size(); ++i) {
    const auto& f = model.factors[i];
    const int r = t.levels_per_cell[i];
    const int cells = t.ancestor_cells[i];
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, cells * (r - 1));
    for (int run = 0; run < n; ++run) {
      const int g = t.columns[i][run];
      const int cell = g / r;
      const int within = g % r;
      const int off = cell * (r - 1);
      if (within == r - 1) {
        for (int j = 0; j < r - 1; ++j) block(run, off + j) = -1.0;
      } else {
        block(run, off + within) = 1.0;
      }
    }
    factor_blocks[f.id] = std::move(block);
  }

  std::vector<std::pair<EffectId, Eigen::MatrixXd>> blocks;
  for (const auto& f : model.factors)
    blocks.emplace_back(f.id, factor_blocks.at(f.id));
  for (const auto& ia : model.interactions) {
    Eigen::MatrixXd prod = Eigen::MatrixXd::Ones(n, 1);
    for (const auto& fid : ia.factors) {
      const Eigen::MatrixXd& fb = factor_blocks.at(fid);
      Eigen::MatrixXd next(n, prod.cols() * fb.cols());
      for (int a = 0; a < prod.cols(); ++a)
        for (int b = 0; b < fb.cols(); ++b)
          next.col(a * fb.cols() + b) =
              prod.col(a).array() * fb.col(b).array();
      prod = std::move(next);
    }
    blocks.emplace_back(ia.id, std::move(prod));
  }

  int total_cols = 1;
  for (const auto& [id, b] : blocks) total_cols += static_cast<int>(b.cols());
  CodingMatrix cm;
  cm.matrix.resize(n, total_cols);
  cm.matrix.col(0).setOnes();
  int off = 1;
  for (auto& [id, b] : blocks) {
    cm.matrix.middleCols(off, b.cols()) = b;
    cm.spans.push_back({id, off, static_cast<int>(b.cols())});
    off += static_cast<int>(b.cols());
  }
  return cm;
}

}  // namespace ascapower
