// Shared fixtures and brute-force references for the test binaries.
#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "qdtree/description.h"
#include "qdtree/model.h"
#include "qdtree/tree.h"

namespace qdtree::testing {

inline Value pick(std::mt19937_64& rng, Value lo, Value hi_inclusive) {
  return std::uniform_int_distribution<Value>(lo, hi_inclusive)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) {
  return std::bernoulli_distribution(p)(rng);
}

// Two numeric and one categorical column unless told otherwise.
inline Schema mixed_schema(Value numeric_domain = 50, Value categories = 5) {
  return Schema({{"a", ColumnKind::kNumeric, numeric_domain},
                 {"b", ColumnKind::kNumeric, numeric_domain},
                 {"c", ColumnKind::kCategorical, categories}});
}

inline Dataset random_dataset(const Schema& s, std::size_t rows, std::mt19937_64& rng) {
  std::vector<Value> cells;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < s.size(); ++c) cells.push_back(pick(rng, 0, s.domain(c) - 1));
  }
  return Dataset(s, std::move(cells));
}

inline UnaryPredicate random_predicate(const Schema& s, std::mt19937_64& rng) {
  const auto c = static_cast<std::size_t>(pick(rng, 0, static_cast<Value>(s.size()) - 1));
  const Value dom = s.domain(c);
  if (s.is_numeric(c)) {
    static const CompareOp ops[] = {CompareOp::kLt, CompareOp::kLe, CompareOp::kGt, CompareOp::kGe};
    return UnaryPredicate::compare(s, c, ops[pick(rng, 0, 3)], pick(rng, 0, dom - 1));
  }
  std::vector<Value> vals;
  const Value n = pick(rng, 1, std::min<Value>(3, dom));
  for (Value i = 0; i < n; ++i) vals.push_back(pick(rng, 0, dom - 1));
  return UnaryPredicate::in(s, c, vals);
}

inline AdvancedRegistry two_numeric_cuts(const Schema& s) {
  return {make_advanced_cut(s, 0, 0, CompareOp::kLt, 1),
          make_advanced_cut(s, 1, 0, CompareOp::kGe, 1)};
}

inline Expr random_expr(const Schema& s, std::size_t registry_size, std::mt19937_64& rng,
                        int depth = 0, bool allow_or = true) {
  const int roll = pick(rng, 0, 9);
  if (depth < 2 && roll < 4) {
    std::vector<Expr> kids;
    const int n = pick(rng, 2, 3);
    for (int i = 0; i < n; ++i) kids.push_back(random_expr(s, registry_size, rng, depth + 1, allow_or));
    return allow_or && coin(rng) ? Expr::any(std::move(kids)) : Expr::all(std::move(kids));
  }
  if (registry_size > 0 && roll == 9) {
    return Expr::adv(static_cast<std::size_t>(pick(rng, 0, static_cast<Value>(registry_size) - 1)),
                     coin(rng, 0.3));
  }
  return Expr::leaf(random_predicate(s, rng));
}

// Evaluates a comparison from first principles, independent of the library.
inline bool compare_ref(Value lhs, CompareOp op, Value rhs) {
  switch (op) {
    case CompareOp::kLt: return lhs < rhs;
    case CompareOp::kLe: return lhs <= rhs;
    case CompareOp::kGt: return lhs > rhs;
    case CompareOp::kGe: return lhs >= rhs;
    case CompareOp::kEq: return lhs == rhs;
    case CompareOp::kIn: break;
  }
  return false;
}

inline bool predicate_ref(const UnaryPredicate& p, std::span<const Value> row) {
  const Value v = row[p.column()];
  if (p.op() == CompareOp::kIn || p.op() == CompareOp::kEq) {
    return std::find(p.values().begin(), p.values().end(), v) != p.values().end();
  }
  return compare_ref(v, p.op(), p.literal());
}

inline bool cut_ref(const Cut& c, std::span<const Value> row) {
  if (const auto* p = std::get_if<UnaryPredicate>(&c)) return predicate_ref(*p, row);
  const auto& a = std::get<AdvancedCut>(c);
  return compare_ref(row[a.left], a.op, row[a.right]);
}

inline bool expr_ref(const Expr& e, std::span<const Value> row, const AdvancedRegistry& reg) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    bool acc = b->op == BoolOp::kAnd;
    for (const auto& k : b->children) {
      const bool v = expr_ref(k, row, reg);
      acc = b->op == BoolOp::kAnd ? (acc && v) : (acc || v);
    }
    return acc;
  }
  if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) return predicate_ref(*p, row);
  const auto& a = std::get<AdvancedRef>(e.node);
  const auto& ac = reg.at(a.index);
  return compare_ref(row[ac.left], ac.op, row[ac.right]) != a.negated;
}

// Rows satisfying every cut on the path from the root to `leaf`.
inline std::vector<RowId> path_rows(const QdTree& t, NodeId leaf, const Dataset& data) {
  std::vector<RowId> out;
  for (RowId r = 0; r < data.num_rows(); ++r) {
    bool ok = true;
    for (NodeId n = leaf; t.node(n).parent >= 0 && ok; n = t.node(n).parent) {
      const auto& par = t.node(t.node(n).parent);
      const bool sat = cut_ref(*par.cut, data.row(r));
      ok = (par.left == n) == sat;
    }
    if (ok) out.push_back(r);
  }
  return out;
}

// Splits random leaves with random cuts, skipping degenerate ones.
inline QdTree random_tree(const Schema& s, const AdvancedRegistry& reg, std::size_t splits,
                          std::mt19937_64& rng) {
  QdTree t(s, reg);
  for (std::size_t i = 0, tries = 0; i < splits && tries < splits * 20; ++tries) {
    const auto& leaves = t.leaves();
    const NodeId leaf = leaves[static_cast<std::size_t>(
        pick(rng, 0, static_cast<Value>(leaves.size()) - 1))];
    Cut cut = random_predicate(s, rng);
    if (!reg.empty() && coin(rng, 0.2)) {
      cut = reg[static_cast<std::size_t>(pick(rng, 0, static_cast<Value>(reg.size()) - 1))];
    }
    try {
      t = std::move(t).split(leaf, cut);
      ++i;
    } catch (const std::exception&) {
    }
  }
  return t;
}

}  // namespace qdtree::testing
