#include "qdtree/greedy.h"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <thread>

#include "qdtree/error.h"
#include "qdtree/skipcost.h"

namespace qdtree {

std::int64_t total_objective(std::span<const std::uint64_t> per_query) {
  return static_cast<std::int64_t>(
      std::accumulate(per_query.begin(), per_query.end(), std::uint64_t{0}));
}

namespace {

struct Candidate {
  bool valid = false;
  std::int64_t value = 0;
  std::vector<RowId> left;
  std::vector<RowId> right;
  std::vector<std::uint64_t> left_skip;
  std::vector<std::uint64_t> right_skip;
};

bool sizes_ok(std::size_t left, std::size_t right, std::size_t b,
              bool relaxed) {
  if (!relaxed) return left >= b && right >= b;
  return std::max(left, right) >= b && std::min(left, right) >= 1;
}

}  // namespace

QdTree greedy_grow(QdTree tree, const Dataset& data, const Workload& w,
                   const GreedyConfig& cfg, const Objective& objective) {
  if (data.num_rows() == 0) throw EmptyDataset("greedy_build: no rows");
  if (cfg.min_block_size < 1) throw InvalidArgument("min block size must be >= 1");
  const std::size_t b = cfg.min_block_size;
  const auto& registry = tree.registry();

  std::vector<RowId> all(data.num_rows());
  std::iota(all.begin(), all.end(), RowId{0});
  auto routed = route_subset(tree, data, all);

  // Per-query skipped totals of the whole tree, and of each open leaf.
  std::vector<std::uint64_t> totals(w.size(), 0);
  std::vector<std::vector<std::uint64_t>> node_skip(tree.num_nodes());
  for (NodeId leaf : tree.leaves()) {
    auto s = block_skipped_per_query(data, routed[static_cast<std::size_t>(leaf)],
                                     w, registry);
    for (std::size_t q = 0; q < w.size(); ++q) totals[q] += s[q];
    node_skip[static_cast<std::size_t>(leaf)] = std::move(s);
  }
  std::int64_t current = objective(totals);

  const std::size_t guard = cfg.relaxed ? b + 1 : 2 * b;
  std::vector<NodeId> level = tree.leaves();
  while (!level.empty()) {
    std::vector<NodeId> next;
    for (NodeId id : level) {
      auto& rows = routed[static_cast<std::size_t>(id)];
      if (rows.size() < guard) continue;
      const auto& own = node_skip[static_cast<std::size_t>(id)];

      auto evaluate = [&](std::size_t ci) {
        Candidate c;
        const Cut& cut = cfg.cuts[ci];
        try {
          (void)apply_cut(tree.node(id).region, cut, tree.schema());
        } catch (const DegenerateCut&) {
          return c;
        }
        for (RowId r : rows) {
          (cut_matches(cut, data.row(r)) ? c.left : c.right).push_back(r);
        }
        if (!sizes_ok(c.left.size(), c.right.size(), b, cfg.relaxed)) return c;
        c.left_skip = block_skipped_per_query(data, c.left, w, registry);
        c.right_skip = block_skipped_per_query(data, c.right, w, registry);
        std::vector<std::uint64_t> trial = totals;
        for (std::size_t q = 0; q < w.size(); ++q) {
          trial[q] = trial[q] - own[q] + c.left_skip[q] + c.right_skip[q];
        }
        c.value = objective(trial);
        c.valid = true;
        return c;
      };

      std::vector<Candidate> cands(cfg.cuts.size());
      const unsigned threads = std::max(1u, cfg.threads);
      if (threads == 1 || cfg.cuts.size() < 2 || rows.size() < 4096) {
        for (std::size_t ci = 0; ci < cfg.cuts.size(); ++ci) cands[ci] = evaluate(ci);
      } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            for (std::size_t ci = t; ci < cfg.cuts.size(); ci += threads) {
              cands[ci] = evaluate(ci);
            }
          });
        }
        for (auto& th : pool) th.join();
      }

      std::size_t best = cands.size();
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        if (!cands[ci].valid) continue;
        if (best == cands.size() || cands[ci].value > cands[best].value) best = ci;
      }
      if (best == cands.size() || cands[best].value <= current) continue;

      auto& win = cands[best];
      for (std::size_t q = 0; q < w.size(); ++q) {
        totals[q] = totals[q] - own[q] + win.left_skip[q] + win.right_skip[q];
      }
      current = win.value;
      rows.clear();
      rows.shrink_to_fit();
      tree = std::move(tree).split(id, cfg.cuts[best]);
      const auto& parent = tree.node(id);
      routed.resize(tree.num_nodes());
      node_skip.resize(tree.num_nodes());
      routed[static_cast<std::size_t>(parent.left)] = std::move(win.left);
      routed[static_cast<std::size_t>(parent.right)] = std::move(win.right);
      node_skip[static_cast<std::size_t>(parent.left)] = std::move(win.left_skip);
      node_skip[static_cast<std::size_t>(parent.right)] = std::move(win.right_skip);
      next.push_back(parent.left);
      next.push_back(parent.right);
    }
    level = std::move(next);
  }
  return tree;
}

QdTree greedy_build(const Dataset& data, const Workload& w,
                    const GreedyConfig& cfg) {
  if (data.num_rows() == 0) throw EmptyDataset("greedy_build: no rows");
  if (cfg.cuts.empty()) throw InvalidArgument("greedy_build: no candidate cuts");
  return greedy_grow(QdTree(data.schema(), w.advanced), data, w, cfg,
                     total_objective);
}

std::vector<std::uint64_t> per_query_skipped(const QdTree& tree,
                                             const Dataset& data,
                                             const Workload& w) {
  std::vector<RowId> all(data.num_rows());
  std::iota(all.begin(), all.end(), RowId{0});
  const auto routed = route_subset(tree, data, all);
  std::vector<std::uint64_t> out(w.size(), 0);
  for (NodeId leaf : tree.leaves()) {
    const auto s = block_skipped_per_query(
        data, routed[static_cast<std::size_t>(leaf)], w, tree.registry());
    for (std::size_t q = 0; q < w.size(); ++q) out[q] += s[q];
  }
  return out;
}

QdTree without_last_level(const QdTree& tree) {
  const int deepest = tree.max_depth();
  if (deepest == 0) return tree;
  QdTree out = tree;
  // Collapsing renumbers nodes, so search again after every collapse.
  for (;;) {
    NodeId target = -1;
    for (const auto& n : out.nodes()) {
      if (!n.is_leaf() && n.depth == deepest - 1) {
        target = n.id;
        break;
      }
    }
    if (target < 0) return out;
    out = out.collapse(target);
  }
}

BoundReport check_online_bound(const QdTree& tree, const Dataset& data,
                               const Workload& w, const GreedyConfig& cfg,
                               std::uint64_t opt) {
  if (cfg.min_block_size < 1) throw InvalidArgument("min block size must be >= 1");
  BoundReport rep;
  rep.c_t = tree_skipped(tree, data, w);
  rep.c_t_minus_1 = tree_skipped(without_last_level(tree), data, w);
  rep.num_rows = data.num_rows();
  rep.min_block_size = cfg.min_block_size;
  rep.opt = opt;
  const auto b = static_cast<long double>(rep.min_block_size);
  const auto gain = static_cast<long double>(rep.c_t) -
                    static_cast<long double>(rep.c_t_minus_1);
  rep.online_bound = static_cast<double>(
      static_cast<long double>(rep.c_t) + 2.0L * rep.num_rows * gain / b);

  // b*C(T) + 2|V|(C(T) - C(T^-1)) >= b*OPT, kept in signed 128-bit integers.
  const __int128 lhs =
      static_cast<__int128>(rep.min_block_size) * rep.c_t +
      2 * static_cast<__int128>(rep.num_rows) *
          (static_cast<__int128>(rep.c_t) - static_cast<__int128>(rep.c_t_minus_1));
  const __int128 rhs = static_cast<__int128>(rep.min_block_size) * opt;
  const bool lower = lhs >= rhs;
  const bool upper = rep.c_t <= opt;
  rep.holds = lower && upper;
  if (!rep.holds) {
    std::ostringstream msg;
    msg << "online bound violated: C(T)=" << rep.c_t
        << " C(T^-1)=" << rep.c_t_minus_1 << " OPT=" << opt
        << " bound=" << rep.online_bound;
    throw BoundViolation(msg.str());
  }
  return rep;
}

namespace {

bool uses_or_or_advanced(const Expr& e) {
  if (std::holds_alternative<AdvancedRef>(e.node)) return true;
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    if (b->op == BoolOp::kOr) return true;
    for (const auto& c : b->children) {
      if (uses_or_or_advanced(c)) return true;
    }
  }
  return false;
}

// Both literal regions of a cut, or none when the cut splits nothing.
std::vector<SemanticDescription> literals(const Cut& cut, const Schema& schema) {
  try {
    auto [pos, neg] = apply_cut(SemanticDescription::full(schema, 0), cut, schema);
    return {std::move(pos), std::move(neg)};
  } catch (const DegenerateCut&) {
    return {SemanticDescription::full(schema, 0)};
  }
}

}  // namespace

bool check_submodularity_condition(std::span<const Cut> cuts, const Workload& w,
                                   const Schema& schema) {
  for (const auto& c : cuts) {
    if (std::holds_alternative<AdvancedCut>(c)) {
      throw UnsupportedQueryShape("submodularity check takes unary cuts only");
    }
  }
  for (const auto& q : w.queries) {
    if (uses_or_or_advanced(q.expr)) {
      throw UnsupportedQueryShape(
          "submodularity check takes conjunctive unary queries only");
    }
  }
  const AdvancedRegistry none;
  auto skipped = [&](const SemanticDescription& region) {
    std::vector<bool> out(w.size());
    for (std::size_t q = 0; q < w.size(); ++q) {
      out[q] = !intersects(region, w.queries[q], schema, none);
    }
    return out;
  };

  std::vector<std::vector<SemanticDescription>> lits;
  for (const auto& c : cuts) lits.push_back(literals(c, schema));
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    for (std::size_t j = i + 1; j < cuts.size(); ++j) {
      for (const auto& p : lits[i]) {
        const auto sp = skipped(p);
        for (const auto& pp : lits[j]) {
          const auto both = meet(p, pp);
          if (both.is_empty()) continue;
          const auto sb = skipped(both);
          const auto spp = skipped(pp);
          for (std::size_t q = 0; q < w.size(); ++q) {
            if (sb[q] && !sp[q] && !spp[q]) return false;
          }
        }
      }
    }
  }
  return true;
}

}  // namespace qdtree
