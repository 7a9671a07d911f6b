#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qdtree/model.h"
#include "qdtree/tree.h"

namespace qdtree {

struct GreedyConfig {
  std::size_t min_block_size = 1;  // b
  std::vector<Cut> cuts;           // candidate cut set; index = tie-break order
  // Allow one child below b (the other must still reach b). Used by the
  // overlap builder to refine a finished tree.
  bool relaxed = false;
  unsigned threads = 1;
};

// Scores a tree from its per-query skipped-tuple totals. The default sums
// them, which is C(T).
using Objective = std::function<std::int64_t(std::span<const std::uint64_t>)>;

std::int64_t total_objective(std::span<const std::uint64_t> per_query);

// Level-by-level, left-to-right greedy construction: a last-level leaf with
// at least 2b rows takes the cut maximizing the objective (children >= b,
// ties to the lowest cut index) if that strictly improves it.
QdTree greedy_build(const Dataset& data, const Workload& w,
                    const GreedyConfig& cfg);

// Same procedure starting from the leaves of `start` instead of a root.
QdTree greedy_grow(QdTree start, const Dataset& data, const Workload& w,
                   const GreedyConfig& cfg, const Objective& objective);

// Per-query skipped tuples of a tree over all rows of `data`.
std::vector<std::uint64_t> per_query_skipped(const QdTree& tree,
                                             const Dataset& data,
                                             const Workload& w);

// The tree with its deepest level of splits undone.
QdTree without_last_level(const QdTree& tree);

struct BoundReport {
  std::uint64_t c_t = 0;
  std::uint64_t c_t_minus_1 = 0;
  std::uint64_t num_rows = 0;
  std::uint64_t min_block_size = 0;
  std::uint64_t opt = 0;
  // C(T) + (2|V|/b)(C(T) - C(T^-1)); the online bound says this is >= OPT.
  double online_bound = 0.0;
  bool holds = false;
};

// Checks OPT - (2|V|/b)(C(T) - C(T^-1)) <= C(T) <= OPT in exact integer
// arithmetic. Throws BoundViolation when either side fails.
BoundReport check_online_bound(const QdTree& tree, const Dataset& data,
                               const Workload& w, const GreedyConfig& cfg,
                               std::uint64_t opt);

// For every pair of literals (p or not p) drawn from two distinct cuts with
// a non-empty conjunction: the queries skipped by the conjunction are all
// skipped by one of the literals. Throws UnsupportedQueryShape for queries
// with OR or advanced references, and for advanced cuts.
bool check_submodularity_condition(std::span<const Cut> cuts, const Workload& w,
                                   const Schema& schema);

}  // namespace qdtree
