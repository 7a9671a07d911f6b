#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qdtree/greedy.h"
#include "qdtree/skipcost.h"
#include "qdtree/tree.h"
#include "qdtree/woodblock.h"

namespace qdtree {

enum class Builder { kGreedy, kRl };

struct BuildConfig {
  Builder builder = Builder::kGreedy;
  GreedyConfig greedy;  // cuts and min_block_size are shared with the rl path
  RlConfig rl;
};

// Plain (strict) build with the configured builder; the rl path takes its
// candidate cuts and b from `greedy`. Unfrozen.
QdTree build_tree(const Dataset& data, const Workload& w, const BuildConfig& cfg);

// ---------------------------------------------------------------- overlap

struct OverlapLayout {
  QdTree tree;  // frozen
  // Small block id -> receiving block id.
  std::map<BlockId, BlockId> replica_map;
  // Receiver block id -> cut-derived region widened by its replicas.
  std::map<BlockId, SemanticDescription> widened;
  std::vector<std::uint64_t> block_sizes;  // stored rows, replicas included
  std::uint64_t extra_storage_rows = 0;

  std::size_t num_blocks() const { return tree.num_blocks(); }
  // Complete description: every dataset row inside it is stored in the block.
  SemanticDescription region(BlockId b) const;
  // Frozen min-max of the block's own rows, then one per replica it holds.
  std::vector<SemanticDescription> parts(BlockId b) const;

  std::string to_json(int indent = -1) const;
  static OverlapLayout from_json(std::string_view text);
};

// Strict build, then a relaxed greedy pass over its leaves that allows one
// child below b, then replication of every small leaf into a neighbouring
// big leaf. A small leaf without a neighbour undoes its relaxed split.
// Unary cuts only.
OverlapLayout build_overlap(const Dataset& data, const Workload& w,
                            const BuildConfig& cfg);

// Rows stored per block: own rows plus replicated rows.
std::vector<std::vector<RowId>> overlap_block_rows(const OverlapLayout& layout,
                                                   const Dataset& data);

struct RoutedBlock {
  BlockId block = 0;
  // Rows inside any of these belong to a lower-id selected block.
  std::vector<SemanticDescription> ignore;
};

// Blocks a query must read, sorted by id, after dropping blocks whose
// relevant contents are covered by another selected block.
std::vector<RoutedBlock> route_query_overlap(const OverlapLayout& layout,
                                             const Query& q,
                                             const AdvancedRegistry& registry);

// Qualifying rows read from the routed blocks with duplicates removed by the
// ignore descriptions, in scan order.
std::vector<RowId> scan_with_ignore(const std::vector<std::vector<RowId>>& block_rows,
                                    const std::vector<RoutedBlock>& route,
                                    const Dataset& data, const Query& q,
                                    const AdvancedRegistry& registry);

SkipReport evaluate_overlap(const OverlapLayout& layout, const Dataset& data,
                            const Workload& w);

// --------------------------------------------------------------- two-tree

struct TwoTreeConfig {
  BuildConfig build;
  std::size_t k = 1;
  std::size_t max_iters = 1;
  bool rebuild_t1 = true;
  bool prune = false;
};

struct TwoTreeLayout {
  QdTree t1;  // frozen
  QdTree t2;  // frozen
  std::vector<std::size_t> worst_queries;
  std::vector<int> choice;               // per query: 0 = t1, 1 = t2
  std::vector<BlockId> t2_kept;          // empty unless pruned
  bool pruned = false;
  std::vector<std::int64_t> objective_history;  // joint objective per iteration

  std::string to_json(int indent = -1) const;
  static TwoTreeLayout from_json(std::string_view text);
};

// Sum over queries of the larger of the two per-query skipped counts.
std::int64_t joint_objective(std::span<const std::uint64_t> a,
                             std::span<const std::uint64_t> b);

// Queries ordered from worst to best access under `per_query_skipped`,
// ties to the lower index; the first k are returned.
std::vector<std::size_t> worst_queries(std::span<const std::uint64_t> per_query_skipped,
                                       std::size_t k);

TwoTreeLayout build_two_tree(const Dataset& data, const Workload& w,
                             const TwoTreeConfig& cfg);

// Recomputes the per-query tree choice; ties go to t1. With pruning, t2 is
// usable only by queries whose t2 blocks were all kept.
void choose_trees(TwoTreeLayout& layout, const Dataset& data, const Workload& w);

SkipReport evaluate_two_tree(const TwoTreeLayout& layout, const Dataset& data,
                             const Workload& w);

}  // namespace qdtree
