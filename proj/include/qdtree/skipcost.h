#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdtree/description.h"
#include "qdtree/model.h"
#include "qdtree/tree.h"

namespace qdtree {

// S(P, q): a block can be skipped when its description cannot hold a row
// satisfying q.
bool can_skip(const SemanticDescription& desc, const Query& q,
              const Schema& schema, const AdvancedRegistry& registry);

// One flag per query: whether that query skips `desc`.
std::vector<bool> skipping_queries(const SemanticDescription& desc,
                                   const Workload& w, const Schema& schema,
                                   const AdvancedRegistry& registry);

struct SkipReport {
  std::uint64_t num_rows = 0;     // |V|
  std::uint64_t num_queries = 0;  // |W|
  std::vector<std::uint64_t> block_rows;
  std::vector<std::uint64_t> per_block_skipped;  // C(P_i)
  std::vector<std::uint64_t> per_query_scanned;
  std::uint64_t total_skipped = 0;               // C(P)
  std::uint64_t extra_storage_rows = 0;

  std::uint64_t total_scanned() const;
  // sum of scanned tuples / (|W| * |V|)
  double access_fraction() const;
  double query_access_fraction(std::size_t q) const;

  std::string to_json(int indent = 2) const;
  // query,scanned,access_fraction
  std::string per_query_csv() const;
};

// Skip evaluation over explicit blocks, one description and size each.
SkipReport evaluate_blocks(std::span<const SemanticDescription> descs,
                           std::span<const std::uint64_t> sizes,
                           const Workload& w, const Schema& schema,
                           std::uint64_t num_rows);

SkipReport evaluate_partitioning(const QdTree& tree,
                                 const BlockAssignment& assignment,
                                 const Dataset& data, const Workload& w);

// C of a set of rows held in one block: |rows| times the number of queries
// skipping the rows' min-max description.
std::uint64_t block_skipped(const Dataset& data, std::span<const RowId> rows,
                            const Workload& w,
                            const AdvancedRegistry& registry);

// Per-query skipped tuples of one block (|rows| or 0 per query).
std::vector<std::uint64_t> block_skipped_per_query(
    const Dataset& data, std::span<const RowId> rows, const Workload& w,
    const AdvancedRegistry& registry);

// S(n): skipped tuples summed over the leaves below `node`, with each leaf
// described by the min-max of the listed rows routed to it.
std::uint64_t skipped_under_node(const QdTree& tree, NodeId node,
                                 const Dataset& data,
                                 std::span<const RowId> rows,
                                 const Workload& w);

// C(T) over every row of `data`, leaves described by their rows' min-max.
std::uint64_t tree_skipped(const QdTree& tree, const Dataset& data,
                           const Workload& w);

}  // namespace qdtree
