#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdtree/description.h"
#include "qdtree/model.h"

namespace qdtree {

using NodeId = int;
using BlockId = int;

struct QdTreeNode {
  NodeId id = 0;
  NodeId parent = -1;
  int depth = 0;
  // Current description: cut-derived, or min-max tightened after freezing.
  SemanticDescription desc;
  // Cut-derived description. Unlike a frozen `desc` it is complete: every
  // row inside it routes to this node.
  SemanticDescription region;
  std::optional<Cut> cut;
  NodeId left = -1;
  NodeId right = -1;
  std::optional<BlockId> block_id;

  bool is_leaf() const { return !cut.has_value(); }
};

// One block id per row.
struct BlockAssignment {
  std::vector<BlockId> block_of_row;

  // Row ids grouped by block, each group in ascending row order.
  std::vector<std::vector<RowId>> rows_by_block(std::size_t num_blocks) const;
};

class QdTree {
 public:
  QdTree() = default;
  // Singleton tree whose root describes the whole table.
  QdTree(Schema schema, AdvancedRegistry registry);

  const Schema& schema() const { return schema_; }
  const AdvancedRegistry& registry() const { return registry_; }
  NodeId root() const { return 0; }
  const QdTreeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<QdTreeNode>& nodes() const { return nodes_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  bool frozen() const { return frozen_; }
  const std::vector<std::pair<NodeId, Cut>>& log() const { return log_; }

  std::size_t num_blocks() const { return leaves_.size(); }
  // Leaf node ids in left-to-right order; index = block id.
  const std::vector<NodeId>& leaves() const { return leaves_; }
  NodeId leaf_of_block(BlockId b) const { return leaves_.at(static_cast<std::size_t>(b)); }
  const SemanticDescription& block_description(BlockId b) const {
    return node(leaf_of_block(b)).desc;
  }
  int max_depth() const;

  // T + (cut, node). Throws NotALeaf, DegenerateCut, or InvalidArgument.
  QdTree split(NodeId node, const Cut& cut) const&;
  QdTree split(NodeId node, const Cut& cut) &&;

  // Removes every descendant of `node`, making it a leaf again; log entries
  // for removed nodes are dropped. Clears the frozen flag.
  QdTree collapse(NodeId node) const;

  // Leaf reached by a row.
  NodeId route_row(std::span<const Value> row, NodeId from = 0) const;
  BlockAssignment route_rows(const Dataset& data, unsigned threads = 1) const;

  // Replaces leaf descriptions with min-max descriptions of their rows.
  QdTree freeze(const BlockAssignment& assignment, const Dataset& data) const;

  // Sorted ids of blocks whose description intersects the query.
  std::vector<BlockId> route_query(const Query& q) const;

  // Leaf ids under a node, left to right.
  std::vector<NodeId> leaves_under(NodeId node) const;

  std::string to_json(int indent = -1) const;
  static QdTree from_json(std::string_view text);

  bool operator==(const QdTree& o) const;

 private:
  void split_in_place(NodeId node, const Cut& cut);
  void renumber_blocks();
  void validate_cut(const Cut& cut) const;

  Schema schema_;
  AdvancedRegistry registry_;
  std::vector<QdTreeNode> nodes_;
  std::vector<NodeId> leaves_;
  std::vector<std::pair<NodeId, Cut>> log_;
  bool frozen_ = false;
};

// Replays a construction log on a fresh singleton tree.
QdTree replay(const Schema& schema, const AdvancedRegistry& registry,
              const std::vector<std::pair<NodeId, Cut>>& log,
              std::size_t steps);

// Routes the listed rows from `from` down; returns rows per leaf node id
// (indexed by node id, empty for internal nodes).
std::vector<std::vector<RowId>> route_subset(const QdTree& tree,
                                             const Dataset& data,
                                             std::span<const RowId> rows,
                                             NodeId from = 0);

}  // namespace qdtree
