#include "qdtree/skipcost.h"

#include <numeric>

#include "qdtree/error.h"
#include "qdtree/io.h"

namespace qdtree {

bool can_skip(const SemanticDescription& desc, const Query& q,
              const Schema& schema, const AdvancedRegistry& registry) {
  return !intersects(desc, q, schema, registry);
}

std::vector<bool> skipping_queries(const SemanticDescription& desc,
                                   const Workload& w, const Schema& schema,
                                   const AdvancedRegistry& registry) {
  std::vector<bool> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = can_skip(desc, w.queries[i], schema, registry);
  }
  return out;
}

std::uint64_t SkipReport::total_scanned() const {
  return std::accumulate(per_query_scanned.begin(), per_query_scanned.end(),
                         std::uint64_t{0});
}

double SkipReport::access_fraction() const {
  if (num_rows == 0 || num_queries == 0) return 0.0;
  return static_cast<double>(total_scanned()) /
         (static_cast<double>(num_queries) * static_cast<double>(num_rows));
}

double SkipReport::query_access_fraction(std::size_t q) const {
  if (num_rows == 0) return 0.0;
  return static_cast<double>(per_query_scanned.at(q)) /
         static_cast<double>(num_rows);
}

std::string SkipReport::to_json(int indent) const {
  json per_query = json::array();
  for (std::size_t q = 0; q < per_query_scanned.size(); ++q) {
    per_query.push_back({{"query", q},
                         {"scanned", per_query_scanned[q]},
                         {"access_fraction", query_access_fraction(q)}});
  }
  json per_block = json::array();
  for (std::size_t b = 0; b < per_block_skipped.size(); ++b) {
    per_block.push_back({{"block", b},
                         {"rows", block_rows.at(b)},
                         {"skipped", per_block_skipped[b]}});
  }
  json j{{"num_rows", num_rows},
         {"num_queries", num_queries},
         {"total_skipped", total_skipped},
         {"total_scanned", total_scanned()},
         {"access_fraction", access_fraction()},
         {"extra_storage_rows", extra_storage_rows},
         {"per_query", std::move(per_query)},
         {"per_block", std::move(per_block)}};
  return j.dump(indent);
}

std::string SkipReport::per_query_csv() const {
  std::string out = "query,scanned,access_fraction\n";
  for (std::size_t q = 0; q < per_query_scanned.size(); ++q) {
    out += std::to_string(q) + ',' + std::to_string(per_query_scanned[q]) +
           ',' + json(query_access_fraction(q)).dump() + '\n';
  }
  return out;
}

SkipReport evaluate_blocks(std::span<const SemanticDescription> descs,
                           std::span<const std::uint64_t> sizes,
                           const Workload& w, const Schema& schema,
                           std::uint64_t num_rows) {
  if (descs.size() != sizes.size()) {
    throw InvalidArgument("one size per block description required");
  }
  SkipReport rep;
  rep.num_rows = num_rows;
  rep.num_queries = w.size();
  rep.block_rows.assign(sizes.begin(), sizes.end());
  rep.per_block_skipped.assign(descs.size(), 0);
  rep.per_query_scanned.assign(w.size(), 0);
  for (std::size_t b = 0; b < descs.size(); ++b) {
    for (std::size_t q = 0; q < w.size(); ++q) {
      if (can_skip(descs[b], w.queries[q], schema, w.advanced)) {
        rep.per_block_skipped[b] += sizes[b];
      } else {
        rep.per_query_scanned[q] += sizes[b];
      }
    }
    rep.total_skipped += rep.per_block_skipped[b];
  }
  return rep;
}

SkipReport evaluate_partitioning(const QdTree& tree,
                                 const BlockAssignment& assignment,
                                 const Dataset& data, const Workload& w) {
  if (assignment.block_of_row.size() != data.num_rows()) {
    throw AssignmentMismatch("assignment does not cover the dataset");
  }
  std::vector<std::uint64_t> sizes(tree.num_blocks(), 0);
  for (BlockId b : assignment.block_of_row) {
    if (b < 0 || static_cast<std::size_t>(b) >= sizes.size()) {
      throw AssignmentMismatch("assignment references unknown block " +
                               std::to_string(b));
    }
    ++sizes[static_cast<std::size_t>(b)];
  }
  std::vector<SemanticDescription> descs;
  descs.reserve(tree.num_blocks());
  for (std::size_t b = 0; b < tree.num_blocks(); ++b) {
    descs.push_back(tree.block_description(static_cast<BlockId>(b)));
  }
  return evaluate_blocks(descs, sizes, w, tree.schema(), data.num_rows());
}

std::vector<std::uint64_t> block_skipped_per_query(
    const Dataset& data, std::span<const RowId> rows, const Workload& w,
    const AdvancedRegistry& registry) {
  std::vector<std::uint64_t> out(w.size(), 0);
  if (rows.empty()) return out;
  const auto outline = SemanticDescription::full(data.schema(), registry.size());
  const auto desc = SemanticDescription::tight(data, rows, registry, outline);
  for (std::size_t q = 0; q < w.size(); ++q) {
    if (can_skip(desc, w.queries[q], data.schema(), registry)) out[q] = rows.size();
  }
  return out;
}

std::uint64_t block_skipped(const Dataset& data, std::span<const RowId> rows,
                            const Workload& w,
                            const AdvancedRegistry& registry) {
  const auto per_query = block_skipped_per_query(data, rows, w, registry);
  return std::accumulate(per_query.begin(), per_query.end(), std::uint64_t{0});
}

namespace {

std::uint64_t skipped_rec(const QdTree& tree, NodeId id, const Dataset& data,
                          std::vector<RowId> rows, const Workload& w) {
  const auto& n = tree.node(id);
  if (n.is_leaf()) return block_skipped(data, rows, w, tree.registry());
  std::vector<RowId> left;
  std::vector<RowId> right;
  for (RowId r : rows) {
    (cut_matches(*n.cut, data.row(r)) ? left : right).push_back(r);
  }
  return skipped_rec(tree, n.left, data, std::move(left), w) +
         skipped_rec(tree, n.right, data, std::move(right), w);
}

}  // namespace

std::uint64_t skipped_under_node(const QdTree& tree, NodeId node,
                                 const Dataset& data,
                                 std::span<const RowId> rows,
                                 const Workload& w) {
  return skipped_rec(tree, node, data, {rows.begin(), rows.end()}, w);
}

std::uint64_t tree_skipped(const QdTree& tree, const Dataset& data,
                           const Workload& w) {
  std::vector<RowId> all(data.num_rows());
  std::iota(all.begin(), all.end(), RowId{0});
  return skipped_rec(tree, tree.root(), data, std::move(all), w);
}

}  // namespace qdtree
