#include "qdtree/tree.h"

#include <algorithm>
#include <thread>

#include "qdtree/error.h"
#include "qdtree/io.h"

namespace qdtree {

std::vector<std::vector<RowId>> BlockAssignment::rows_by_block(
    std::size_t num_blocks) const {
  std::vector<std::vector<RowId>> out(num_blocks);
  for (std::size_t r = 0; r < block_of_row.size(); ++r) {
    const BlockId b = block_of_row[r];
    if (b < 0 || static_cast<std::size_t>(b) >= num_blocks) {
      throw AssignmentMismatch("row " + std::to_string(r) +
                               " assigned to unknown block " +
                               std::to_string(b));
    }
    out[static_cast<std::size_t>(b)].push_back(static_cast<RowId>(r));
  }
  return out;
}

QdTree::QdTree(Schema schema, AdvancedRegistry registry)
    : schema_(std::move(schema)), registry_(std::move(registry)) {
  for (std::size_t i = 0; i < registry_.size(); ++i) {
    if (registry_[i].index != i) {
      throw InvalidArgument("advanced cut registry is not densely indexed");
    }
  }
  QdTreeNode root;
  root.desc = SemanticDescription::full(schema_, registry_.size());
  root.region = root.desc;
  nodes_.push_back(std::move(root));
  renumber_blocks();
}

int QdTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

void QdTree::validate_cut(const Cut& cut) const {
  if (const auto* p = std::get_if<UnaryPredicate>(&cut)) {
    if (p->column() >= schema_.size()) {
      throw InvalidArgument("cut column out of range");
    }
    if (p->is_range() != schema_.is_numeric(p->column())) {
      throw InvalidArgument("cut " + describe(cut, schema_) +
                            " does not fit its column kind");
    }
  } else {
    const auto& a = std::get<AdvancedCut>(cut);
    if (a.index >= registry_.size() || !(registry_[a.index] == a)) {
      throw InvalidArgument("advanced cut is not in the tree's registry");
    }
  }
}

void QdTree::split_in_place(NodeId id, const Cut& cut) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw InvalidArgument("no node " + std::to_string(id));
  }
  if (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
    throw NotALeaf("node " + std::to_string(id) + " already has a cut");
  }
  validate_cut(cut);
  auto& parent = nodes_[static_cast<std::size_t>(id)];
  auto [left_region, right_region] = apply_cut(parent.region, cut, schema_);
  QdTreeNode left;
  left.id = static_cast<NodeId>(nodes_.size());
  left.parent = id;
  left.depth = parent.depth + 1;
  left.region = std::move(left_region);
  left.desc = left.region;
  QdTreeNode right;
  right.id = left.id + 1;
  right.parent = id;
  right.depth = left.depth;
  right.region = std::move(right_region);
  right.desc = right.region;
  parent.cut = cut;
  parent.left = left.id;
  parent.right = right.id;
  parent.block_id.reset();
  // Splitting a frozen leaf keeps its tightened description as the parent's.
  nodes_.push_back(std::move(left));
  nodes_.push_back(std::move(right));
  log_.emplace_back(id, cut);
  frozen_ = false;
  renumber_blocks();
}

QdTree QdTree::split(NodeId node, const Cut& cut) const& {
  QdTree copy = *this;
  copy.split_in_place(node, cut);
  return copy;
}

QdTree QdTree::split(NodeId node, const Cut& cut) && {
  split_in_place(node, cut);
  return std::move(*this);
}

void QdTree::renumber_blocks() {
  leaves_.clear();
  std::vector<NodeId> stack{0};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      n.block_id = static_cast<BlockId>(leaves_.size());
      leaves_.push_back(id);
    } else {
      n.block_id.reset();
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
}

std::vector<NodeId> QdTree::leaves_under(NodeId node) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const auto& n = nodes_.at(static_cast<std::size_t>(id));
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

QdTree QdTree::collapse(NodeId node) const {
  std::vector<bool> removed(nodes_.size(), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    // A node is removed when a strict ancestor is `node`.
    for (NodeId p = nodes_[i].parent; p >= 0;
         p = nodes_[static_cast<std::size_t>(p)].parent) {
      if (p == node) {
        removed[i] = true;
        break;
      }
    }
  }
  std::vector<std::pair<NodeId, Cut>> kept;
  for (const auto& [id, cut] : log_) {
    if (id != node && !removed[static_cast<std::size_t>(id)]) {
      kept.emplace_back(id, cut);
    }
  }
  // Replaying the surviving actions renumbers nodes; map old ids as we go.
  QdTree out(schema_, registry_);
  std::vector<NodeId> new_id(nodes_.size(), -1);
  new_id[0] = 0;
  std::vector<std::pair<NodeId, Cut>> log;
  for (const auto& [id, cut] : kept) {
    const NodeId target = new_id[static_cast<std::size_t>(id)];
    out.split_in_place(target, cut);
    const auto& old = nodes_[static_cast<std::size_t>(id)];
    const auto& fresh = out.nodes_[static_cast<std::size_t>(target)];
    new_id[static_cast<std::size_t>(old.left)] = fresh.left;
    new_id[static_cast<std::size_t>(old.right)] = fresh.right;
  }
  return out;
}

NodeId QdTree::route_row(std::span<const Value> row, NodeId from) const {
  NodeId id = from;
  while (true) {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return id;
    id = cut_matches(*n.cut, row) ? n.left : n.right;
  }
}

BlockAssignment QdTree::route_rows(const Dataset& data,
                                   unsigned threads) const {
  BlockAssignment out;
  const std::size_t n = data.num_rows();
  out.block_of_row.resize(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const NodeId leaf = route_row(data.row(static_cast<RowId>(r)));
      out.block_of_row[r] = *nodes_[static_cast<std::size_t>(leaf)].block_id;
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || n < 4096) {
    work(0, n);
    return out;
  }
  // Each worker writes a disjoint slice, so the result is batch-independent.
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return out;
}

QdTree QdTree::freeze(const BlockAssignment& assignment,
                      const Dataset& data) const {
  if (assignment.block_of_row.size() != data.num_rows()) {
    throw AssignmentMismatch("assignment covers " +
                             std::to_string(assignment.block_of_row.size()) +
                             " rows, dataset has " +
                             std::to_string(data.num_rows()));
  }
  const auto groups = assignment.rows_by_block(num_blocks());
  QdTree out = *this;
  for (std::size_t b = 0; b < groups.size(); ++b) {
    auto& leaf = out.nodes_[static_cast<std::size_t>(leaves_[b])];
    leaf.desc = SemanticDescription::tight(data, groups[b], registry_,
                                           leaf.region);
  }
  out.frozen_ = true;
  return out;
}

std::vector<BlockId> QdTree::route_query(const Query& q) const {
  std::vector<BlockId> out;
  for (std::size_t b = 0; b < leaves_.size(); ++b) {
    if (intersects(nodes_[static_cast<std::size_t>(leaves_[b])].desc, q,
                   schema_, registry_)) {
      out.push_back(static_cast<BlockId>(b));
    }
  }
  return out;
}

bool QdTree::operator==(const QdTree& o) const {
  if (!(schema_ == o.schema_) || !(registry_ == o.registry_) ||
      frozen_ != o.frozen_ || log_ != o.log_ || leaves_ != o.leaves_ ||
      nodes_.size() != o.nodes_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = o.nodes_[i];
    if (a.id != b.id || a.parent != b.parent || a.depth != b.depth ||
        !(a.desc == b.desc) || !(a.region == b.region) || a.cut != b.cut ||
        a.left != b.left || a.right != b.right || a.block_id != b.block_id) {
      return false;
    }
  }
  return true;
}

std::string QdTree::to_json(int indent) const {
  json nodes = json::array();
  for (const auto& n : nodes_) {
    json jn{{"id", n.id},
            {"cut", n.cut ? cut_to_json(*n.cut, schema_) : json(nullptr)},
            {"left", n.is_leaf() ? json(nullptr) : json(n.left)},
            {"right", n.is_leaf() ? json(nullptr) : json(n.right)},
            {"block_id", n.block_id ? json(*n.block_id) : json(nullptr)},
            {"desc", description_to_json(n.desc, schema_)}};
    nodes.push_back(std::move(jn));
  }
  json log = json::array();
  for (const auto& [id, cut] : log_) {
    log.push_back(json::array({id, cut_to_json(cut, schema_)}));
  }
  json adv = json::array();
  for (const auto& a : registry_) adv.push_back(advanced_cut_to_json(a, schema_));
  json j{{"frozen", frozen_},
         {"root", 0},
         {"schema", schema_to_json(schema_)},
         {"advanced_cuts", std::move(adv)},
         {"nodes", std::move(nodes)},
         {"log", std::move(log)}};
  return j.dump(indent);
}

QdTree QdTree::from_json(std::string_view text) {
  const json j = parse_json(text, "tree");
  if (!j.is_object()) throw ParseError("tree: expected an object");
  for (const char* key : {"frozen", "root", "schema", "nodes", "log"}) {
    if (!j.contains(key)) {
      throw ParseError(std::string("tree: missing field '") + key + "'");
    }
  }
  Schema schema = schema_from_json(j["schema"]);
  AdvancedRegistry registry;
  if (j.contains("advanced_cuts")) {
    const auto& adv = j["advanced_cuts"];
    if (!adv.is_array()) throw ParseError("tree: 'advanced_cuts' must be an array");
    for (std::size_t i = 0; i < adv.size(); ++i) {
      registry.push_back(advanced_cut_from_json(
          adv[i], schema, i, "tree.advanced_cuts[" + std::to_string(i) + "]"));
    }
  }
  if (j["root"] != 0) throw ParseError("tree: root must be node 0");
  const auto& log_j = j["log"];
  if (!log_j.is_array()) throw ParseError("tree: 'log' must be an array");

  // The structure is rebuilt from the log; node records then supply the
  // (possibly frozen) descriptions and are checked against the replay.
  QdTree tree(schema, registry);
  for (std::size_t i = 0; i < log_j.size(); ++i) {
    const std::string where = "tree.log[" + std::to_string(i) + "]";
    const auto& entry = log_j[i];
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer()) {
      throw ParseError(where + ": expected [node_id, cut]");
    }
    const Cut cut = cut_from_json(entry[1], schema, registry, where);
    try {
      tree.split_in_place(entry[0].get<NodeId>(), cut);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  const auto& nodes_j = j["nodes"];
  if (!nodes_j.is_array() || nodes_j.size() != tree.nodes_.size()) {
    throw ParseError("tree: node list does not match the construction log");
  }
  for (std::size_t i = 0; i < nodes_j.size(); ++i) {
    const std::string where = "tree.nodes[" + std::to_string(i) + "]";
    const auto& jn = nodes_j[i];
    auto& n = tree.nodes_[i];
    if (!jn.is_object() || jn.value("id", -1) != n.id) {
      throw ParseError(where + ": node id mismatch");
    }
    const bool leaf = jn.contains("cut") && jn["cut"].is_null();
    if (leaf != n.is_leaf()) throw ParseError(where + ": cut does not match log");
    if (!leaf) {
      const Cut cut = cut_from_json(jn["cut"], schema, registry, where + ".cut");
      if (cut != *n.cut || jn.value("left", -2) != n.left ||
          jn.value("right", -2) != n.right) {
        throw ParseError(where + ": children do not match log");
      }
    } else if (!jn.contains("block_id") || jn["block_id"] != *n.block_id) {
      throw ParseError(where + ": block_id does not match leaf order");
    }
    if (!jn.contains("desc")) throw ParseError(where + ": missing field 'desc'");
    n.desc = description_from_json(jn["desc"], schema, registry.size(),
                                   where + ".desc");
  }
  if (!j["frozen"].is_boolean()) throw ParseError("tree: 'frozen' must be a boolean");
  tree.frozen_ = j["frozen"].get<bool>();
  return tree;
}

QdTree replay(const Schema& schema, const AdvancedRegistry& registry,
              const std::vector<std::pair<NodeId, Cut>>& log,
              std::size_t steps) {
  QdTree t(schema, registry);
  for (std::size_t i = 0; i < std::min(steps, log.size()); ++i) {
    t = std::move(t).split(log[i].first, log[i].second);
  }
  return t;
}

std::vector<std::vector<RowId>> route_subset(const QdTree& tree,
                                             const Dataset& data,
                                             std::span<const RowId> rows,
                                             NodeId from) {
  std::vector<std::vector<RowId>> out(tree.num_nodes());
  for (RowId r : rows) {
    out[static_cast<std::size_t>(tree.route_row(data.row(r), from))].push_back(r);
  }
  return out;
}

}  // namespace qdtree
