#include "qdtree/extensions.h"

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>

#include "qdtree/error.h"
#include "qdtree/io.h"

namespace qdtree {

QdTree build_tree(const Dataset& data, const Workload& w, const BuildConfig& cfg) {
  if (cfg.builder == Builder::kGreedy) return greedy_build(data, w, cfg.greedy);
  RlConfig rl = cfg.rl;
  rl.min_block_size = cfg.greedy.min_block_size;
  return train(data, w, cfg.greedy.cuts, rl).best;
}

namespace {

QdTree frozen(const QdTree& t, const Dataset& data) {
  return t.freeze(t.route_rows(data), data);
}

std::vector<std::uint64_t> block_sizes(const QdTree& t, const Dataset& data) {
  std::vector<std::uint64_t> sizes(t.num_blocks(), 0);
  for (BlockId b : t.route_rows(data).block_of_row) ++sizes[static_cast<std::size_t>(b)];
  return sizes;
}

// Union of two hypercubes that agree everywhere except one numeric column
// where they touch.
std::optional<SemanticDescription> adjacent_union(const SemanticDescription& a,
                                                  const SemanticDescription& b) {
  if (a.masks != b.masks || a.adv != b.adv) return std::nullopt;
  std::optional<std::size_t> dim;
  for (std::size_t c = 0; c < a.ranges.size(); ++c) {
    if (a.ranges[c] == b.ranges[c]) continue;
    if (dim) return std::nullopt;
    dim = c;
  }
  if (!dim) return std::nullopt;
  const auto& x = a.ranges[*dim];
  const auto& y = b.ranges[*dim];
  if (x.hi != y.lo && y.hi != x.lo) return std::nullopt;
  SemanticDescription out = a;
  out.ranges[*dim] = {std::min(x.lo, y.lo), std::max(x.hi, y.hi)};
  return out;
}

struct Replication {
  std::map<BlockId, BlockId> replica_map;
  std::map<BlockId, SemanticDescription> widened;
};

// Receivers by lowest block id; throws NoNeighbor naming the first small
// node without one.
Replication replicate(const QdTree& tree, const std::vector<std::uint64_t>& sizes,
                      std::size_t b, NodeId& orphan) {
  Replication rep;
  std::vector<BlockId> small, big;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    (sizes[i] < b ? small : big).push_back(static_cast<BlockId>(i));
  }
  for (BlockId s : small) {
    const auto& small_region = tree.node(tree.leaf_of_block(s)).region;
    bool placed = false;
    for (BlockId r : big) {
      const auto it = rep.widened.find(r);
      const auto& current =
          it != rep.widened.end() ? it->second : tree.node(tree.leaf_of_block(r)).region;
      if (auto u = adjacent_union(current, small_region)) {
        rep.replica_map[s] = r;
        rep.widened[r] = *u;
        placed = true;
        break;
      }
    }
    if (!placed) {
      orphan = tree.leaf_of_block(s);
      throw NoNeighbor("block " + std::to_string(s) + " has no neighbouring big block");
    }
  }
  return rep;
}

bool unary_only(const std::vector<Cut>& cuts) {
  return std::all_of(cuts.begin(), cuts.end(), [](const Cut& c) {
    return std::holds_alternative<UnaryPredicate>(c);
  });
}

}  // namespace

SemanticDescription OverlapLayout::region(BlockId b) const {
  if (auto it = widened.find(b); it != widened.end()) return it->second;
  return tree.node(tree.leaf_of_block(b)).region;
}

std::vector<SemanticDescription> OverlapLayout::parts(BlockId b) const {
  std::vector<SemanticDescription> out{tree.block_description(b)};
  for (const auto& [small, recv] : replica_map) {
    if (recv == b) out.push_back(tree.block_description(small));
  }
  return out;
}

OverlapLayout build_overlap(const Dataset& data, const Workload& w,
                            const BuildConfig& cfg) {
  if (!unary_only(cfg.greedy.cuts)) {
    throw InvalidArgument("overlap layouts take unary cuts only");
  }
  const std::size_t b = cfg.greedy.min_block_size;
  QdTree tree = build_tree(data, w, cfg);
  GreedyConfig relaxed = cfg.greedy;
  relaxed.relaxed = true;
  tree = greedy_grow(std::move(tree), data, w, relaxed, total_objective);

  OverlapLayout layout;
  for (;;) {
    const auto sizes = block_sizes(tree, data);
    if (tree.num_blocks() == 1) {
      layout.replica_map.clear();
      layout.widened.clear();
      break;
    }
    NodeId orphan = -1;
    try {
      auto rep = replicate(tree, sizes, b, orphan);
      layout.replica_map = std::move(rep.replica_map);
      layout.widened = std::move(rep.widened);
      break;
    } catch (const NoNeighbor&) {
      tree = tree.collapse(tree.node(orphan).parent);
    }
  }
  layout.tree = frozen(tree, data);
  const auto own = block_sizes(layout.tree, data);
  layout.block_sizes = own;
  for (const auto& [small, recv] : layout.replica_map) {
    layout.extra_storage_rows += own[static_cast<std::size_t>(small)];
    layout.block_sizes[static_cast<std::size_t>(recv)] += own[static_cast<std::size_t>(small)];
  }
  return layout;
}

std::vector<std::vector<RowId>> overlap_block_rows(const OverlapLayout& layout,
                                                   const Dataset& data) {
  const auto assignment = layout.tree.route_rows(data);
  std::vector<std::vector<RowId>> rows(layout.num_blocks());
  for (std::size_t r = 0; r < assignment.block_of_row.size(); ++r) {
    const BlockId own = assignment.block_of_row[r];
    rows[static_cast<std::size_t>(own)].push_back(static_cast<RowId>(r));
    if (auto it = layout.replica_map.find(own); it != layout.replica_map.end()) {
      rows[static_cast<std::size_t>(it->second)].push_back(static_cast<RowId>(r));
    }
  }
  return rows;
}

std::vector<RoutedBlock> route_query_overlap(const OverlapLayout& layout,
                                             const Query& q,
                                             const AdvancedRegistry& registry) {
  const Schema& schema = layout.tree.schema();
  std::vector<BlockId> cand;
  std::vector<std::vector<SemanticDescription>> hit(layout.num_blocks());
  for (std::size_t i = 0; i < layout.num_blocks(); ++i) {
    const auto b = static_cast<BlockId>(i);
    for (auto& p : layout.parts(b)) {
      if (intersects(p, q, schema, registry)) hit[i].push_back(std::move(p));
    }
    if (!hit[i].empty()) cand.push_back(b);
  }

  std::set<BlockId> kept(cand.begin(), cand.end());
  auto query_region = SemanticDescription::full(schema, registry.size());
  if (conjunctive_region(q.expr, schema, query_region)) {
    std::vector<BlockId> order = cand;
    std::sort(order.begin(), order.end(), [&](BlockId x, BlockId y) {
      const auto sx = layout.block_sizes[static_cast<std::size_t>(x)];
      const auto sy = layout.block_sizes[static_cast<std::size_t>(y)];
      return sx != sy ? sx > sy : x > y;
    });
    for (BlockId b : order) {
      const bool covered = std::all_of(
          hit[static_cast<std::size_t>(b)].begin(), hit[static_cast<std::size_t>(b)].end(),
          [&](const SemanticDescription& part) {
            const auto piece = meet(part, query_region);
            if (piece.is_empty()) return false;
            return std::any_of(kept.begin(), kept.end(), [&](BlockId k) {
              return k != b && piece.within(layout.region(k));
            });
          });
      if (covered) kept.erase(b);
    }
  }

  std::vector<RoutedBlock> out;
  std::vector<SemanticDescription> lower;
  for (BlockId b : kept) {
    out.push_back({b, lower});
    lower.push_back(layout.region(b));
  }
  return out;
}

std::vector<RowId> scan_with_ignore(const std::vector<std::vector<RowId>>& block_rows,
                                    const std::vector<RoutedBlock>& route,
                                    const Dataset& data, const Query& q,
                                    const AdvancedRegistry& registry) {
  std::vector<RowId> out;
  for (const auto& rb : route) {
    for (RowId r : block_rows.at(static_cast<std::size_t>(rb.block))) {
      const auto row = data.row(r);
      const bool dup = std::any_of(rb.ignore.begin(), rb.ignore.end(),
                                   [&](const SemanticDescription& d) {
                                     return d.contains(row, registry);
                                   });
      if (!dup && evaluate_query(q, row, registry)) out.push_back(r);
    }
  }
  return out;
}

SkipReport evaluate_overlap(const OverlapLayout& layout, const Dataset& data,
                            const Workload& w) {
  SkipReport rep;
  rep.num_rows = data.num_rows();
  rep.num_queries = w.size();
  rep.block_rows = layout.block_sizes;
  rep.per_block_skipped.assign(layout.num_blocks(), 0);
  rep.per_query_scanned.assign(w.size(), 0);
  rep.extra_storage_rows = layout.extra_storage_rows;
  for (std::size_t q = 0; q < w.size(); ++q) {
    std::vector<bool> read(layout.num_blocks(), false);
    for (const auto& rb : route_query_overlap(layout, w.queries[q], w.advanced)) {
      read[static_cast<std::size_t>(rb.block)] = true;
    }
    for (std::size_t b = 0; b < layout.num_blocks(); ++b) {
      if (read[b]) {
        rep.per_query_scanned[q] += layout.block_sizes[b];
      } else {
        rep.per_block_skipped[b] += layout.block_sizes[b];
      }
    }
  }
  rep.total_skipped = std::accumulate(rep.per_block_skipped.begin(),
                                      rep.per_block_skipped.end(), std::uint64_t{0});
  return rep;
}

std::string OverlapLayout::to_json(int indent) const {
  json j = json::parse(tree.to_json());
  const Schema& schema = tree.schema();
  j["mode"] = "overlap";
  json rmap = json::array();
  for (const auto& [s, r] : replica_map) rmap.push_back({s, r});
  j["replica_map"] = std::move(rmap);
  json wide = json::array();
  for (const auto& [b, d] : widened) {
    wide.push_back({{"block", b}, {"desc", description_to_json(d, schema)}});
  }
  j["widened"] = std::move(wide);
  j["block_sizes"] = block_sizes;
  j["extra_storage_rows"] = extra_storage_rows;
  return j.dump(indent);
}

OverlapLayout OverlapLayout::from_json(std::string_view text) {
  const json j = parse_json(text, "overlap layout");
  OverlapLayout out;
  out.tree = QdTree::from_json(text);
  try {
    if (j.value("mode", std::string()) != "overlap") {
      throw ParseError("overlap layout: 'mode' must be \"overlap\"");
    }
    const auto n = static_cast<BlockId>(out.tree.num_blocks());
    for (const auto& e : j.at("replica_map")) {
      const auto s = e.at(0).get<BlockId>();
      const auto r = e.at(1).get<BlockId>();
      if (s < 0 || s >= n || r < 0 || r >= n) {
        throw ParseError("overlap layout: replica_map names an unknown block");
      }
      out.replica_map[s] = r;
    }
    const auto& reg = out.tree.registry();
    std::size_t i = 0;
    for (const auto& e : j.at("widened")) {
      out.widened[e.at("block").get<BlockId>()] = description_from_json(
          e.at("desc"), out.tree.schema(), reg.size(),
          "overlap layout.widened[" + std::to_string(i++) + "]");
    }
    out.block_sizes = j.at("block_sizes").get<std::vector<std::uint64_t>>();
    if (out.block_sizes.size() != out.tree.num_blocks()) {
      throw ParseError("overlap layout: one block size per block required");
    }
    out.extra_storage_rows = j.at("extra_storage_rows").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("overlap layout: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------- two-tree

std::int64_t joint_objective(std::span<const std::uint64_t> a,
                             std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw InvalidArgument("per-query vectors differ in length");
  std::uint64_t sum = 0;
  for (std::size_t q = 0; q < a.size(); ++q) sum += std::max(a[q], b[q]);
  return static_cast<std::int64_t>(sum);
}

std::vector<std::size_t> worst_queries(std::span<const std::uint64_t> skipped,
                                       std::size_t k) {
  std::vector<std::size_t> idx(skipped.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t x, std::size_t y) { return skipped[x] < skipped[y]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

namespace {

QdTree grow_joint(const Dataset& data, const Workload& w, const GreedyConfig& cfg,
                  const std::vector<std::uint64_t>& other) {
  const Objective obj = [&other](std::span<const std::uint64_t> s) {
    return joint_objective(other, s);
  };
  return greedy_grow(QdTree(data.schema(), w.advanced), data, w, cfg, obj);
}

}  // namespace

TwoTreeLayout build_two_tree(const Dataset& data, const Workload& w,
                             const TwoTreeConfig& cfg) {
  if (cfg.k < 1 || cfg.k >= w.size()) {
    throw InvalidArgument("two-tree K must satisfy 1 <= K < |W|");
  }
  if (cfg.max_iters < 1) throw InvalidArgument("max iterations must be >= 1");
  TwoTreeLayout out;
  QdTree t1 = build_tree(data, w, cfg.build);
  auto s1 = per_query_skipped(t1, data, w);
  out.worst_queries = worst_queries(s1, cfg.k);

  Workload worst;
  worst.advanced = w.advanced;
  for (std::size_t q : out.worst_queries) worst.queries.push_back(w.queries[q]);
  GreedyConfig cfg2 = cfg.build.greedy;
  cfg2.cuts = extract_cuts(worst, data.schema()).all();

  QdTree t2;
  std::vector<std::uint64_t> s2;
  if (cfg.build.builder == Builder::kGreedy) {
    t2 = grow_joint(data, w, cfg2, s1);
    s2 = per_query_skipped(t2, data, w);
    out.objective_history.push_back(joint_objective(s1, s2));
    for (std::size_t iter = 1; cfg.rebuild_t1 && iter < cfg.max_iters; ++iter) {
      QdTree t1n = grow_joint(data, w, cfg.build.greedy, s2);
      auto s1n = per_query_skipped(t1n, data, w);
      std::int64_t best = joint_objective(s1n, s2);
      if (best <= out.objective_history.back()) break;
      t1 = std::move(t1n);
      s1 = std::move(s1n);
      QdTree t2n = grow_joint(data, w, cfg2, s1);
      auto s2n = per_query_skipped(t2n, data, w);
      if (const auto j = joint_objective(s1, s2n); j > best) {
        t2 = std::move(t2n);
        s2 = std::move(s2n);
        best = j;
      }
      out.objective_history.push_back(best);
    }
  } else {
    RlConfig rl = cfg.build.rl;
    rl.min_block_size = cfg.build.greedy.min_block_size;
    TrainOptions opts;
    opts.score = [&](const QdTree& t) {
      return static_cast<double>(joint_objective(s1, per_query_skipped(t, data, w)));
    };
    t2 = train(data, worst, cfg2.cuts, rl, opts).best;
    s2 = per_query_skipped(t2, data, w);
    out.objective_history.push_back(joint_objective(s1, s2));
  }

  out.t1 = frozen(t1, data);
  out.t2 = frozen(t2, data);
  if (cfg.prune) {
    out.pruned = true;
    std::set<BlockId> keep;
    for (const auto& q : worst.queries) {
      for (BlockId b : out.t2.route_query(q)) keep.insert(b);
    }
    out.t2_kept.assign(keep.begin(), keep.end());
  }
  choose_trees(out, data, w);
  return out;
}

void choose_trees(TwoTreeLayout& layout, const Dataset& data, const Workload& w) {
  const auto sizes1 = block_sizes(layout.t1, data);
  const auto sizes2 = block_sizes(layout.t2, data);
  const std::set<BlockId> kept(layout.t2_kept.begin(), layout.t2_kept.end());
  layout.choice.assign(w.size(), 0);
  for (std::size_t q = 0; q < w.size(); ++q) {
    std::uint64_t scan1 = 0, scan2 = 0;
    for (BlockId b : layout.t1.route_query(w.queries[q])) scan1 += sizes1[static_cast<std::size_t>(b)];
    bool usable = true;
    for (BlockId b : layout.t2.route_query(w.queries[q])) {
      scan2 += sizes2[static_cast<std::size_t>(b)];
      if (layout.pruned && !kept.count(b)) usable = false;
    }
    layout.choice[q] = usable && scan2 < scan1 ? 1 : 0;
  }
}

SkipReport evaluate_two_tree(const TwoTreeLayout& layout, const Dataset& data,
                             const Workload& w) {
  if (layout.choice.size() != w.size()) {
    throw InvalidArgument("tree choice does not cover the workload");
  }
  const auto sizes1 = block_sizes(layout.t1, data);
  const auto sizes2 = block_sizes(layout.t2, data);
  SkipReport rep;
  rep.num_rows = data.num_rows();
  rep.num_queries = w.size();
  rep.block_rows = sizes1;
  rep.block_rows.insert(rep.block_rows.end(), sizes2.begin(), sizes2.end());
  rep.per_block_skipped.assign(rep.block_rows.size(), 0);
  rep.per_query_scanned.assign(w.size(), 0);
  for (std::size_t q = 0; q < w.size(); ++q) {
    const bool second = layout.choice[q] == 1;
    const QdTree& t = second ? layout.t2 : layout.t1;
    const auto& sizes = second ? sizes2 : sizes1;
    const std::size_t offset = second ? sizes1.size() : 0;
    std::vector<bool> read(sizes.size(), false);
    for (BlockId b : t.route_query(w.queries[q])) read[static_cast<std::size_t>(b)] = true;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      if (read[b]) {
        rep.per_query_scanned[q] += sizes[b];
      } else {
        rep.per_block_skipped[offset + b] += sizes[b];
      }
    }
  }
  rep.total_skipped = std::accumulate(rep.per_block_skipped.begin(),
                                      rep.per_block_skipped.end(), std::uint64_t{0});
  if (layout.pruned) {
    for (BlockId b : layout.t2_kept) rep.extra_storage_rows += sizes2[static_cast<std::size_t>(b)];
  } else {
    rep.extra_storage_rows = data.num_rows();
  }
  return rep;
}

std::string TwoTreeLayout::to_json(int indent) const {
  json j{{"mode", "two-tree"},
         {"t1", json::parse(t1.to_json())},
         {"t2", json::parse(t2.to_json())},
         {"worst_queries", worst_queries},
         {"choice", choice},
         {"pruned", pruned},
         {"t2_kept", t2_kept},
         {"objective_history", objective_history}};
  return j.dump(indent);
}

TwoTreeLayout TwoTreeLayout::from_json(std::string_view text) {
  const json j = parse_json(text, "two-tree layout");
  TwoTreeLayout out;
  try {
    if (j.value("mode", std::string()) != "two-tree") {
      throw ParseError("two-tree layout: 'mode' must be \"two-tree\"");
    }
    out.t1 = QdTree::from_json(j.at("t1").dump());
    out.t2 = QdTree::from_json(j.at("t2").dump());
    out.worst_queries = j.at("worst_queries").get<std::vector<std::size_t>>();
    out.choice = j.at("choice").get<std::vector<int>>();
    out.pruned = j.at("pruned").get<bool>();
    out.t2_kept = j.at("t2_kept").get<std::vector<BlockId>>();
    out.objective_history = j.at("objective_history").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("two-tree layout: ") + e.what());
  }
  return out;
}

}  // namespace qdtree
