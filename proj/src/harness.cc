#include "qdtree/harness.h"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <random>

#include "qdtree/error.h"
#include "qdtree/io.h"

namespace qdtree {

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "disjunctive_microbench") return GeneratorKind::kDisjunctiveMicrobench;
  if (name == "propeller") return GeneratorKind::kPropeller;
  if (name == "uniform") return GeneratorKind::kUniform;
  if (name == "clustered") return GeneratorKind::kClustered;
  throw InvalidArgument("unknown generator '" + std::string(name) + "'");
}

PropellerGeometry propeller_geometry() { return {}; }

namespace {

Expr pred(const Schema& s, std::size_t col, CompareOp op, Value lit) {
  return Expr::leaf(UnaryPredicate::compare(s, col, op, lit));
}

Value draw(std::mt19937_64& rng, Value lo, Value hi_inclusive) {
  return std::uniform_int_distribution<Value>(lo, hi_inclusive)(rng);
}

Schema numeric_schema(std::size_t columns, Value domain) {
  std::vector<Column> cols;
  for (std::size_t c = 0; c < columns; ++c) {
    cols.push_back({"c" + std::to_string(c), ColumnKind::kNumeric, domain});
  }
  return Schema(std::move(cols));
}

Generated microbench(const GeneratorSpec& spec) {
  Schema schema({{"cpu", ColumnKind::kNumeric, 10000}, {"disk", ColumnKind::kNumeric, 10000}});
  std::mt19937_64 rng(derive_seed(spec.seed, "generator"));
  std::vector<Value> cells;
  cells.reserve(spec.rows * 2);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    cells.push_back(draw(rng, 0, 9999));
    cells.push_back(draw(rng, 0, 9999));
  }
  Workload w;
  w.queries.push_back({Expr::any({pred(schema, 0, CompareOp::kLt, 1000),
                                  pred(schema, 0, CompareOp::kGt, 9000)})});
  w.queries.push_back({pred(schema, 1, CompareOp::kLt, 100)});
  return {Dataset(schema, std::move(cells)), std::move(w)};
}

Generated propeller(const GeneratorSpec& spec) {
  const auto g = propeller_geometry();
  Schema schema({{"x", ColumnKind::kNumeric, g.domain}, {"y", ColumnKind::kNumeric, g.domain}});
  std::mt19937_64 rng(derive_seed(spec.seed, "generator"));
  const Value m = g.centre;
  const Value a = g.arm_extent;
  // Quadrant boxes strictly away from the centre lines.
  const Value boxes[4][4] = {{m - a, m - 1, m + 1, m + a},   // upper left
                             {m + 1, m + a, m + 1, m + a},   // upper right
                             {m + 1, m + a, m - a, m - 1},   // lower right
                             {m - a, m - 1, m - a, m - 1}};  // lower left
  std::vector<Value> cells{m, m};
  for (const auto& box : boxes) {
    for (std::size_t i = 0; i < spec.arm_rows; ++i) {
      cells.push_back(draw(rng, box[0], box[1]));
      cells.push_back(draw(rng, box[2], box[3]));
    }
  }
  Workload w;
  const CompareOp xs[4] = {CompareOp::kLe, CompareOp::kGe, CompareOp::kGe, CompareOp::kLe};
  const CompareOp ys[4] = {CompareOp::kGe, CompareOp::kGe, CompareOp::kLe, CompareOp::kLe};
  for (int i = 0; i < 4; ++i) {
    w.queries.push_back({Expr::all({pred(schema, 0, xs[i], m), pred(schema, 1, ys[i], m)})});
  }
  return {Dataset(schema, std::move(cells)), std::move(w)};
}

Generated uniform(const GeneratorSpec& spec) {
  if (spec.columns == 0 || spec.domain < 2) throw InvalidArgument("uniform: bad shape");
  Schema schema = numeric_schema(spec.columns, spec.domain);
  std::mt19937_64 rng(derive_seed(spec.seed, "generator"));
  std::vector<Value> cells;
  cells.reserve(spec.rows * spec.columns);
  for (std::size_t i = 0; i < spec.rows * spec.columns; ++i) {
    cells.push_back(draw(rng, 0, spec.domain - 1));
  }
  auto w = random_range_workload(schema, spec.queries, derive_seed(spec.seed, "queries"));
  return {Dataset(schema, std::move(cells)), std::move(w)};
}

Generated clustered(const GeneratorSpec& spec) {
  if (spec.columns == 0 || spec.domain < 2 || spec.clusters == 0) {
    throw InvalidArgument("clustered: bad shape");
  }
  Schema schema = numeric_schema(spec.columns, spec.domain);
  std::mt19937_64 rng(derive_seed(spec.seed, "generator"));
  std::vector<std::vector<Value>> centres(spec.clusters);
  for (auto& c : centres) {
    for (std::size_t d = 0; d < spec.columns; ++d) c.push_back(draw(rng, 0, spec.domain - 1));
  }
  std::vector<Value> cells;
  cells.reserve(spec.rows * spec.columns);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    const auto& c = centres[static_cast<std::size_t>(
        draw(rng, 0, static_cast<Value>(spec.clusters) - 1))];
    for (std::size_t d = 0; d < spec.columns; ++d) {
      const Value lo = std::max<Value>(0, c[d] - spec.spread);
      const Value hi = std::min<Value>(spec.domain - 1, c[d] + spec.spread);
      cells.push_back(draw(rng, lo, hi));
    }
  }
  auto w = random_range_workload(schema, spec.queries, derive_seed(spec.seed, "queries"));
  return {Dataset(schema, std::move(cells)), std::move(w)};
}

}  // namespace

Generated generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorKind::kDisjunctiveMicrobench: return microbench(spec);
    case GeneratorKind::kPropeller: return propeller(spec);
    case GeneratorKind::kUniform: return uniform(spec);
    case GeneratorKind::kClustered: return clustered(spec);
  }
  throw InvalidArgument("unknown generator kind");
}

Workload random_range_workload(const Schema& schema, std::size_t count,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Workload w;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::size_t> cols(schema.size());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::shuffle(cols.begin(), cols.end(), rng);
    const std::size_t used = std::min<std::size_t>(
        schema.size(), static_cast<std::size_t>(draw(rng, 1, 2)));
    std::vector<Expr> conj;
    for (std::size_t k = 0; k < used; ++k) {
      const std::size_t c = cols[k];
      const Value dom = schema.domain(c);
      Value lo = draw(rng, 1, dom - 1);
      Value hi = draw(rng, 1, dom - 1);
      if (lo > hi) std::swap(lo, hi);
      switch (draw(rng, 0, 2)) {
        case 0: conj.push_back(pred(schema, c, CompareOp::kLt, hi)); break;
        case 1: conj.push_back(pred(schema, c, CompareOp::kGe, lo)); break;
        default:
          conj.push_back(pred(schema, c, CompareOp::kGe, lo));
          conj.push_back(pred(schema, c, CompareOp::kLe, hi));
      }
    }
    w.queries.push_back({conj.size() == 1 ? conj[0] : Expr::all(std::move(conj))});
  }
  return w;
}

BaselineLayout baseline_partition(const BaselineSpec& spec, const Dataset& data,
                                  const AdvancedRegistry& registry) {
  if (spec.block_size < 1) throw InvalidArgument("block size must be >= 1");
  if (data.num_rows() == 0) throw EmptyDataset("baseline: no rows");
  std::vector<RowId> order(data.num_rows());
  std::iota(order.begin(), order.end(), RowId{0});
  if (spec.kind == BaselineKind::kRandom) {
    std::mt19937_64 rng(derive_seed(spec.seed, "shuffle"));
    std::shuffle(order.begin(), order.end(), rng);
  } else {
    if (spec.range_column >= data.num_columns()) {
      throw InvalidArgument("range column out of bounds");
    }
    std::stable_sort(order.begin(), order.end(), [&](RowId a, RowId b) {
      return data.at(a, spec.range_column) < data.at(b, spec.range_column);
    });
  }
  BaselineLayout out;
  out.assignment.block_of_row.assign(data.num_rows(), 0);
  const auto outline = SemanticDescription::full(data.schema(), registry.size());
  for (std::size_t start = 0; start < order.size(); start += spec.block_size) {
    const std::size_t end = std::min(order.size(), start + spec.block_size);
    const std::span<const RowId> chunk(order.data() + start, end - start);
    const auto b = static_cast<BlockId>(out.descs.size());
    for (RowId r : chunk) out.assignment.block_of_row[r] = b;
    out.descs.push_back(SemanticDescription::tight(data, chunk, registry, outline));
    out.sizes.push_back(chunk.size());
  }
  return out;
}

SkipReport evaluate_baseline(const BaselineLayout& layout, const Dataset& data,
                             const Workload& w) {
  return evaluate_blocks(layout.descs, layout.sizes, w, data.schema(), data.num_rows());
}

namespace {

using RowSet = std::vector<std::uint64_t>;

class Oracle {
 public:
  Oracle(const Dataset& data, const Workload& w, const std::vector<Cut>& cuts,
         std::size_t b)
      : data_(data), w_(w), cuts_(cuts), b_(b) {
    words_ = (data.num_rows() + 63) / 64;
  }

  struct Choice {
    std::uint64_t value = 0;
    int cut = -1;  // -1: leaf
    std::size_t left_budget = 0;
  };

  std::uint64_t solve(const RowSet& rows, std::size_t budget) {
    return best(rows, budget).value;
  }

  QdTree witness(const RowSet& rows, std::size_t budget) {
    QdTree t(data_.schema(), w_.advanced);
    build(t, 0, rows, budget);
    return t;
  }

  RowSet all() const {
    RowSet s(words_, 0);
    for (std::size_t r = 0; r < data_.num_rows(); ++r) s[r >> 6] |= 1ULL << (r & 63);
    return s;
  }

 private:
  static std::size_t count(const RowSet& s) {
    std::size_t n = 0;
    for (auto x : s) n += static_cast<std::size_t>(std::popcount(x));
    return n;
  }

  std::vector<RowId> ids(const RowSet& s) const {
    std::vector<RowId> out;
    for (std::size_t r = 0; r < data_.num_rows(); ++r) {
      if ((s[r >> 6] >> (r & 63)) & 1u) out.push_back(static_cast<RowId>(r));
    }
    return out;
  }

  std::pair<RowSet, RowSet> split(const RowSet& s, const Cut& cut) const {
    RowSet l(words_, 0), r(words_, 0);
    for (RowId id : ids(s)) {
      auto& side = cut_matches(cut, data_.row(id)) ? l : r;
      side[id >> 6] |= 1ULL << (id & 63);
    }
    return {l, r};
  }

  const Choice& best(const RowSet& rows, std::size_t budget) {
    const auto key = std::make_pair(rows, budget);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const auto members = ids(rows);
    Choice c;
    c.value = block_skipped(data_, members, w_, w_.advanced);
    if (budget >= 2) {
      for (std::size_t i = 0; i < cuts_.size(); ++i) {
        auto [l, r] = split(rows, cuts_[i]);
        const std::size_t nl = count(l), nr = count(r);
        if (nl < b_ || nr < b_) continue;
        for (std::size_t k = 1; k < budget; ++k) {
          const auto v = best(l, k).value + best(r, budget - k).value;
          if (v > c.value) {
            c.value = v;
            c.cut = static_cast<int>(i);
            c.left_budget = k;
          }
        }
      }
    }
    return memo_.emplace(key, c).first->second;
  }

  void build(QdTree& t, NodeId node, const RowSet& rows, std::size_t budget) {
    const Choice c = best(rows, budget);
    if (c.cut < 0) return;
    const Cut& cut = cuts_[static_cast<std::size_t>(c.cut)];
    t = std::move(t).split(node, cut);
    const NodeId left = t.node(node).left;
    const NodeId right = t.node(node).right;
    auto [l, r] = split(rows, cut);
    build(t, left, l, c.left_budget);
    build(t, right, r, budget - c.left_budget);
  }

  const Dataset& data_;
  const Workload& w_;
  const std::vector<Cut>& cuts_;
  std::size_t b_;
  std::size_t words_ = 0;
  std::map<std::pair<RowSet, std::size_t>, Choice> memo_;
};

}  // namespace

OracleResult oracle_opt(const Dataset& data, const Workload& w,
                        const std::vector<Cut>& cuts, std::size_t min_block_size,
                        std::size_t max_leaves) {
  if (data.num_rows() > 200) throw TooLarge("oracle: more than 200 rows");
  if (cuts.size() > 6) throw TooLarge("oracle: more than 6 cuts");
  if (min_block_size < 1) throw InvalidArgument("min block size must be >= 1");
  if (data.num_rows() == 0) throw EmptyDataset("oracle: no rows");
  const std::size_t cap = std::max<std::size_t>(1, data.num_rows() / min_block_size);
  const std::size_t budget = max_leaves == 0 ? cap : std::min(max_leaves, cap);
  Oracle o(data, w, cuts, min_block_size);
  const auto all = o.all();
  OracleResult res;
  res.c_opt = o.solve(all, budget);
  res.tree = o.witness(all, budget);
  return res;
}

std::string summary_line(const SkipReport& rep) {
  std::string out = "access_fraction=" + json(rep.access_fraction()).dump();
  if (rep.extra_storage_rows > 0) {
    out += " extra_storage_rows=" + std::to_string(rep.extra_storage_rows);
  }
  return out;
}

std::string bid_csv(const Dataset& data,
                    const std::vector<std::vector<RowId>>& rows_by_block) {
  std::vector<std::vector<BlockId>> blocks_of(data.num_rows());
  for (std::size_t b = 0; b < rows_by_block.size(); ++b) {
    for (RowId r : rows_by_block[b]) blocks_of.at(r).push_back(static_cast<BlockId>(b));
  }
  std::string out;
  for (const auto& c : data.schema().columns()) out += c.name + ',';
  out += "BID\n";
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    std::sort(blocks_of[r].begin(), blocks_of[r].end());
    std::string prefix;
    for (Value v : data.row(static_cast<RowId>(r))) prefix += std::to_string(v) + ',';
    for (BlockId b : blocks_of[r]) out += prefix + std::to_string(b) + '\n';
  }
  return out;
}

std::vector<ComparisonRow> compare_partitioners(const Dataset& data,
                                                const Workload& w,
                                                const BuildConfig& cfg,
                                                bool include_rl) {
  std::vector<ComparisonRow> rows;
  auto add_tree = [&](const std::string& name, const QdTree& t) {
    const auto assignment = t.route_rows(data);
    const auto frozen = t.freeze(assignment, data);
    const auto rep = evaluate_partitioning(frozen, assignment, data, w);
    rows.push_back({name, frozen.num_blocks(), rep.access_fraction(), 0});
  };
  BuildConfig greedy = cfg;
  greedy.builder = Builder::kGreedy;
  add_tree("greedy", build_tree(data, w, greedy));
  if (include_rl) {
    BuildConfig rl = cfg;
    rl.builder = Builder::kRl;
    add_tree("rl", build_tree(data, w, rl));
  }
  const std::size_t b = cfg.greedy.min_block_size;
  BaselineSpec random{BaselineKind::kRandom, b, 0, cfg.rl.seed};
  const auto rnd = baseline_partition(random, data, w.advanced);
  rows.push_back({"random", rnd.sizes.size(), evaluate_baseline(rnd, data, w).access_fraction(), 0});
  for (std::size_t c = 0; c < data.num_columns(); ++c) {
    BaselineSpec range{BaselineKind::kRange, b, c, cfg.rl.seed};
    const auto lay = baseline_partition(range, data, w.advanced);
    rows.push_back({"range:" + data.schema().column(c).name, lay.sizes.size(),
                    evaluate_baseline(lay, data, w).access_fraction(), 0});
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "partitioner,blocks,access_fraction,extra_storage_rows\n";
  for (const auto& r : rows) {
    out += r.partitioner + ',' + std::to_string(r.blocks) + ',' +
           json(r.access_fraction).dump() + ',' + std::to_string(r.extra_storage_rows) + '\n';
  }
  return out;
}

}  // namespace qdtree
