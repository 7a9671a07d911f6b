#include "doctest.h"

#include <set>

#include "qdtree/error.h"
#include "qdtree/harness.h"
#include "qdtree/io.h"
#include "qdtree/skipcost.h"
#include "support.h"

using namespace qdtree;
using namespace qdtree::testing;

namespace {

std::size_t count_matching(const Dataset& data, const Query& q, const AdvancedRegistry& reg) {
  std::size_t n = 0;
  for (RowId r = 0; r < data.num_rows(); ++r) n += expr_ref(q.expr, data.row(r), reg);
  return n;
}

std::set<std::vector<RowId>> partition_of(const QdTree& t, const Dataset& data) {
  const auto groups = t.route_rows(data).rows_by_block(t.num_blocks());
  return {groups.begin(), groups.end()};
}

Dataset line(Value n) {
  const Schema s({{"x", ColumnKind::kNumeric, n}});
  std::vector<Value> cells(static_cast<std::size_t>(n));
  std::iota(cells.begin(), cells.end(), 0);
  return Dataset(s, cells);
}

}  // namespace

TEST_CASE("microbenchmark generator selectivities") {
  GeneratorSpec spec;
  spec.seed = 7;
  const auto gen = generate(spec);
  REQUIRE(gen.data.num_rows() == 100000);
  REQUIRE(gen.workload.size() == 2);
  const double n = 100000.0;
  // Binomial standard deviations are about 0.0013 and 0.0003.
  CHECK(count_matching(gen.data, gen.workload.queries[0], {}) / n == doctest::Approx(0.1999).epsilon(0.01 / 0.1999));
  CHECK(count_matching(gen.data, gen.workload.queries[1], {}) / n == doctest::Approx(0.01).epsilon(0.2));
  CHECK(gen.data.schema().column(0).name == "cpu");
  CHECK(gen.data.schema().domain(1) == 10000);
}

TEST_CASE("propeller generator") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::kPropeller;
  spec.arm_rows = 1000;
  const auto gen = generate(spec);
  CHECK(gen.data.num_rows() == 4001);
  REQUIRE(gen.workload.size() == 4);
  for (const auto& q : gen.workload.queries) CHECK(count_matching(gen.data, q, {}) == 1001);
  // Only the centre row satisfies two queries.
  for (RowId r = 0; r < gen.data.num_rows(); ++r) {
    std::size_t hits = 0;
    for (const auto& q : gen.workload.queries) hits += expr_ref(q.expr, gen.data.row(r), {});
    CHECK(hits == (r == 0 ? 4u : 1u));
  }
}

TEST_CASE("generators are deterministic under a seed") {
  for (const char* kind : {"disjunctive_microbench", "propeller", "uniform", "clustered"}) {
    GeneratorSpec spec;
    spec.kind = parse_generator_kind(kind);
    spec.rows = 2000;
    spec.arm_rows = 100;
    spec.seed = 42;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(dataset_to_csv(a.data) == dataset_to_csv(b.data));
    CHECK(workload_to_json(a.workload, a.data.schema()).dump() ==
          workload_to_json(b.workload, b.data.schema()).dump());
    if (spec.kind != GeneratorKind::kPropeller) {
      spec.seed = 43;
      CHECK(dataset_to_csv(generate(spec).data) != dataset_to_csv(a.data));
    }
  }
  CHECK_THROWS_AS(parse_generator_kind("tpch"), InvalidArgument);
}

TEST_CASE("range baseline on an aligned query reads exactly the selected rows") {
  const auto data = line(100);
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(data.schema(), 0, CompareOp::kLt, 30))});
  BaselineSpec spec;
  spec.kind = BaselineKind::kRange;
  spec.block_size = 10;
  const auto layout = baseline_partition(spec, data, {});
  CHECK(layout.sizes.size() == 10);
  CHECK(evaluate_baseline(layout, data, w).access_fraction() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("random baseline on the microbenchmark") {
  const auto gen = generate({.seed = 7});
  BaselineSpec spec;
  spec.kind = BaselineKind::kRandom;
  spec.seed = 7;
  // With 5000 shuffled rows per block, the chance that a block lacks a
  // disk < 100 row is 0.99^5000, so nothing is skipped.
  spec.block_size = 5000;
  const auto layout = baseline_partition(spec, gen.data, {});
  CHECK(layout.sizes.size() == 20);
  const auto rep = evaluate_baseline(layout, gen.data, gen.workload);
  CHECK(rep.access_fraction() >= 0.999);

  // The same can_skip path as tree layouts.
  const auto direct = evaluate_blocks(layout.descs, layout.sizes, gen.workload, gen.data.schema(),
                                      gen.data.num_rows());
  CHECK(direct.total_skipped == rep.total_skipped);

  auto groups = layout.assignment.rows_by_block(layout.sizes.size());
  std::vector<RowId> all;
  for (auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  CHECK(all.size() == gen.data.num_rows());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("a block size covering the table gives one full-scan block") {
  const auto data = line(50);
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(data.schema(), 0, CompareOp::kLt, 10))});
  for (auto kind : {BaselineKind::kRandom, BaselineKind::kRange}) {
    BaselineSpec spec;
    spec.kind = kind;
    spec.block_size = 80;
    const auto layout = baseline_partition(spec, data, {});
    CHECK(layout.sizes == std::vector<std::uint64_t>{50});
    const auto rep = evaluate_baseline(layout, data, w);
    CHECK(rep.access_fraction() == 1.0);
    CHECK(summary_line(rep) == "access_fraction=1.0");
  }
  BaselineSpec bad;
  bad.block_size = 0;
  CHECK_THROWS_AS(baseline_partition(bad, data, {}), InvalidArgument);
}

TEST_CASE("oracle picks the single separating cut") {
  const auto data = line(100);
  const Schema& s = data.schema();
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 30))});
  const std::vector<Cut> cuts{UnaryPredicate::compare(s, 0, CompareOp::kLt, 50),
                              UnaryPredicate::compare(s, 0, CompareOp::kLt, 30),
                              UnaryPredicate::compare(s, 0, CompareOp::kLt, 70)};
  const auto res = oracle_opt(data, w, cuts, 1, 2);
  CHECK(res.c_opt == 70);
  REQUIRE(res.tree.num_blocks() == 2);
  CHECK(*res.tree.node(0).cut == cuts[1]);
}

TEST_CASE("oracle on a downscaled microbenchmark finds the disk-then-cpu layout") {
  // 200 rows is the oracle's size limit.
  const auto gen = generate({.rows = 200, .seed = 11});
  const auto& data = gen.data;
  const Schema& s = data.schema();
  const auto cuts = extract_cuts(gen.workload, s).all();
  const auto res = oracle_opt(data, gen.workload, cuts, 1, 4);

  QdTree rl(s, {});
  rl = rl.split(0, UnaryPredicate::compare(s, 1, CompareOp::kLt, 100));
  rl = rl.split(rl.node(0).right, UnaryPredicate::compare(s, 0, CompareOp::kGt, 9000));
  rl = rl.split(rl.node(rl.node(0).right).right, UnaryPredicate::compare(s, 0, CompareOp::kLt, 1000));
  CHECK(res.c_opt == tree_skipped(rl, data, gen.workload));
  CHECK(partition_of(res.tree, data) == partition_of(rl, data));
}

TEST_CASE("no extra cut improves on the oracle tree") {
  std::mt19937_64 rng(12);
  const Schema s = mixed_schema(20, 3);
  for (int i = 0; i < 25; ++i) {
    const auto data = random_dataset(s, static_cast<std::size_t>(pick(rng, 10, 60)), rng);
    Workload w;
    for (int q = 0; q < 3; ++q) w.queries.push_back({random_expr(s, 0, rng, 0, false)});
    auto cuts = extract_cuts(w, s).all();
    if (cuts.size() > 6) cuts.resize(6);
    const auto b = static_cast<std::size_t>(pick(rng, 1, 5));
    const auto res = oracle_opt(data, w, cuts, b);
    CHECK(tree_skipped(res.tree, data, w) == res.c_opt);
    const auto routed = res.tree.route_rows(data).rows_by_block(res.tree.num_blocks());
    for (BlockId blk = 0; blk < static_cast<BlockId>(res.tree.num_blocks()); ++blk) {
      for (const auto& c : cuts) {
        std::size_t left = 0;
        for (RowId r : routed[static_cast<std::size_t>(blk)]) left += cut_ref(c, data.row(r));
        const std::size_t right = routed[static_cast<std::size_t>(blk)].size() - left;
        if (left < b || right < b) continue;
        const auto grown = res.tree.split(res.tree.leaf_of_block(blk), c);
        CHECK(tree_skipped(grown, data, w) <= res.c_opt);
      }
    }
  }
}

TEST_CASE("oracle size limits") {
  const auto big = line(201);
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(big.schema(), 0, CompareOp::kLt, 3))});
  const std::vector<Cut> one{UnaryPredicate::compare(big.schema(), 0, CompareOp::kLt, 3)};
  CHECK_THROWS_AS(oracle_opt(big, w, one, 1), TooLarge);
  const auto small = line(20);
  std::vector<Cut> seven;
  for (Value v = 1; v <= 7; ++v) seven.push_back(UnaryPredicate::compare(small.schema(), 0, CompareOp::kLt, v));
  CHECK_THROWS_AS(oracle_opt(small, w, seven, 1), TooLarge);
}

TEST_CASE("reports and block output") {
  SkipReport rep;
  rep.num_rows = 4;
  rep.num_queries = 1;
  rep.per_query_scanned = {2};
  rep.extra_storage_rows = 3;
  CHECK(summary_line(rep) == "access_fraction=0.5 extra_storage_rows=3");

  const Schema s({{"x", ColumnKind::kNumeric, 10}, {"y", ColumnKind::kNumeric, 10}});
  const Dataset data(s, {1, 2, 3, 4});
  CHECK(bid_csv(data, {{0}, {0, 1}}) == "x,y,BID\n1,2,0\n1,2,1\n3,4,1\n");
}

TEST_CASE("partitioner comparison on the microbenchmark") {
  const auto gen = generate({.rows = 20000, .seed = 7});
  BuildConfig cfg;
  cfg.greedy.min_block_size = 50;
  cfg.greedy.cuts = extract_cuts(gen.workload, gen.data.schema()).all();
  cfg.rl.episodes = 30;
  cfg.rl.hidden_width = 16;
  const auto rows = compare_partitioners(gen.data, gen.workload, cfg, true);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.partitioner);
  CHECK(names == std::vector<std::string>{"greedy", "rl", "random", "range:cpu", "range:disk"});
  for (const auto& r : rows) {
    CHECK(r.access_fraction > 0.0);
    CHECK(r.access_fraction <= 1.0);
  }
  const auto csv = comparison_csv(rows);
  CHECK(csv.rfind("partitioner,blocks,access_fraction,extra_storage_rows\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}
