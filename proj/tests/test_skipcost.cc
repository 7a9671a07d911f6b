#include "doctest.h"

#include "qdtree/error.h"
#include "qdtree/harness.h"
#include "qdtree/io.h"
#include "qdtree/skipcost.h"
#include "support.h"

using namespace qdtree;
using namespace qdtree::testing;

namespace {

// Every point of a small description, enumerated.
template <class F>
void for_each_point(const SemanticDescription& d, const Schema& s, F&& f) {
  std::vector<Value> row(s.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t c) {
    if (c == s.size()) {
      f(std::span<const Value>(row));
      return;
    }
    for (Value v = 0; v < s.domain(c); ++v) {
      const bool in = s.is_numeric(c) ? d.ranges[c].contains(v) : d.masks[c].test(static_cast<std::size_t>(v));
      if (!in) continue;
      row[c] = v;
      rec(c + 1);
    }
  };
  rec(0);
}

}  // namespace

TEST_CASE("skip decisions on hand-built blocks") {
  const Schema s({{"col0", ColumnKind::kNumeric, 100}});
  auto d = SemanticDescription::full(s, 0);
  d.ranges[0] = {3, 8};
  CHECK(can_skip(d, Query{Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kGe, 8))}, s, {}));
  CHECK_FALSE(can_skip(d, Query{Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kGe, 7))}, s, {}));
  const auto full = SemanticDescription::full(s, 0);
  CHECK_FALSE(can_skip(full, Query{Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 1))}, s, {}));
}

TEST_CASE("the mid-cpu, high-disk block is skipped by both microbenchmark queries") {
  const auto gen = generate({});
  const Schema& s = gen.data.schema();
  auto d = SemanticDescription::full(s, 0);
  d.ranges[0] = {1000, 9001};
  d.ranges[1] = {100, 10000};
  const auto skips = skipping_queries(d, gen.workload, s, {});
  CHECK(skips == std::vector<bool>{true, true});
}

TEST_CASE("two blocks, each skipped by one query") {
  const Schema s({{"x", ColumnKind::kNumeric, 10}});
  auto lo = SemanticDescription::full(s, 0);
  lo.ranges[0] = {0, 5};
  auto hi = SemanticDescription::full(s, 0);
  hi.ranges[0] = {5, 10};
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 5))});   // skips hi
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kGe, 5))});   // skips lo
  const std::vector<SemanticDescription> descs{lo, hi};
  const std::vector<std::uint64_t> sizes{5, 5};
  const auto rep = evaluate_blocks(descs, sizes, w, s, 10);
  CHECK(rep.total_skipped == 10);
  CHECK(rep.access_fraction() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.per_block_skipped == std::vector<std::uint64_t>{5, 5});
  CHECK(rep.per_query_scanned == std::vector<std::uint64_t>{5, 5});
  CHECK(rep.per_query_csv() == "query,scanned,access_fraction\n0,5,0.5\n1,5,0.5\n");
  const auto j = parse_json(rep.to_json(), "report");
  CHECK(j["total_skipped"] == 10);

  const std::vector<SemanticDescription> one{SemanticDescription::full(s, 0)};
  const std::vector<std::uint64_t> ten{10};
  Workload single;
  single.queries.push_back(w.queries[0]);
  const auto whole = evaluate_blocks(one, ten, single, s, 10);
  CHECK(whole.total_skipped == 0);
  CHECK(whole.access_fraction() == 1.0);
}

TEST_CASE("disk split layout on the microbenchmark") {
  const auto gen = generate({});
  const auto& data = gen.data;
  const Schema& s = data.schema();
  QdTree t(s, {});
  t = t.split(0, UnaryPredicate::compare(s, 1, CompareOp::kLt, 100));
  const auto a = t.route_rows(data);
  const auto frozen = t.freeze(a, data);
  const auto rep = evaluate_partitioning(frozen, a, data, gen.workload);

  // Q1 touches both blocks; Q2 touches only the low-disk block.
  std::uint64_t low_disk = 0;
  for (RowId r = 0; r < data.num_rows(); ++r) low_disk += data.at(r, 1) < 100;
  const double n = static_cast<double>(data.num_rows());
  const double expected = (n + static_cast<double>(low_disk)) / (2.0 * n);
  CHECK(rep.access_fraction() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.access_fraction() == doctest::Approx(0.505).epsilon(0.01 / 0.505));
}

TEST_CASE("skipping is sound, and exact for single-predicate queries") {
  std::mt19937_64 rng(8);
  const Schema s = mixed_schema(10, 3);
  for (int i = 0; i < 300; ++i) {
    const auto data = random_dataset(s, 6, rng);
    std::vector<RowId> rows(data.num_rows());
    std::iota(rows.begin(), rows.end(), 0);
    const auto d = SemanticDescription::tight(data, rows, {}, SemanticDescription::full(s, 0));
    const Query single{Expr::leaf(random_predicate(s, rng))};
    const Query nested{random_expr(s, 0, rng)};
    for (const auto* q : {&single, &nested}) {
      bool satisfiable = false;
      for_each_point(d, s, [&](std::span<const Value> p) { satisfiable |= expr_ref(q->expr, p, {}); });
      if (can_skip(d, *q, s, {})) CHECK_FALSE(satisfiable);
      if (q == &single) CHECK(can_skip(d, *q, s, {}) == !satisfiable);
    }
  }
}

TEST_CASE("subtree sums, consistency and conservation") {
  std::mt19937_64 rng(9);
  const Schema s = mixed_schema(20, 4);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_tree(s, {}, static_cast<std::size_t>(pick(rng, 1, 6)), rng);
    const auto data = random_dataset(s, 20, rng);
    Workload w;
    for (int q = 0; q < 2; ++q) w.queries.push_back({random_expr(s, 0, rng)});
    std::vector<RowId> rows(data.num_rows());
    std::iota(rows.begin(), rows.end(), 0);

    const auto routed = route_subset(t, data, rows);
    for (const auto& n : t.nodes()) {
      std::vector<RowId> under;
      for (NodeId leaf : t.leaves_under(n.id)) {
        under.insert(under.end(), routed[static_cast<std::size_t>(leaf)].begin(),
                     routed[static_cast<std::size_t>(leaf)].end());
      }
      std::sort(under.begin(), under.end());
      const auto got = skipped_under_node(t, n.id, data, under, w);
      if (n.is_leaf()) {
        CHECK(got == block_skipped(data, under, w, {}));
      } else {
        std::vector<RowId> left_rows, right_rows;
        for (RowId r : under) (cut_matches(*n.cut, data.row(r)) ? left_rows : right_rows).push_back(r);
        CHECK(got == skipped_under_node(t, n.left, data, left_rows, w) +
                         skipped_under_node(t, n.right, data, right_rows, w));
      }
    }

    const auto a = t.route_rows(data);
    const auto frozen = t.freeze(a, data);
    const auto rep = evaluate_partitioning(frozen, a, data, w);
    CHECK(rep.total_skipped == skipped_under_node(t, 0, data, rows, w));
    CHECK(rep.total_skipped == tree_skipped(t, data, w));
    for (std::size_t q = 0; q < w.size(); ++q) {
      std::uint64_t skipped_q = 0;
      for (std::size_t b = 0; b < t.num_blocks(); ++b) {
        if (rep.block_rows[b] > 0 && !intersects(frozen.block_description(static_cast<BlockId>(b)), w.queries[q], s, {})) {
          skipped_q += rep.block_rows[b];
        }
      }
      CHECK(rep.per_query_scanned[q] + skipped_q == data.num_rows());
    }
    CHECK(rep.access_fraction() >= 0.0);
    CHECK(rep.access_fraction() <= 1.0);
  }
}

TEST_CASE("splitting a leaf never lowers the skipped total") {
  std::mt19937_64 rng(10);
  const Schema s = mixed_schema(30, 4);
  for (int i = 0; i < 60; ++i) {
    const auto data = random_dataset(s, 40, rng);
    Workload w;
    for (int q = 0; q < 3; ++q) w.queries.push_back({random_expr(s, 0, rng)});
    const auto t = random_tree(s, {}, 8, rng);
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k <= t.log().size(); ++k) {
      const auto c = tree_skipped(replay(s, {}, t.log(), k), data, w);
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("evaluation rejects inconsistent inputs") {
  const Schema s({{"x", ColumnKind::kNumeric, 10}});
  const QdTree t(s, {});
  const Dataset data(s, {1, 2});
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 5))});
  BlockAssignment a;
  a.block_of_row = {0};
  CHECK_THROWS_AS(evaluate_partitioning(t, a, data, w), AssignmentMismatch);
  a.block_of_row = {0, 1};
  CHECK_THROWS_AS(evaluate_partitioning(t, a, data, w), AssignmentMismatch);
  const std::vector<SemanticDescription> descs{SemanticDescription::full(s, 0)};
  CHECK_THROWS_AS(evaluate_blocks(descs, std::vector<std::uint64_t>{}, w, s, 2), InvalidArgument);
}
