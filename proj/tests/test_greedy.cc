#include "doctest.h"

#include <chrono>
#include <map>

#include "qdtree/error.h"
#include "qdtree/greedy.h"
#include "qdtree/harness.h"
#include "qdtree/skipcost.h"
#include "support.h"

using namespace qdtree;
using namespace qdtree::testing;

namespace {

// Best C over every cut sequence with both children >= b, by plain recursion
// over row sets.
std::uint64_t brute_force_opt(const Dataset& data, const Workload& w, const std::vector<Cut>& cuts,
                              std::size_t b, const std::vector<RowId>& rows,
                              std::map<std::vector<RowId>, std::uint64_t>& memo) {
  if (auto it = memo.find(rows); it != memo.end()) return it->second;
  std::uint64_t best = block_skipped(data, rows, w, w.advanced);
  for (const auto& c : cuts) {
    std::vector<RowId> l, r;
    for (RowId x : rows) (cut_ref(c, data.row(x)) ? l : r).push_back(x);
    if (l.size() < b || r.size() < b) continue;
    best = std::max(best, brute_force_opt(data, w, cuts, b, l, memo) +
                              brute_force_opt(data, w, cuts, b, r, memo));
  }
  memo.emplace(rows, best);
  return best;
}

Workload range_workload(const Schema& s, std::size_t n, std::mt19937_64& rng) {
  Workload w;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(pick(rng, 0, 1));
    const Value lo = pick(rng, 0, s.domain(c) - 2);
    const Value hi = pick(rng, lo + 1, s.domain(c) - 1);
    w.queries.push_back({Expr::all({Expr::leaf(UnaryPredicate::compare(s, c, CompareOp::kGe, lo)),
                                    Expr::leaf(UnaryPredicate::compare(s, c, CompareOp::kLt, hi))})});
  }
  return w;
}

std::vector<Cut> range_cuts(const Schema& s, std::size_t n, std::mt19937_64& rng) {
  std::vector<Cut> cuts;
  while (cuts.size() < n) {
    const auto c = static_cast<std::size_t>(pick(rng, 0, 1));
    cuts.push_back(UnaryPredicate::compare(s, c, CompareOp::kLt, pick(rng, 1, s.domain(c) - 1)));
  }
  return cuts;
}

}  // namespace

TEST_CASE("greedy picks the disk cut on the microbenchmark") {
  const auto gen = generate({});
  GreedyConfig cfg;
  cfg.min_block_size = 50;
  cfg.cuts = extract_cuts(gen.workload, gen.data.schema()).all();
  const auto t = greedy_build(gen.data, gen.workload, cfg);
  REQUIRE(t.num_blocks() == 2);
  CHECK(describe(*t.node(0).cut, gen.data.schema()) == "disk < 100");
  const auto a = t.route_rows(gen.data);
  const auto rep = evaluate_partitioning(t.freeze(a, gen.data), a, gen.data, gen.workload);
  std::uint64_t low_disk = 0;
  for (RowId r = 0; r < gen.data.num_rows(); ++r) low_disk += gen.data.at(r, 1) < 100;
  const double n = static_cast<double>(gen.data.num_rows());
  CHECK(rep.access_fraction() == doctest::Approx((n + low_disk) / (2 * n)).epsilon(1e-12));
}

TEST_CASE("fewer than 2b rows keep the root whole") {
  std::mt19937_64 rng(1);
  const Schema s = mixed_schema();
  const auto data = random_dataset(s, 19, rng);
  Workload w = range_workload(s, 3, rng);
  GreedyConfig cfg;
  cfg.min_block_size = 10;
  cfg.cuts = extract_cuts(w, s).all();
  CHECK(greedy_build(data, w, cfg).num_blocks() == 1);
}

TEST_CASE("argument checks") {
  const Schema s = mixed_schema();
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 3))});
  GreedyConfig cfg;
  cfg.cuts = extract_cuts(w, s).all();
  CHECK_THROWS_AS(greedy_build(Dataset(s, {}), w, cfg), EmptyDataset);
  cfg.cuts.clear();
  CHECK_THROWS_AS(greedy_build(Dataset(s, {1, 1, 1}), w, cfg), InvalidArgument);
}

TEST_CASE("oracle matches an independent brute force") {
  std::mt19937_64 rng(2);
  const Schema s = mixed_schema(16, 3);
  for (int i = 0; i < 30; ++i) {
    const auto data = random_dataset(s, static_cast<std::size_t>(pick(rng, 8, 40)), rng);
    const Workload w = range_workload(s, 3, rng);
    const auto cuts = range_cuts(s, static_cast<std::size_t>(pick(rng, 1, 4)), rng);
    const auto b = static_cast<std::size_t>(pick(rng, 1, 6));
    std::vector<RowId> all(data.num_rows());
    std::iota(all.begin(), all.end(), 0);
    std::map<std::vector<RowId>, std::uint64_t> memo;
    const auto res = oracle_opt(data, w, cuts, b);
    CHECK(res.c_opt == brute_force_opt(data, w, cuts, b, all, memo));
    CHECK(tree_skipped(res.tree, data, w) == res.c_opt);
  }
}

TEST_CASE("online bound on a 48-row instance") {
  std::mt19937_64 rng(3);
  const Schema s = mixed_schema(24, 3);
  const auto data = random_dataset(s, 48, rng);
  const Workload w = range_workload(s, 3, rng);
  GreedyConfig cfg;
  cfg.min_block_size = 6;
  cfg.cuts = range_cuts(s, 4, rng);
  REQUIRE(check_submodularity_condition(cfg.cuts, w, s));
  const auto t = greedy_build(data, w, cfg);
  const auto opt = oracle_opt(data, w, cfg.cuts, cfg.min_block_size).c_opt;
  const auto rep = check_online_bound(t, data, w, cfg, opt);
  CHECK(rep.holds);
  CHECK(rep.c_t <= opt);
  CHECK(rep.c_t_minus_1 <= rep.c_t);
  CHECK(rep.online_bound >= static_cast<double>(opt));
}

TEST_CASE("online bound edge cases") {
  const Schema s = mixed_schema();
  const Dataset data(s, {1, 1, 1, 2, 2, 2});
  Workload w;
  w.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 40))});
  GreedyConfig cfg;
  cfg.min_block_size = 1;
  const QdTree single(s, {});
  const auto rep = check_online_bound(single, data, w, cfg, 0);
  CHECK(rep.holds);
  CHECK(rep.c_t == 0);
  CHECK(rep.c_t_minus_1 == 0);
  CHECK(rep.online_bound == 0.0);

  Workload low;
  low.queries.push_back({Expr::leaf(UnaryPredicate::compare(s, 0, CompareOp::kLt, 2))});
  const auto split = single.split(0, UnaryPredicate::compare(s, 0, CompareOp::kLt, 2));
  // Only the right block, one row, is skipped.
  const auto c = tree_skipped(split, data, low);
  CHECK(c == 1);
  CHECK(check_online_bound(split, data, low, cfg, c).holds);
  CHECK_THROWS_AS(check_online_bound(split, data, low, cfg, 0), BoundViolation);
}

TEST_CASE("submodularity condition") {
  const Schema s = mixed_schema();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto w = range_workload(s, 4, rng);
    CHECK(check_submodularity_condition(range_cuts(s, 4, rng), w, s));
  }
  const auto w = range_workload(s, 2, rng);
  CHECK(check_submodularity_condition(range_cuts(s, 1, rng), w, s));

  const auto gen = generate({});
  const auto cuts = extract_cuts(gen.workload, gen.data.schema()).all();
  CHECK_THROWS_AS(check_submodularity_condition(cuts, gen.workload, gen.data.schema()),
                  UnsupportedQueryShape);
}

TEST_CASE("greedy trees respect the block size, replay monotonically and are deterministic") {
  std::mt19937_64 rng(5);
  const Schema s = mixed_schema(40, 5);
  for (int i = 0; i < 60; ++i) {
    const auto data = random_dataset(s, static_cast<std::size_t>(pick(rng, 20, 300)), rng);
    Workload w;
    for (int q = 0; q < 4; ++q) w.queries.push_back({random_expr(s, 0, rng)});
    GreedyConfig cfg;
    cfg.min_block_size = static_cast<std::size_t>(pick(rng, 1, 20));
    cfg.cuts = extract_cuts(w, s).all();
    const auto t = greedy_build(data, w, cfg);
    const auto groups = t.route_rows(data).rows_by_block(t.num_blocks());
    if (t.num_blocks() > 1) {
      for (const auto& g : groups) CHECK(g.size() >= cfg.min_block_size);
    }
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k <= t.log().size(); ++k) {
      const auto c = tree_skipped(replay(s, {}, t.log(), k), data, w);
      if (k > 0) CHECK(c > prev);
      prev = c;
    }
    CHECK(greedy_build(data, w, cfg) == t);
    const auto per_query = per_query_skipped(t, data, w);
    CHECK(std::accumulate(per_query.begin(), per_query.end(), std::uint64_t{0}) == prev);
  }
}

TEST_CASE("greedy with advanced cuts") {
  std::mt19937_64 rng(6);
  const Schema s = mixed_schema();
  const auto reg = two_numeric_cuts(s);
  const auto data = random_dataset(s, 200, rng);
  Workload w;
  w.advanced = reg;
  w.queries.push_back({Expr::adv(0)});
  w.queries.push_back({Expr::adv(1)});
  GreedyConfig cfg;
  cfg.min_block_size = 10;
  cfg.cuts = extract_cuts(w, s).all();
  const auto t = greedy_build(data, w, cfg);
  REQUIRE(t.num_blocks() >= 2);
  CHECK(std::holds_alternative<AdvancedCut>(*t.node(0).cut));
  CHECK(tree_skipped(t, data, w) > 0);
}

TEST_CASE("threaded candidate evaluation builds the same tree") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::kUniform;
  spec.rows = 20000;
  spec.columns = 3;
  spec.queries = 10;
  spec.seed = 3;
  const auto gen = generate(spec);
  GreedyConfig cfg;
  cfg.min_block_size = 500;
  cfg.cuts = extract_cuts(gen.workload, gen.data.schema()).all();
  const auto serial = greedy_build(gen.data, gen.workload, cfg);
  cfg.threads = 4;
  CHECK(greedy_build(gen.data, gen.workload, cfg) == serial);
}

TEST_CASE("undoing the last level") {
  const Schema s = mixed_schema();
  QdTree t(s, {});
  t = t.split(0, UnaryPredicate::compare(s, 0, CompareOp::kLt, 25));
  t = t.split(1, UnaryPredicate::compare(s, 1, CompareOp::kLt, 25));
  t = t.split(2, UnaryPredicate::compare(s, 1, CompareOp::kLt, 10));
  t = t.split(3, UnaryPredicate::compare(s, 0, CompareOp::kLt, 10));
  REQUIRE(t.max_depth() == 3);
  const auto up = without_last_level(t);
  CHECK(up.max_depth() == 2);
  CHECK(up.num_blocks() == 4);
  CHECK(without_last_level(QdTree(s, {})).num_blocks() == 1);
}

TEST_CASE("candidate evaluation scales with rows times cuts") {
  // Coarse: 4x the rows should cost well under 16x the time.
  auto run = [](std::size_t rows) {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::kUniform;
    spec.rows = rows;
    spec.columns = 2;
    spec.queries = 16;
    spec.seed = 9;
    const auto gen = generate(spec);
    GreedyConfig cfg;
    cfg.min_block_size = rows / 4;  // at most two levels for both sizes
    cfg.cuts = extract_cuts(gen.workload, gen.data.schema()).all();
    const auto start = std::chrono::steady_clock::now();
    const auto t = greedy_build(gen.data, gen.workload, cfg);
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::pair{secs, t.num_blocks()};
  };
  run(20000);  // warm-up
  const auto [small, small_blocks] = run(20000);
  const auto [large, large_blocks] = run(80000);
  MESSAGE("20k rows: " << small << " s, 80k rows: " << large << " s");
  CHECK(small_blocks <= 4);
  CHECK(large_blocks <= 4);
  CHECK(large < 16.0 * small + 0.05);
}
