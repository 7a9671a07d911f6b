#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdtree/extensions.h"
#include "qdtree/model.h"
#include "qdtree/skipcost.h"
#include "qdtree/tree.h"

namespace qdtree {

enum class GeneratorKind { kDisjunctiveMicrobench, kPropeller, kUniform, kClustered };

GeneratorKind parse_generator_kind(std::string_view name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kDisjunctiveMicrobench;
  std::size_t rows = 100000;   // ignored by propeller (4N+1 rows)
  std::uint64_t seed = 0;
  std::size_t arm_rows = 1000;  // propeller N
  std::size_t columns = 2;      // uniform / clustered
  Value domain = 1000;          // uniform / clustered
  std::size_t clusters = 4;     // clustered
  Value spread = 20;            // clustered: half-width of each cluster box
  std::size_t queries = 8;      // uniform / clustered
};

struct Generated {
  Dataset data;
  Workload workload;
};

// disjunctive_microbench: cpu and disk on 10000-point domains (cpu v means
// v/100 percent, disk v means v/10000). Q1 = cpu<10 OR cpu>90, Q2 = disk<0.01.
// propeller: four arms of N rows strictly inside the quadrants around one
// centre row; query i selects arm i plus the centre.
// uniform / clustered: random rows and random conjunctive range queries.
Generated generate(const GeneratorSpec& spec);

// Random conjunctive range queries: each picks one or two columns and a
// random interval on each.
Workload random_range_workload(const Schema& schema, std::size_t count,
                               std::uint64_t seed);

// Per-column thresholds used by the propeller generator.
struct PropellerGeometry {
  Value centre = 1000;
  Value arm_extent = 500;
  Value domain = 2001;
};
PropellerGeometry propeller_geometry();

// ---------------------------------------------------------------- baselines

enum class BaselineKind { kRandom, kRange };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kRandom;
  std::size_t block_size = 1;
  std::size_t range_column = 0;
  std::uint64_t seed = 0;
};

struct BaselineLayout {
  BlockAssignment assignment;
  std::vector<SemanticDescription> descs;
  std::vector<std::uint64_t> sizes;
};

BaselineLayout baseline_partition(const BaselineSpec& spec, const Dataset& data,
                                  const AdvancedRegistry& registry);

SkipReport evaluate_baseline(const BaselineLayout& layout, const Dataset& data,
                             const Workload& w);

// ------------------------------------------------------------------- oracle

struct OracleResult {
  std::uint64_t c_opt = 0;
  QdTree tree;
};

// Best C over every qd-tree built from `cuts` whose splits leave >= b rows
// per child and that has at most max_leaves leaves (0 = no limit).
// Throws TooLarge beyond 200 rows or 6 cuts.
OracleResult oracle_opt(const Dataset& data, const Workload& w,
                        const std::vector<Cut>& cuts, std::size_t min_block_size,
                        std::size_t max_leaves = 0);

// ------------------------------------------------------------------ reports

// "access_fraction=<x>", plus " extra_storage_rows=<n>" when non-zero.
std::string summary_line(const SkipReport& rep);

// The dataset CSV with a BID column; one line per (row, block) pair.
std::string bid_csv(const Dataset& data,
                    const std::vector<std::vector<RowId>>& rows_by_block);

struct ComparisonRow {
  std::string partitioner;
  std::size_t blocks = 0;
  double access_fraction = 1.0;
  std::uint64_t extra_storage_rows = 0;
};

// Greedy, RL (when rl is set), and the random and per-column range
// baselines at block size b.
std::vector<ComparisonRow> compare_partitioners(const Dataset& data,
                                                const Workload& w,
                                                const BuildConfig& cfg,
                                                bool include_rl);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace qdtree
