#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace qdtree {

// Attribute values are dictionary-encoded integers in [0, domain_size).
using Value = std::int32_t;
using RowId = std::uint32_t;

enum class ColumnKind { kNumeric, kCategorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  Value domain_size = 1;

  bool operator==(const Column&) const = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  bool is_numeric(std::size_t i) const {
    return columns_.at(i).kind == ColumnKind::kNumeric;
  }
  Value domain(std::size_t i) const { return columns_.at(i).domain_size; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws InvalidArgument for unknown names.
  std::size_t index_of(std::string_view name) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Column> columns_;
};

// Row-major table of validated integer cells.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, std::vector<Value> cells);

  const Schema& schema() const { return schema_; }
  std::size_t num_rows() const {
    return schema_.size() == 0 ? 0 : cells_.size() / schema_.size();
  }
  std::size_t num_columns() const { return schema_.size(); }
  std::span<const Value> row(RowId r) const {
    return {cells_.data() + static_cast<std::size_t>(r) * schema_.size(),
            schema_.size()};
  }
  Value at(RowId r, std::size_t col) const {
    return cells_[static_cast<std::size_t>(r) * schema_.size() + col];
  }
  const std::vector<Value>& cells() const { return cells_; }

  // Copies the listed rows, in order, into a new dataset.
  Dataset subset(std::span<const RowId> rows) const;

  bool operator==(const Dataset&) const = default;

 private:
  Schema schema_;
  std::vector<Value> cells_;
};

// Half-open integer interval [lo, hi).
struct Interval {
  Value lo = 0;
  Value hi = 0;

  bool empty() const { return lo >= hi; }
  bool contains(Value v) const { return lo <= v && v < hi; }
  bool overlaps(const Interval& o) const {
    return std::max(lo, o.lo) < std::min(hi, o.hi);
  }
  Interval intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
  // Empty intervals are contained in anything.
  bool within(const Interval& o) const {
    return empty() || (o.lo <= lo && hi <= o.hi);
  }
  Value width() const { return empty() ? 0 : hi - lo; }

  bool operator==(const Interval&) const = default;
};

enum class CompareOp { kLt, kLe, kGt, kGe, kEq, kIn };

std::string_view to_string(CompareOp op);
CompareOp parse_compare_op(std::string_view text);

// (column, op, literal). Comparisons apply to numeric columns, = and IN to
// categorical ones. A single-value IN is stored as =.
class UnaryPredicate {
 public:
  UnaryPredicate() = default;

  static UnaryPredicate compare(const Schema& schema, std::size_t column,
                                CompareOp op, Value literal);
  static UnaryPredicate in(const Schema& schema, std::size_t column,
                           std::vector<Value> values);

  std::size_t column() const { return column_; }
  CompareOp op() const { return op_; }
  // Literal for comparison ops; the single value for =.
  Value literal() const { return literal_; }
  // Sorted, deduplicated value set for = and IN.
  const std::vector<Value>& values() const { return values_; }
  bool is_range() const {
    return op_ != CompareOp::kEq && op_ != CompareOp::kIn;
  }

  // Satisfying interval of a range predicate, clipped to [0, domain).
  Interval interval(Value domain) const;
  bool matches(Value v) const;
  bool matches(std::span<const Value> row) const {
    return matches(row[column_]);
  }

  // Range predicates compare by satisfying interval, so a <= 9 equals a < 10.
  bool equivalent(const UnaryPredicate& o, const Schema& schema) const;
  bool operator==(const UnaryPredicate&) const = default;

 private:
  std::size_t column_ = 0;
  CompareOp op_ = CompareOp::kLt;
  Value literal_ = 0;
  std::vector<Value> values_;
};

// Binary attribute-vs-attribute cut (left op right), registered by index.
struct AdvancedCut {
  std::size_t index = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  CompareOp op = CompareOp::kLt;  // never kIn

  bool matches(std::span<const Value> row) const;
  // Same predicate up to operand order (a < b is b > a). Ignores index.
  bool same_predicate(const AdvancedCut& o) const;
  // The negation, when expressible without !=.
  std::optional<AdvancedCut> negation() const;
  bool operator==(const AdvancedCut&) const = default;
};

AdvancedCut make_advanced_cut(const Schema& schema, std::size_t index,
                              std::size_t left, CompareOp op,
                              std::size_t right);

using AdvancedRegistry = std::vector<AdvancedCut>;

// A node split: a unary predicate or an advanced cut from the registry.
using Cut = std::variant<UnaryPredicate, AdvancedCut>;

bool cut_matches(const Cut& cut, std::span<const Value> row);
std::string describe(const Cut& cut, const Schema& schema);
std::string describe(const UnaryPredicate& p, const Schema& schema);

struct AdvancedRef {
  std::size_t index = 0;
  bool negated = false;
  bool operator==(const AdvancedRef&) const = default;
};

enum class BoolOp { kAnd, kOr };

struct Expr;

struct BoolNode {
  BoolOp op = BoolOp::kAnd;
  std::vector<Expr> children;
};

struct Expr {
  std::variant<BoolNode, UnaryPredicate, AdvancedRef> node;

  static Expr all(std::vector<Expr> children);
  static Expr any(std::vector<Expr> children);
  static Expr leaf(UnaryPredicate p) { return Expr{std::move(p)}; }
  static Expr adv(std::size_t index, bool negated = false) {
    return Expr{AdvancedRef{index, negated}};
  }
};

bool operator==(const BoolNode& a, const BoolNode& b);
bool operator==(const Expr& a, const Expr& b);

struct Query {
  Expr expr;
  bool operator==(const Query&) const = default;
};

struct Workload {
  std::vector<Query> queries;
  AdvancedRegistry advanced;

  std::size_t size() const { return queries.size(); }
  bool operator==(const Workload&) const = default;
};

// Throws InvalidArgument when the expression references unknown columns or
// registry entries, or an AND/OR has fewer than two children.
void validate(const Expr& e, const Schema& schema, std::size_t registry_size);
void validate(const Workload& w, const Schema& schema);

bool evaluate_predicate(const UnaryPredicate& p, std::span<const Value> row);
bool evaluate_query(const Query& q, std::span<const Value> row,
                    const AdvancedRegistry& registry);
bool evaluate_expr(const Expr& e, std::span<const Value> row,
                   const AdvancedRegistry& registry);

struct ExtractedCuts {
  std::vector<UnaryPredicate> unary;
  std::vector<AdvancedCut> advanced;

  // Unary cuts first, then advanced cuts, in extraction order.
  std::vector<Cut> all() const;
};

// Deduplicated predicate leaves in first-appearance order. Negated advanced
// references contribute the un-negated registry entry.
ExtractedCuts extract_cuts(const Workload& w, const Schema& schema);

}  // namespace qdtree
