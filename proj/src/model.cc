#include "qdtree/model.h"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "qdtree/error.h"

namespace qdtree {

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw InvalidArgument("column name must not be empty");
    if (!seen.insert(c.name).second) {
      throw InvalidArgument("duplicate column name '" + c.name + "'");
    }
    if (c.domain_size < 1) {
      throw InvalidArgument("column '" + c.name + "' has domain_size < 1");
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw InvalidArgument("unknown column '" + std::string(name) + "'");
}

Dataset::Dataset(Schema schema, std::vector<Value> cells)
    : schema_(std::move(schema)), cells_(std::move(cells)) {
  const std::size_t n = schema_.size();
  if (n == 0) {
    if (!cells_.empty()) throw InvalidArgument("cells given for empty schema");
    return;
  }
  if (cells_.size() % n != 0) {
    throw InvalidArgument("cell count is not a multiple of the column count");
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const std::size_t col = i % n;
    if (cells_[i] < 0 || cells_[i] >= schema_.domain(col)) {
      std::ostringstream msg;
      msg << "row " << i / n << " column '" << schema_.column(col).name
          << "': value " << cells_[i] << " outside [0, "
          << schema_.domain(col) << ")";
      throw InvalidArgument(msg.str());
    }
  }
}

Dataset Dataset::subset(std::span<const RowId> rows) const {
  std::vector<Value> cells;
  cells.reserve(rows.size() * schema_.size());
  for (RowId r : rows) {
    auto v = row(r);
    cells.insert(cells.end(), v.begin(), v.end());
  }
  Dataset out;
  out.schema_ = schema_;
  out.cells_ = std::move(cells);
  return out;
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
    case CompareOp::kEq: return "=";
    case CompareOp::kIn: return "in";
  }
  return "?";
}

CompareOp parse_compare_op(std::string_view text) {
  if (text == "<") return CompareOp::kLt;
  if (text == "<=") return CompareOp::kLe;
  if (text == ">") return CompareOp::kGt;
  if (text == ">=") return CompareOp::kGe;
  if (text == "=" || text == "==") return CompareOp::kEq;
  if (text == "in" || text == "IN") return CompareOp::kIn;
  throw ParseError("unknown comparison operator '" + std::string(text) + "'");
}

namespace {

void check_literal(const Schema& schema, std::size_t column, Value v) {
  if (v < 0 || v >= schema.domain(column)) {
    std::ostringstream msg;
    msg << "literal " << v << " outside domain of column '"
        << schema.column(column).name << "'";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

UnaryPredicate UnaryPredicate::compare(const Schema& schema,
                                       std::size_t column, CompareOp op,
                                       Value literal) {
  if (column >= schema.size()) throw InvalidArgument("column out of range");
  if (op == CompareOp::kIn) return in(schema, column, {literal});
  check_literal(schema, column, literal);
  UnaryPredicate p;
  p.column_ = column;
  p.op_ = op;
  p.literal_ = literal;
  if (op == CompareOp::kEq) {
    if (schema.is_numeric(column)) {
      throw InvalidArgument("= applies to categorical columns only ('" +
                            schema.column(column).name + "')");
    }
    p.values_ = {literal};
  } else if (!schema.is_numeric(column)) {
    throw InvalidArgument("range comparison on categorical column '" +
                          schema.column(column).name + "'");
  }
  return p;
}

UnaryPredicate UnaryPredicate::in(const Schema& schema, std::size_t column,
                                  std::vector<Value> values) {
  if (column >= schema.size()) throw InvalidArgument("column out of range");
  if (schema.is_numeric(column)) {
    throw InvalidArgument("IN applies to categorical columns only ('" +
                          schema.column(column).name + "')");
  }
  if (values.empty()) throw InvalidArgument("IN needs at least one value");
  for (Value v : values) check_literal(schema, column, v);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  UnaryPredicate p;
  p.column_ = column;
  p.op_ = values.size() == 1 ? CompareOp::kEq : CompareOp::kIn;
  p.literal_ = values.front();
  p.values_ = std::move(values);
  return p;
}

Interval UnaryPredicate::interval(Value domain) const {
  switch (op_) {
    case CompareOp::kLt: return {0, std::min(literal_, domain)};
    case CompareOp::kLe: return {0, std::min(literal_ + 1, domain)};
    case CompareOp::kGt: return {std::min(literal_ + 1, domain), domain};
    case CompareOp::kGe: return {literal_, domain};
    case CompareOp::kEq:
    case CompareOp::kIn: break;
  }
  return {0, domain};
}

bool UnaryPredicate::matches(Value v) const {
  switch (op_) {
    case CompareOp::kLt: return v < literal_;
    case CompareOp::kLe: return v <= literal_;
    case CompareOp::kGt: return v > literal_;
    case CompareOp::kGe: return v >= literal_;
    case CompareOp::kEq: return v == literal_;
    case CompareOp::kIn:
      return std::binary_search(values_.begin(), values_.end(), v);
  }
  return false;
}

bool UnaryPredicate::equivalent(const UnaryPredicate& o,
                                const Schema& schema) const {
  if (column_ != o.column_) return false;
  if (is_range() != o.is_range()) return false;
  if (!is_range()) return values_ == o.values_;
  const Value d = schema.domain(column_);
  return interval(d) == o.interval(d);
}

bool AdvancedCut::matches(std::span<const Value> row) const {
  const Value a = row[left];
  const Value b = row[right];
  switch (op) {
    case CompareOp::kLt: return a < b;
    case CompareOp::kLe: return a <= b;
    case CompareOp::kGt: return a > b;
    case CompareOp::kGe: return a >= b;
    case CompareOp::kEq: return a == b;
    case CompareOp::kIn: break;
  }
  return false;
}

namespace {

// Orients a binary comparison so the operator is one of <, <=, =.
std::tuple<std::size_t, CompareOp, std::size_t> canonical(
    const AdvancedCut& c) {
  switch (c.op) {
    case CompareOp::kGt: return {c.right, CompareOp::kLt, c.left};
    case CompareOp::kGe: return {c.right, CompareOp::kLe, c.left};
    case CompareOp::kEq:
      return {std::min(c.left, c.right), CompareOp::kEq,
              std::max(c.left, c.right)};
    default: return {c.left, c.op, c.right};
  }
}

}  // namespace

bool AdvancedCut::same_predicate(const AdvancedCut& o) const {
  return canonical(*this) == canonical(o);
}

std::optional<AdvancedCut> AdvancedCut::negation() const {
  AdvancedCut n = *this;
  switch (op) {
    case CompareOp::kLt: n.op = CompareOp::kGe; break;
    case CompareOp::kLe: n.op = CompareOp::kGt; break;
    case CompareOp::kGt: n.op = CompareOp::kLe; break;
    case CompareOp::kGe: n.op = CompareOp::kLt; break;
    default: return std::nullopt;
  }
  return n;
}

AdvancedCut make_advanced_cut(const Schema& schema, std::size_t index,
                              std::size_t left, CompareOp op,
                              std::size_t right) {
  if (left >= schema.size() || right >= schema.size()) {
    throw InvalidArgument("advanced cut column out of range");
  }
  if (left == right) {
    throw InvalidArgument("advanced cut compares a column with itself");
  }
  if (op == CompareOp::kIn) {
    throw InvalidArgument("advanced cuts do not support IN");
  }
  if (schema.is_numeric(left) != schema.is_numeric(right)) {
    throw InvalidArgument("advanced cut mixes numeric and categorical columns");
  }
  return AdvancedCut{index, left, right, op};
}

bool cut_matches(const Cut& cut, std::span<const Value> row) {
  return std::visit([&](const auto& c) { return c.matches(row); }, cut);
}

std::string describe(const UnaryPredicate& p, const Schema& schema) {
  std::ostringstream out;
  out << schema.column(p.column()).name << ' ' << to_string(p.op()) << ' ';
  if (p.op() == CompareOp::kIn) {
    out << '(';
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      if (i) out << ',';
      out << p.values()[i];
    }
    out << ')';
  } else {
    out << p.literal();
  }
  return out.str();
}

std::string describe(const Cut& cut, const Schema& schema) {
  if (const auto* p = std::get_if<UnaryPredicate>(&cut)) {
    return describe(*p, schema);
  }
  const auto& a = std::get<AdvancedCut>(cut);
  std::ostringstream out;
  out << "AC" << a.index << ':' << schema.column(a.left).name << ' '
      << to_string(a.op) << ' ' << schema.column(a.right).name;
  return out.str();
}

Expr Expr::all(std::vector<Expr> children) {
  return Expr{BoolNode{BoolOp::kAnd, std::move(children)}};
}

Expr Expr::any(std::vector<Expr> children) {
  return Expr{BoolNode{BoolOp::kOr, std::move(children)}};
}

bool operator==(const BoolNode& a, const BoolNode& b) {
  return a.op == b.op && a.children == b.children;
}

bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }

void validate(const Expr& e, const Schema& schema, std::size_t registry_size) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    if (b->children.size() < 2) {
      throw InvalidArgument("AND/OR needs at least two children");
    }
    for (const auto& c : b->children) validate(c, schema, registry_size);
  } else if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    if (p->column() >= schema.size()) {
      throw InvalidArgument("predicate column out of range");
    }
  } else {
    const auto& a = std::get<AdvancedRef>(e.node);
    if (a.index >= registry_size) {
      throw InvalidArgument("advanced cut reference " +
                            std::to_string(a.index) + " not registered");
    }
  }
}

void validate(const Workload& w, const Schema& schema) {
  if (w.queries.empty()) throw InvalidArgument("workload is empty");
  for (std::size_t i = 0; i < w.advanced.size(); ++i) {
    const auto& a = w.advanced[i];
    if (a.index != i) throw InvalidArgument("advanced cut index mismatch");
    make_advanced_cut(schema, a.index, a.left, a.op, a.right);
  }
  for (const auto& q : w.queries) validate(q.expr, schema, w.advanced.size());
}

bool evaluate_predicate(const UnaryPredicate& p, std::span<const Value> row) {
  return p.matches(row);
}

bool evaluate_expr(const Expr& e, std::span<const Value> row,
                   const AdvancedRegistry& registry) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    if (b->op == BoolOp::kAnd) {
      return std::all_of(b->children.begin(), b->children.end(),
                         [&](const Expr& c) {
                           return evaluate_expr(c, row, registry);
                         });
    }
    return std::any_of(b->children.begin(), b->children.end(),
                       [&](const Expr& c) {
                         return evaluate_expr(c, row, registry);
                       });
  }
  if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    return p->matches(row);
  }
  const auto& a = std::get<AdvancedRef>(e.node);
  return registry.at(a.index).matches(row) != a.negated;
}

bool evaluate_query(const Query& q, std::span<const Value> row,
                    const AdvancedRegistry& registry) {
  return evaluate_expr(q.expr, row, registry);
}

std::vector<Cut> ExtractedCuts::all() const {
  std::vector<Cut> out;
  out.reserve(unary.size() + advanced.size());
  for (const auto& p : unary) out.emplace_back(p);
  for (const auto& a : advanced) out.emplace_back(a);
  return out;
}

namespace {

void collect(const Expr& e, const Schema& schema, const Workload& w,
             ExtractedCuts& out, std::set<std::size_t>& seen_adv) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    for (const auto& c : b->children) collect(c, schema, w, out, seen_adv);
  } else if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    const bool dup = std::any_of(
        out.unary.begin(), out.unary.end(),
        [&](const UnaryPredicate& q) { return q.equivalent(*p, schema); });
    if (!dup) out.unary.push_back(*p);
  } else {
    const auto& a = std::get<AdvancedRef>(e.node);
    if (seen_adv.insert(a.index).second) {
      out.advanced.push_back(w.advanced.at(a.index));
    }
  }
}

}  // namespace

ExtractedCuts extract_cuts(const Workload& w, const Schema& schema) {
  validate(w, schema);
  ExtractedCuts out;
  std::set<std::size_t> seen_adv;
  for (const auto& q : w.queries) collect(q.expr, schema, w, out, seen_adv);
  return out;
}

}  // namespace qdtree
