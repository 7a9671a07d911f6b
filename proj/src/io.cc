#include "qdtree/io.h"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "qdtree/error.h"

namespace qdtree {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON at byte " +
                     std::to_string(e.byte) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ParseError(where + ": " + msg);
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

Value as_value(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<Value>::min() ||
      v > std::numeric_limits<Value>::max()) {
    fail(where, "integer out of range");
  }
  return static_cast<Value>(v);
}

std::size_t column_ref(const json& j, const Schema& schema,
                       const std::string& where) {
  if (j.is_string()) {
    auto idx = schema.find(j.get<std::string>());
    if (!idx) fail(where, "unknown column '" + j.get<std::string>() + "'");
    return *idx;
  }
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0 || static_cast<std::size_t>(v) >= schema.size()) {
      fail(where, "column index out of range");
    }
    return static_cast<std::size_t>(v);
  }
  fail(where, "expected a column name or index");
}

template <typename F>
auto rethrow_as_parse(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    fail(where, e.what());
  }
}

}  // namespace

json schema_to_json(const Schema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns()) {
    cols.push_back({{"name", c.name},
                    {"kind", c.kind == ColumnKind::kNumeric ? "numeric"
                                                            : "categorical"},
                    {"domain_size", c.domain_size}});
  }
  return {{"columns", cols}};
}

Schema schema_from_json(const json& j) {
  const std::string where = "schema";
  const auto& cols = field(j, "columns", where);
  if (!cols.is_array()) fail(where, "'columns' must be an array");
  std::vector<Column> out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::string w = where + ".columns[" + std::to_string(i) + "]";
    Column c;
    const auto& name = field(cols[i], "name", w);
    if (!name.is_string()) fail(w, "'name' must be a string");
    c.name = name.get<std::string>();
    const auto& kind = field(cols[i], "kind", w);
    if (kind == "numeric") {
      c.kind = ColumnKind::kNumeric;
    } else if (kind == "categorical") {
      c.kind = ColumnKind::kCategorical;
    } else {
      fail(w, "'kind' must be \"numeric\" or \"categorical\"");
    }
    c.domain_size = as_value(field(cols[i], "domain_size", w), w);
    out.push_back(std::move(c));
  }
  return rethrow_as_parse(where, [&] { return Schema(std::move(out)); });
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  const auto& schema = data.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out += ',';
    out += schema.column(c).name;
  }
  out += '\n';
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    const auto row = data.row(static_cast<RowId>(r));
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += std::to_string(row[c]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
      f.remove_suffix(1);
    }
  }
  return out;
}

}  // namespace

Dataset dataset_from_csv(std::string_view text, const Schema& schema) {
  std::vector<std::size_t> order;  // csv field -> column
  std::vector<Value> cells;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_line(line);
    const std::string where = "csv line " + std::to_string(line_no);
    if (header) {
      header = false;
      if (fields.size() != schema.size()) {
        fail(where, "header has " + std::to_string(fields.size()) +
                        " columns, schema has " + std::to_string(schema.size()));
      }
      std::vector<bool> seen(schema.size(), false);
      for (auto f : fields) {
        auto idx = schema.find(f);
        if (!idx) fail(where, "unknown column '" + std::string(f) + "'");
        if (seen[*idx]) fail(where, "duplicate column '" + std::string(f) + "'");
        seen[*idx] = true;
        order.push_back(*idx);
      }
      continue;
    }
    if (fields.size() != schema.size()) {
      fail(where, "expected " + std::to_string(schema.size()) + " fields");
    }
    const std::size_t base = cells.size();
    cells.resize(base + schema.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      Value v = 0;
      const auto f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        fail(where, "field " + std::to_string(i + 1) + " '" + std::string(f) +
                        "' is not an integer");
      }
      cells[base + order[i]] = v;
    }
  }
  if (header) fail("csv", "missing header row");
  return rethrow_as_parse("csv", [&] { return Dataset(schema, std::move(cells)); });
}

json predicate_to_json(const UnaryPredicate& p, const Schema& schema) {
  json j{{"col", schema.column(p.column()).name},
         {"op", std::string(to_string(p.op()))}};
  if (p.op() == CompareOp::kIn) {
    j["lit"] = p.values();
  } else {
    j["lit"] = p.literal();
  }
  return j;
}

UnaryPredicate predicate_from_json(const json& j, const Schema& schema,
                                   const std::string& where) {
  const std::size_t col = column_ref(field(j, "col", where), schema, where);
  const auto& op_j = field(j, "op", where);
  if (!op_j.is_string()) fail(where, "'op' must be a string");
  CompareOp op;
  try {
    op = parse_compare_op(op_j.get<std::string>());
  } catch (const ParseError& e) {
    fail(where, e.what());
  }
  const auto& lit = field(j, "lit", where);
  return rethrow_as_parse(where, [&] {
    if (op == CompareOp::kIn || lit.is_array()) {
      if (!lit.is_array()) fail(where, "IN literal must be an array");
      if (op != CompareOp::kIn && op != CompareOp::kEq) {
        fail(where, "list literal needs op \"in\"");
      }
      std::vector<Value> values;
      for (const auto& v : lit) values.push_back(as_value(v, where));
      return UnaryPredicate::in(schema, col, std::move(values));
    }
    return UnaryPredicate::compare(schema, col, op, as_value(lit, where));
  });
}

json advanced_cut_to_json(const AdvancedCut& a, const Schema& schema) {
  return {{"left", schema.column(a.left).name},
          {"op", std::string(to_string(a.op))},
          {"right", schema.column(a.right).name}};
}

AdvancedCut advanced_cut_from_json(const json& j, const Schema& schema,
                                   std::size_t index,
                                   const std::string& where) {
  const auto left = column_ref(field(j, "left", where), schema, where);
  const auto right = column_ref(field(j, "right", where), schema, where);
  const auto& op_j = field(j, "op", where);
  if (!op_j.is_string()) fail(where, "'op' must be a string");
  return rethrow_as_parse(where, [&] {
    return make_advanced_cut(schema, index, left,
                             parse_compare_op(op_j.get<std::string>()), right);
  });
}

json cut_to_json(const Cut& cut, const Schema& schema) {
  if (const auto* p = std::get_if<UnaryPredicate>(&cut)) {
    return predicate_to_json(*p, schema);
  }
  return {{"adv", std::get<AdvancedCut>(cut).index}};
}

Cut cut_from_json(const json& j, const Schema& schema,
                  const AdvancedRegistry& registry, const std::string& where) {
  if (j.is_object() && j.contains("adv")) {
    const auto& k = j["adv"];
    if (!k.is_number_integer() || k.get<std::int64_t>() < 0 ||
        static_cast<std::size_t>(k.get<std::int64_t>()) >= registry.size()) {
      fail(where, "advanced cut index not registered");
    }
    return registry[k.get<std::size_t>()];
  }
  return predicate_from_json(j, schema, where);
}

json expr_to_json(const Expr& e, const Schema& schema) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    json children = json::array();
    for (const auto& c : b->children) children.push_back(expr_to_json(c, schema));
    return {{"op", b->op == BoolOp::kAnd ? "and" : "or"},
            {"children", std::move(children)}};
  }
  if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    return {{"pred", predicate_to_json(*p, schema)}};
  }
  const auto& a = std::get<AdvancedRef>(e.node);
  return {{"adv", a.index}, {"neg", a.negated}};
}

Expr expr_from_json(const json& j, const Schema& schema,
                    std::size_t registry_size, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an expression object");
  if (j.contains("pred")) {
    return Expr::leaf(predicate_from_json(j["pred"], schema, where + ".pred"));
  }
  if (j.contains("adv")) {
    const auto& k = j["adv"];
    if (!k.is_number_integer() || k.get<std::int64_t>() < 0 ||
        static_cast<std::size_t>(k.get<std::int64_t>()) >= registry_size) {
      fail(where, "advanced cut reference not registered");
    }
    bool neg = false;
    if (j.contains("neg")) {
      if (!j["neg"].is_boolean()) fail(where, "'neg' must be a boolean");
      neg = j["neg"].get<bool>();
    }
    return Expr::adv(k.get<std::size_t>(), neg);
  }
  if (j.contains("not")) {
    fail(where, "general negation is not supported; only advanced-cut "
                "references may be negated");
  }
  const auto& op = field(j, "op", where);
  const auto& children = field(j, "children", where);
  if (!children.is_array()) fail(where, "'children' must be an array");
  if (children.size() < 2) fail(where, "AND/OR needs at least two children");
  BoolNode node;
  if (op == "and" || op == "AND") {
    node.op = BoolOp::kAnd;
  } else if (op == "or" || op == "OR") {
    node.op = BoolOp::kOr;
  } else {
    fail(where, "'op' must be \"and\" or \"or\"");
  }
  for (std::size_t i = 0; i < children.size(); ++i) {
    node.children.push_back(expr_from_json(
        children[i], schema, registry_size,
        where + ".children[" + std::to_string(i) + "]"));
  }
  return Expr{std::move(node)};
}

json workload_to_json(const Workload& w, const Schema& schema) {
  json queries = json::array();
  for (const auto& q : w.queries) queries.push_back(expr_to_json(q.expr, schema));
  if (w.advanced.empty()) return queries;
  json adv = json::array();
  for (const auto& a : w.advanced) adv.push_back(advanced_cut_to_json(a, schema));
  return {{"advanced_cuts", std::move(adv)}, {"queries", std::move(queries)}};
}

Workload workload_from_json(const json& j, const Schema& schema) {
  Workload w;
  const json* queries = &j;
  if (j.is_object()) {
    queries = &field(j, "queries", "workload");
    if (j.contains("advanced_cuts")) {
      const auto& adv = j["advanced_cuts"];
      if (!adv.is_array()) fail("workload", "'advanced_cuts' must be an array");
      for (std::size_t i = 0; i < adv.size(); ++i) {
        w.advanced.push_back(advanced_cut_from_json(
            adv[i], schema, i,
            "workload.advanced_cuts[" + std::to_string(i) + "]"));
      }
    }
  }
  if (!queries->is_array()) fail("workload", "expected an array of queries");
  if (queries->empty()) fail("workload", "workload is empty");
  for (std::size_t i = 0; i < queries->size(); ++i) {
    w.queries.push_back(Query{expr_from_json(
        (*queries)[i], schema, w.advanced.size(),
        "workload[" + std::to_string(i) + "]")});
  }
  return w;
}

json description_to_json(const SemanticDescription& d, const Schema& schema) {
  json ranges = json::array();
  for (const auto& r : d.ranges) ranges.push_back({r.lo, r.hi});
  json masks = json::object();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (d.masks[c].size() > 0) masks[schema.column(c).name] = d.masks[c].to_hex();
  }
  return {{"range", std::move(ranges)},
          {"masks", std::move(masks)},
          {"adv", d.adv.to_hex()}};
}

SemanticDescription description_from_json(const json& j, const Schema& schema,
                                          std::size_t num_advanced,
                                          const std::string& where) {
  SemanticDescription d = SemanticDescription::full(schema, num_advanced);
  const auto& ranges = field(j, "range", where);
  if (!ranges.is_array() || ranges.size() != schema.size()) {
    fail(where, "'range' must list one interval per column");
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& r = ranges[c];
    if (!r.is_array() || r.size() != 2) fail(where, "interval must be [lo, hi]");
    d.ranges[c] = {as_value(r[0], where), as_value(r[1], where)};
  }
  const auto& masks = field(j, "masks", where);
  if (!masks.is_object()) fail(where, "'masks' must be an object");
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.is_numeric(c)) continue;
    const auto& name = schema.column(c).name;
    if (!masks.contains(name) || !masks[name].is_string()) {
      fail(where, "missing mask for categorical column '" + name + "'");
    }
    try {
      d.masks[c] = BitVector::from_hex(masks[name].get<std::string>(),
                                       static_cast<std::size_t>(schema.domain(c)));
    } catch (const ParseError& e) {
      fail(where + ".masks." + name, e.what());
    }
  }
  const auto& adv = field(j, "adv", where);
  if (!adv.is_string()) fail(where, "'adv' must be a hex string");
  try {
    d.adv = BitVector::from_hex(adv.get<std::string>(), num_advanced);
  } catch (const ParseError& e) {
    fail(where + ".adv", e.what());
  }
  return d;
}

}  // namespace qdtree
