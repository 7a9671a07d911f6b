#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

#include "qdtree/description.h"
#include "qdtree/model.h"

namespace qdtree {

using json = nlohmann::json;

// Parses text as JSON; syntax errors become ParseError with the byte offset.
json parse_json(std::string_view text, std::string_view what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// {"columns":[{"name":..,"kind":"numeric"|"categorical","domain_size":..}]}
json schema_to_json(const Schema& schema);
Schema schema_from_json(const json& j);

// CSV with a header row of column names (any order) and integer cells.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text, const Schema& schema);

// Predicate leaves: {"col":name,"op":"<","lit":10}; IN takes a list literal.
json predicate_to_json(const UnaryPredicate& p, const Schema& schema);
UnaryPredicate predicate_from_json(const json& j, const Schema& schema,
                                   const std::string& where);

json advanced_cut_to_json(const AdvancedCut& a, const Schema& schema);
AdvancedCut advanced_cut_from_json(const json& j, const Schema& schema,
                                   std::size_t index, const std::string& where);

// Tree cuts: a predicate object, or {"adv":k} for registry entry k.
json cut_to_json(const Cut& cut, const Schema& schema);
Cut cut_from_json(const json& j, const Schema& schema,
                  const AdvancedRegistry& registry, const std::string& where);

json expr_to_json(const Expr& e, const Schema& schema);
Expr expr_from_json(const json& j, const Schema& schema,
                    std::size_t registry_size, const std::string& where);

// A bare array of expression trees, or, when advanced cuts are registered,
// {"advanced_cuts":[{"left":..,"op":..,"right":..}],"queries":[..]}.
json workload_to_json(const Workload& w, const Schema& schema);
Workload workload_from_json(const json& j, const Schema& schema);

json description_to_json(const SemanticDescription& d, const Schema& schema);
SemanticDescription description_from_json(const json& j, const Schema& schema,
                                          std::size_t num_advanced,
                                          const std::string& where);

}  // namespace qdtree
