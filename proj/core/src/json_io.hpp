#pragma once

// Internal JSON helpers shared by the problem- and result-file code.

#include <json.hpp>

#include "loopcert/poly/polynomial.hpp"

namespace loopcert::detail {

using nlohmann::json;

/// "x[3]" -> VarRef into `space` (1-based index in the file).
VarRef parse_var_name(const std::string& name, const VariableSpace& space,
                      const std::string& where);

Polynomial parse_term_list(const json& arr, const SpacePtr& space,
                           const std::string& where);

PolyVec parse_poly_rows(const json& arr, const SpacePtr& space, const std::string& where);

json term_list(const Polynomial& p);
json poly_rows(const PolyVec& rows);

json space_json(const VariableSpace& space);
SpacePtr space_from_json(const json& j, const std::string& where);

}  // namespace loopcert::detail
