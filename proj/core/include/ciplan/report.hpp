#pragma once

#include "ciplan/belief.hpp"
#include "ciplan/compression.hpp"
#include "ciplan/exact_dp.hpp"

#include <string>

#include <nlohmann/json.hpp>

namespace ciplan {

/// {"objective", "times": [{"t", "entries": [{"key", "value", "argmax", "q"?}]}]}
nlohmann::json value_table_json(const ValueTable& table);
/// Flat table with columns t, key, value, argmax.
std::string value_table_text(const ValueTable& table);

std::string params_text(const MeasuredParams& params);
std::string conditions_text(const ConditionReport& report);

} // namespace ciplan
