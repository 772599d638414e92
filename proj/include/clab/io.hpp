#pragma once

#include <span>
#include <string>

#include <json.hpp>

namespace clab {

using Json = nlohmann::ordered_json;

/// %.17g; non-finite values become "nan", "inf" or "-inf".
std::string format_double(double v);

/// Serializes with keys in insertion order, floats at 17 significant digits
/// (non-finite floats as null), two-space indentation and a trailing newline.
std::string to_json_text(const Json& j);

Json json_array(std::span<const double> v);

}  // namespace clab
