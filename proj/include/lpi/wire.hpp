#pragma once

#include <json.hpp>

#include <string>

namespace lpi::wire {

using json = nlohmann::json;

// Compact serialization in which every floating-point number is written with
// 17 significant digits ("%.17g"), so doubles survive a text round trip
// bit-for-bit. Non-finite numbers are rejected.
std::string dump(const json& value);

// Appends a single number using the same rule as dump().
void append_number(std::string& out, double v);

}  // namespace lpi::wire
