#pragma once

#include <string>
#include <vector>

namespace gridest::csv {

/// Decimal text with 17 significant digits; round-trips a double exactly
/// and is locale independent.
std::string format_real(double v);

std::string format_count(std::size_t v);

/// Joins cells with commas and terminates the line.
std::string row(const std::vector<std::string>& cells);

}  // namespace gridest::csv
