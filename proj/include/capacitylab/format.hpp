#pragma once

#include <string>

namespace capacitylab {

// Shortest decimal string that parses back to the same double.
std::string format_real(double value);

// value rounded to the given number of significant digits.
double round_significant(double value, int digits = 12);

// format_real(round_significant(value)); the report number format.
std::string format_report_real(double value);

}  // namespace capacitylab
