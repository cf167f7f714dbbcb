#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace hypcon {

// All floating output uses %.12e.
std::string fmt(double value);

// Writes one CSV row of numbers, comma separated, LF terminated.
void write_row(std::ostream& out, std::initializer_list<double> values);
void write_row(std::ostream& out, const std::vector<double>& values);

}  // namespace hypcon
