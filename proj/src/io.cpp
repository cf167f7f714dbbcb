#include "hypcon/io.hpp"

#include <cstdio>

namespace hypcon {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", value);
  return buf;
}

void write_row(std::ostream& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out << ',';
    out << fmt(v);
    first = false;
  }
  out << '\n';
}

void write_row(std::ostream& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << fmt(values[i]);
  }
  out << '\n';
}

}  // namespace hypcon
