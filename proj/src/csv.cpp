#include "pearle/csv.hpp"

#include <array>
#include <cmath>

namespace pearle {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os) {
  bool first = true;
  for (const auto h : header) {
    write_sep(first);
    os_ << h;
  }
  os_ << '\n';
}

}  // namespace pearle
