#pragma once

#include <charconv>
#include <concepts>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pearle {

/// Shortest decimal text that round-trips to the same double; independent of
/// the global locale.
std::string format_real(double value);

/// Minimal comma-separated writer. Reals are written with format_real, integers
/// in plain decimal, strings verbatim.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_sep(first), write_field(fields)), ...);
    os_ << '\n';
  }

 private:
  void write_sep(bool& first) {
    if (!first) os_ << ',';
    first = false;
  }
  void write_field(double v) { os_ << format_real(v); }
  void write_field(std::string_view v) { os_ << v; }
  void write_field(const std::string& v) { os_ << v; }
  void write_field(const char* v) { os_ << v; }
  template <std::integral I>
  void write_field(I v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os_.write(buf, end - buf);
  }

  std::ostream& os_;
};

}  // namespace pearle
