#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace abflab::csv {

/// Round-trippable scientific notation; "nan", "inf", "-inf" for non-finite values.
std::string real(double v);

/// Comma-separated writer with LF line endings. Throws Error when the file cannot be opened.
class Writer {
 public:
  Writer(const std::string& path, std::initializer_list<std::string_view> header);
  Writer(const std::string& path, const std::vector<std::string>& header);

  Writer& cell(double v);
  Writer& cell(std::uint64_t v);
  Writer& cell(std::string_view s);
  void end_row();
  void flush() { out_.flush(); }

 private:
  void sep();

  std::ofstream out_;
  bool first_ = true;
};

/// Parses a header + numeric body; non-numeric cells become NaN.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column by name; throws Error if missing.
  std::vector<double> column(const std::string& name) const;
};

Table read(const std::string& path);

}  // namespace abflab::csv
