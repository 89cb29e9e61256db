#include "abflab/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "abflab/errors.hpp"

namespace abflab::csv {

std::string real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17e", v == 0.0 ? 0.0 : v);
  return buf;
}

Writer::Writer(const std::string& path, std::initializer_list<std::string_view> header)
    : out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot open " + path + " for writing");
  for (auto h : header) cell(h);
  end_row();
}

Writer::Writer(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot open " + path + " for writing");
  for (const auto& h : header) cell(std::string_view(h));
  end_row();
}

void Writer::sep() {
  if (!first_) out_ << ',';
  first_ = false;
}

Writer& Writer::cell(double v) {
  sep();
  out_ << real(v);
  return *this;
}

Writer& Writer::cell(std::uint64_t v) {
  sep();
  out_ << v;
  return *this;
}

Writer& Writer::cell(std::string_view s) {
  sep();
  out_ << s;
  return *this;
}

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

std::vector<double> Table::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != name) continue;
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(c < r.size() ? r[c] : std::nan(""));
    return out;
  }
  throw Error("missing column " + name);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t\r");
    const auto e = tok.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(path + " is empty");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& s : split(line)) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      row.push_back(end != s.c_str() && *end == '\0' ? v : std::nan(""));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace abflab::csv
