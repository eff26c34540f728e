// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace pricestock {

/// Shortest round-trip decimal representation ('.' separator, locale free).
std::string format_number(double value);
std::string format_number(long value);
inline std::string format_number(int value) { return format_number(static_cast<long>(value)); }
inline std::string format_number(std::size_t value) { return format_number(static_cast<long>(value)); }

/// Comma-separated writer with a header row. Throws Error(Io) when the file
/// cannot be opened or a write fails.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header);
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  template <class... Ts>
  void row(const Ts&... values) {
    std::vector<std::string> cells{cell(values)...};
    write_cells(cells);
  }
  void write_cells(const std::vector<std::string>& cells);

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class T>
  static std::string cell(const T& v) {
    return format_number(v);
  }

  std::string path_;
  std::ofstream out_;
  std::size_t width_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Reads a comma-separated file with a header row. Throws Error(Parse) with
/// the offending line number on ragged rows, and on an empty file.
CsvTable read_csv(const std::string& path);

/// Parses a full-string decimal; throws Error(Parse) mentioning `line`.
double parse_number(std::string_view text, std::size_t line);

}  // namespace pricestock
