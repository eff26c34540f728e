// SPDX-License-Identifier: Apache-2.0
#include "pricestock/csv.hpp"

#include <charconv>
#include <sstream>

#include "pricestock/error.hpp"

namespace pricestock {

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorKind::Io, "format_number: conversion failed");
  return std::string(buf, end);
}

std::string format_number(long value) { return std::to_string(value); }

CsvWriter::CsvWriter(const std::string& path, std::initializer_list<std::string_view> header)
    : CsvWriter(path, std::vector<std::string>(header.begin(), header.end())) {}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
  if (!out_) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_cells(header);
}

void CsvWriter::write_cells(const std::vector<std::string>& cells) {
  if (cells.size() != width_) fail(ErrorKind::Contract, "csv row width does not match header: " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) fail(ErrorKind::Io, "write failed: " + path_);
}

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == ' ' || c.back() == '\r')) c.pop_back();
    std::size_t i = 0;
    while (i < c.size() && c[i] == ' ') ++i;
    c.erase(0, i);
  }
  return cells;
}
}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      fail(ErrorKind::Parse, path + ":" + std::to_string(number) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(number);
  }
  if (table.header.empty()) fail(ErrorKind::Parse, path + ":1: empty file");
  return table;
}

double parse_number(std::string_view text, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    fail(ErrorKind::Parse, "line " + std::to_string(line) + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace pricestock
