#pragma once

// Minimal reader/writer for the flat, unquoted CSV files this project
// exchanges. Fields must not contain commas, quotes or newlines.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "avfp/types.hpp"

namespace avfp::csv {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (line.empty()) continue;
    if (line.find('"') != std::string::npos) {
      throw ParseError(path.string(), line_no, "quoted fields are not supported");
    }
    if (!have_header) {
      table.header = split(line);
      have_header = true;
      continue;
    }
    table.rows.push_back({line_no, split(line)});
  }
  if (!have_header) throw ParseError(path.string(), 1, "missing header row");
  return table;
}

inline void check_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") != std::string::npos) {
    throw Error("value '" + value + "' cannot be written to CSV");
  }
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    check_field(fields[i]);
    out += fields[i];
  }
  return out;
}

inline int parse_int(const std::string& s, const std::string& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected integer, got '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected number, got '" + s + "'");
  }
}

}  // namespace avfp::csv
