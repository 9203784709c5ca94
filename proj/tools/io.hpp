#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace modsensor::cli {

using Json = nlohmann::ordered_json;

// Decimal, 12 significant digits, C locale.
std::string format_number(double x);
// The same rounding applied to a JSON number, so JSON and CSV agree digit for digit.
Json rounded(double x);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);
Json read_json(const std::filesystem::path& path);

// Plain comma-separated table with a header row; no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const;
  static CsvTable parse(const std::string& text);
  // Column position by name; ValidationError naming the column when absent.
  std::size_t column(const std::string& name) const;
};

double parse_number(const std::string& field, const std::string& what);

}  // namespace modsensor::cli
