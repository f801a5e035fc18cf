#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcompat {

// Rectangular table of string cells under named columns. The CSV and JSON
// renderings are mutually lossless: values stay strings in both, and the
// column order is preserved, so csv -> table -> json -> table -> csv is the
// identity.
class ResultTable {
public:
  explicit ResultTable(std::vector<std::string> columns);

  const std::vector<std::string> &columns() const { return columns_; }
  const std::vector<std::vector<std::string>> &rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add_row(std::vector<std::string> values);

  std::string to_csv() const;
  std::string to_json() const;
  static ResultTable from_csv(const std::string &text);
  static ResultTable from_json(const std::string &text);

  void write_csv(const std::string &path) const;
  void write_json(const std::string &path) const;

  // Shortest decimal form that parses back to the same double. Every numeric
  // cell goes through this, which keeps equal runs byte-identical.
  static std::string format_double(double v);
  static std::string format_int(std::int64_t v);

private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

} // namespace jcompat
