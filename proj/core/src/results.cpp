#include "jcompat/results.hpp"

#include "jcompat/image.hpp" // IoError

#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

namespace jcompat {

ResultTable::ResultTable(std::vector<std::string> columns)
    : columns_(std::move(columns)) {
  if (columns_.empty())
    throw std::invalid_argument("ResultTable: no columns");
}

void ResultTable::add_row(std::vector<std::string> values) {
  if (values.size() != columns_.size())
    throw std::invalid_argument("ResultTable: row width mismatch");
  rows_.push_back(std::move(values));
}

namespace {

bool needs_quoting(const std::string &s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

void append_csv_field(std::string &out, const std::string &s) {
  if (!needs_quoting(s)) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
}

// Parses one CSV record (handles quoted fields); advances pos past the
// terminating newline. Returns false at end of input.
bool parse_csv_record(const std::string &text, std::size_t &pos,
                      std::vector<std::string> &fields) {
  fields.clear();
  if (pos >= text.size())
    return false;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field += c;
      ++pos;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      ++pos;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
      continue;
    }
    if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n')
        ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return true;
    }
    field += c;
    ++pos;
  }
  fields.push_back(std::move(field));
  return true;
}

} // namespace

std::string ResultTable::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i)
      out += ',';
    append_csv_field(out, columns_[i]);
  }
  out += '\n';
  for (const auto &row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i)
        out += ',';
      append_csv_field(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

ResultTable ResultTable::from_csv(const std::string &text) {
  std::size_t pos = 0;
  std::vector<std::string> fields;
  if (!parse_csv_record(text, pos, fields))
    throw IoError("csv: empty input");
  ResultTable t(fields);
  while (parse_csv_record(text, pos, fields)) {
    if (fields.size() == 1 && fields[0].empty())
      continue; // trailing blank line
    t.add_row(fields);
  }
  return t;
}

std::string ResultTable::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto &row : rows_) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < columns_.size(); ++i)
      obj[columns_[i]] = row[i];
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

ResultTable ResultTable::from_json(const std::string &text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw IoError(std::string("json: ") + e.what());
  }
  if (!doc.is_array())
    throw IoError("json: expected an array of row objects");
  if (doc.empty())
    throw IoError("json: empty array carries no column names");
  std::vector<std::string> columns;
  for (auto it = doc[0].begin(); it != doc[0].end(); ++it)
    columns.push_back(it.key());
  ResultTable t(std::move(columns));
  for (const auto &obj : doc) {
    std::vector<std::string> row;
    row.reserve(t.columns().size());
    for (const auto &col : t.columns()) {
      if (!obj.contains(col))
        throw IoError("json: row missing column " + col);
      row.push_back(obj[col].get<std::string>());
    }
    t.add_row(std::move(row));
  }
  return t;
}

void ResultTable::write_csv(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path);
  out << to_csv();
  if (!out)
    throw IoError("write failed for " + path);
}

void ResultTable::write_json(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path);
  out << to_json();
  if (!out)
    throw IoError("write failed for " + path);
}

std::string ResultTable::format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string ResultTable::format_int(std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace jcompat
