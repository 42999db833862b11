#pragma once

// Minimal CSV reader/writer for the toolkit's flat artifacts. Fields with
// commas, quotes or newlines are quoted on write; quoted fields are accepted
// on read. Lines starting with '#' before the header are kept as comments
// (the recording CSV format stores fs/quant there).

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines, marker stripped
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string csv_escape(const std::string& field) {
  bool needs_quote = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n') needs_quote = true;
  if (!needs_quote) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  CsvTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!header_seen && !line.empty() && line[0] == '#') {
      table.comments.push_back(trim(line.substr(1)));
      continue;
    }
    if (!header_seen) {
      table.header = parse_csv_line(line);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    table.rows.push_back(parse_csv_line(line));
  }
  if (!header_seen) throw MalformedHeader("empty CSV: " + path);
  return table;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path);
  }

  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace afrkit
