#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "btabl/error.hpp"

namespace btabl::app {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

class CsvRow {
 public:
  CsvRow& operator<<(std::string_view s) {
    bool quote = s.find_first_of(",\"\n") != std::string_view::npos;
    std::string cell;
    if (quote) {
      cell.push_back('"');
      for (char c : s) {
        if (c == '"') cell.push_back('"');
        cell.push_back(c);
      }
      cell.push_back('"');
    } else {
      cell.assign(s);
    }
    cells_.push_back(std::move(cell));
    return *this;
  }
  CsvRow& operator<<(const char* s) { return *this << std::string_view(s); }
  CsvRow& operator<<(const std::string& s) { return *this << std::string_view(s); }
  CsvRow& operator<<(double v) {
    cells_.push_back(format_double(v));
    return *this;
  }
  CsvRow& operator<<(std::size_t v) {
    cells_.push_back(std::to_string(v));
    return *this;
  }
  CsvRow& operator<<(int v) {
    cells_.push_back(std::to_string(v));
    return *this;
  }
  CsvRow& operator<<(bool v) {
    cells_.push_back(v ? "1" : "0");
    return *this;
  }
  template <class T>
  CsvRow& operator<<(const std::optional<T>& v) {
    if (v) return *this << *v;
    cells_.emplace_back();
    return *this;
  }

  std::size_t size() const { return cells_.size(); }
  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (i) out.push_back(',');
      out += cells_[i];
    }
    return out;
  }

 private:
  std::vector<std::string> cells_;
};

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header, bool append = false)
      : path_(path), width_(header.size()) {
    const bool fresh = !append || !std::filesystem::exists(path);
    out_.open(path, fresh ? std::ios::binary | std::ios::trunc : std::ios::binary | std::ios::app);
    if (!out_) fail(ErrorKind::io, "cannot write " + path.string());
    if (fresh) {
      CsvRow h;
      for (const auto& name : header) h << name;
      line(h);
    }
  }

  void write(const CsvRow& row) {
    if (row.size() != width_)
      fail(ErrorKind::contract, path_.filename().string() + ": row has " + std::to_string(row.size()) +
                                    " cells, header has " + std::to_string(width_));
    line(row);
  }

  void flush() { out_.flush(); }

 private:
  void line(const CsvRow& row) {
    out_ << row.str() << '\n';
    if (!out_) fail(ErrorKind::io, "failed writing " + path_.string());
  }

  std::filesystem::path path_;
  std::size_t width_;
  std::ofstream out_;
};

}  // namespace btabl::app
