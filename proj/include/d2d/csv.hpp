#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "d2d/errors.hpp"

namespace d2d::csv {

/// 12 significant digits, '.' decimal separator, independent of locale.
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

class Writer {
 public:
  Writer(const std::string& path, std::vector<std::string> header) : out_(path), width_(header.size()) {
    if (!out_) throw ConfigError("cannot open " + path + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw DomainError("csv row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t width_;
};

}  // namespace d2d::csv
