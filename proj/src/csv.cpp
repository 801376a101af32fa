#include "rapc/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rapc {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvWriter& CsvWriter::cell(double x) {
  current_.push_back(format_real(x));
  return *this;
}

CsvWriter& CsvWriter::cell(std::int64_t x) {
  current_.push_back(std::to_string(x));
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& text) {
  if (text.find_first_of(",\"\n") != std::string::npos) {
    std::string quoted = "\"";
    for (char c : text) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    current_.push_back(quoted + "\"");
  } else {
    current_.push_back(text);
  }
  return *this;
}

CsvWriter& CsvWriter::blank() {
  current_.emplace_back();
  return *this;
}

void CsvWriter::end_row() {
  if (current_.size() != columns_.size())
    throw std::logic_error("CsvWriter: row has " + std::to_string(current_.size()) +
                           " fields, header has " + std::to_string(columns_.size()));
  rows_.push_back(std::move(current_));
  current_.clear();
}

std::string CsvWriter::str(std::string_view config_hash) const {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << ',';
      os << fields[i];
    }
    os << '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
  os << "# config_hash=" << config_hash << " version=" << kToolVersion << '\n';
  return os.str();
}

}  // namespace rapc
