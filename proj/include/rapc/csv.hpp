#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rapc {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest-free fixed format: 17 significant digits, lossless for doubles.
std::string format_real(double x);

/// 64-bit FNV-1a digest, hex encoded.
std::string stable_hash(std::string_view text);

/// Minimal CSV writer: header row, data rows, and a trailing
/// `# config_hash=... version=...` comment line.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);

  CsvWriter& cell(double x);
  CsvWriter& cell(std::int64_t x);
  CsvWriter& cell(std::size_t x) { return cell(static_cast<std::int64_t>(x)); }
  CsvWriter& cell(int x) { return cell(static_cast<std::int64_t>(x)); }
  CsvWriter& cell(bool x) { return cell(static_cast<std::int64_t>(x ? 1 : 0)); }
  CsvWriter& cell(const std::string& text);
  CsvWriter& cell(const char* text) { return cell(std::string(text)); }
  /// Empty field; used for undefined quantities.
  CsvWriter& blank();
  void end_row();

  std::string str(std::string_view config_hash) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> current_;
};

}  // namespace rapc
