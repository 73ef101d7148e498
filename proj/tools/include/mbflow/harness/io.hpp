#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mbflow/types.hpp"

namespace mbflow::harness {

/// Shortest decimal form that parses back to the same double; "nan", "inf",
/// "-inf" for non-finite values.
std::string format_double(double x);

/// Rows of numbers under a comma-separated header, '\n' line ends.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  std::string str() const { return out_; }

 private:
  std::size_t cols_;
  std::string out_;
};

/// Writes `content` to `path` (binary, truncating). Throws Error on failure.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Lowercase hex SHA-256 of a string or of a file's bytes.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace mbflow::harness
