#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace adprog::report {

/// Accumulates a delimited table row by row.
class TableBuilder {
 public:
  explicit TableBuilder(std::vector<std::string> header);
  TableBuilder& row(std::vector<std::string> fields);
  std::string str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

std::string num(double v);

/// Writes report files under one directory, each terminated by a
/// "# config-hash: <hex>" line.
class Writer {
 public:
  Writer(std::filesystem::path dir, std::string config_hash);

  const std::filesystem::path& dir() const { return dir_; }
  Writer sub(const std::string& name) const;
  /// Returns the path written.
  std::filesystem::path write(const std::string& name, const std::string& content) const;

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

std::string footer(const std::string& config_hash);

}  // namespace adprog::report
