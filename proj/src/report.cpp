#include "adprog/report.hpp"

#include <fstream>

#include "adprog/csv.hpp"
#include "adprog/error.hpp"

namespace adprog::report {

TableBuilder::TableBuilder(std::vector<std::string> header) : width_(header.size()) {
  text_ = csv::join_line(header) + "\n";
}

TableBuilder& TableBuilder::row(std::vector<std::string> fields) {
  if (fields.size() != width_) throw Error("report table row has the wrong number of fields");
  text_ += csv::join_line(fields) + "\n";
  return *this;
}

std::string num(double v) { return csv::format_number(v); }

std::string footer(const std::string& config_hash) { return "# config-hash: " + config_hash + "\n"; }

Writer::Writer(std::filesystem::path dir, std::string config_hash)
    : dir_(std::move(dir)), hash_(std::move(config_hash)) {}

Writer Writer::sub(const std::string& name) const { return Writer(dir_ / name, hash_); }

std::filesystem::path Writer::write(const std::string& name, const std::string& content) const {
  const std::filesystem::path path = dir_ / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report file " + path.string());
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
  out << footer(hash_);
  if (!out) throw Error("failed writing report file " + path.string());
  return path;
}

}  // namespace adprog::report
