#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace kamtool {

using json = nlohmann::json;

// Configuration problems map to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunContext {
  std::string command;
  json config;
  std::filesystem::path config_dir;
  std::string config_hash;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = ".";
  int workers = 1;
  std::string format = "csv";  // or jsonl
  bool timing = false;
  std::vector<std::string> overrides;  // schedule entries replaced by the config
};

// Rows of string cells written as CSV or JSON lines behind the provenance header.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : cols_(std::move(columns)) {}
  void add(std::vector<std::string> row);
  void write(const RunContext& ctx, const std::string& stem) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> cols_;
  std::vector<std::vector<std::string>> rows_;
};

std::string provenance_header(const RunContext& ctx);
std::string num(double v);

int cmd_iterate(RunContext& ctx);
int cmd_measure_scan(RunContext& ctx);
int cmd_verify(RunContext& ctx);
int cmd_strip_scan(RunContext& ctx);
int cmd_action_chart(RunContext& ctx);
int cmd_normal_form(RunContext& ctx);
int cmd_box_dim(RunContext& ctx);

}  // namespace kamtool
