#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "kam/kam.hpp"
#include "kam/util.hpp"

using kamtool::json;

namespace {

void report(const std::string& kind, const std::string& message, json extra = json::object()) {
  json e = {{"error", kind}, {"message", message}};
  for (auto it = extra.begin(); it != extra.end(); ++it) e[it.key()] = it.value();
  std::cerr << e.dump() << std::endl;
}

json load_config(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw kamtool::ConfigError("config file does not exist: " + p.string());
  std::ifstream is(p);
  json j = json::parse(is, nullptr, false, true);
  if (j.is_discarded()) throw kamtool::ConfigError("config file is not valid JSON: " + p.string());
  if (!j.is_object()) throw kamtool::ConfigError("config must be a JSON object");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAM normal-form iteration, measure scans and torus verification"};
  app.set_version_flag("--version", "kamtool 1.0.0");
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", format = "csv";
  std::uint64_t seed = 1;
  int workers = 1;
  bool timing = false;

  const std::map<std::string, std::function<int(kamtool::RunContext&)>> commands = {
      {"iterate", kamtool::cmd_iterate},         {"measure-scan", kamtool::cmd_measure_scan},
      {"verify", kamtool::cmd_verify},           {"strip-scan", kamtool::cmd_strip_scan},
      {"action-chart", kamtool::cmd_action_chart}, {"normal-form", kamtool::cmd_normal_form},
      {"box-dim", kamtool::cmd_box_dim}};
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "sampling seed")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
    sub->add_flag("--timing", timing, "record wall times (makes outputs run-dependent)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("UsageError", e.what());
    return 2;
  }

  kamtool::RunContext ctx;
  for (const auto& [name, fn] : commands)
    if (app.got_subcommand(name)) ctx.command = name;
  try {
    const std::filesystem::path cp(config_path);
    ctx.config = load_config(cp);
    ctx.config_dir = cp.has_parent_path() ? cp.parent_path() : std::filesystem::path(".");
    ctx.config_hash = kam::hex64(kam::fnv1a64(ctx.config.dump()));
    ctx.seed = seed;
    ctx.out_dir = out_dir;
    ctx.workers = workers;
    ctx.format = format;
    ctx.timing = timing;
    return commands.at(ctx.command)(ctx);
  } catch (const kamtool::ConfigError& e) {
    report("ConfigError", e.what());
    return 2;
  } catch (const kam::SmallDivisorViolation& e) {
    report(e.kind, e.what(), {{"A", e.A}, {"l", e.l}, {"value", e.value}, {"stage", e.stage}});
    return 1;
  } catch (const kam::EngineError& e) {
    report(e.kind, e.what());
    return 1;
  } catch (const json::exception& e) {
    report("ConfigError", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    report("ConfigError", e.what());
    return 2;
  } catch (const std::exception& e) {
    report("EngineError", e.what());
    return 1;
  }
}
