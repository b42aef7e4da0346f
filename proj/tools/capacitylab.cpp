#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "capacitylab/config.hpp"
#include "capacitylab/runner.hpp"

namespace {

using namespace capacitylab;

struct Args {
  std::string config;
  std::string out;
  bool parallel = false;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("config", a.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "directory for report.json and CSV files");
  cmd->add_flag("--parallel", a.parallel, "run tasks concurrently");
  cmd->add_option("--seed", a.seed, "override the [global] seed");
  cmd->add_flag("--json", a.json, "print report.json to stdout");
}

int execute(const Args& a, std::set<std::string> kinds) {
  const auto cfg = config::load_config(a.config);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  runner::RunOptions opt;
  if (!a.out.empty()) opt.out_dir = std::filesystem::path(a.out);
  opt.parallel = a.parallel;
  opt.seed = a.seed;
  opt.kinds = std::move(kinds);
  const auto rep = runner::run(cfg, opt);
  if (a.json) {
    std::cout << rep.json();
  } else {
    for (const auto& t : rep.tasks) {
      std::cout << "[" << t.id << "] " << t.kind << ": " << t.status;
      if (!t.error.empty()) std::cout << " (" << t.error << ")";
      std::cout << "\n" << t.summary;
    }
    const auto& s = rep.report["summary"];
    std::cout << s["tasks"].get<std::size_t>() << " tasks: " << s["ok"].get<std::size_t>() << " ok, "
              << s["failed"].get<std::size_t>() << " failed, " << s["errors"].get<std::size_t>() << " errors\n";
  }
  return rep.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capacitylab: finite capacity experiments"};
  app.set_version_flag("--version", std::string(CAPACITYLAB_VERSION));
  app.require_subcommand(1);

  Args run_args, verify_args, game_args, join_args, hausdorff_args;
  auto* run = app.add_subcommand("run", "run every task of a config");
  add_common(run, run_args);
  auto* verify = app.add_subcommand("verify", "run only the verify tasks");
  add_common(verify, verify_args);
  auto* game = app.add_subcommand("game", "run only the game tasks");
  add_common(game, game_args);
  auto* join = app.add_subcommand("join", "run only the join tasks");
  add_common(join, join_args);
  auto* hausdorff = app.add_subcommand("hausdorff", "run only the hausdorff tasks");
  add_common(hausdorff, hausdorff_args);
  std::string check_path;
  auto* check = app.add_subcommand("check", "parse and validate a config");
  check->add_option("config", check_path, "experiment config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return execute(run_args, {});
    if (*verify) return execute(verify_args, {"verify"});
    if (*game) return execute(game_args, {"game"});
    if (*join) return execute(join_args, {"join"});
    if (*hausdorff) return execute(hausdorff_args, {"hausdorff"});
    if (*check) {
      const auto cfg = config::load_config(check_path);
      for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "ok " << cfg.digest() << "\n";
      return 0;
    }
  } catch (const config::ConfigError& e) {
    for (const auto& m : e.messages) std::cerr << "error: " << m << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
