#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "capacitylab/config.hpp"

namespace capacitylab::runner {

constexpr const char* kReportSchema = "capacitylab.report/1";

struct TaskContext {
  const config::ExperimentConfig& config;
  const config::Workspace& workspace;
  std::uint64_t seed;  // this task's stream
};

struct TaskResult {
  std::string id;
  std::string kind;
  std::string status = "ok";  // ok | failed (an asserted check failed) | error
  std::string error;
  nlohmann::json outputs = nlohmann::json::object();
  // file name -> contents, written next to report.json
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::string summary;  // human-readable
  double seconds = 0.0;
};

struct PreparedTask {
  std::string id;
  std::string kind;
  std::function<TaskResult(const TaskContext&)> run;
};

/// Checks every [task] section against its kind's parameters and the
/// declared objects. Throws config::ConfigError listing every problem.
std::vector<PreparedTask> prepare_tasks(const config::ExperimentConfig& config, const config::Workspace& workspace);

/// Random stream of a task: a function of the global seed and the task id
/// only, so reordering tasks does not change any task's draws.
std::uint64_t task_seed(std::uint64_t global_seed, const std::string& task_id);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  bool parallel = false;
  std::optional<std::uint64_t> seed;  // overrides [global] seed
  std::set<std::string> kinds;        // run only these task kinds; empty runs all
};

struct RunReport {
  nlohmann::json report;  // includes the "timing" block
  std::vector<TaskResult> tasks;

  int exit_code() const;
  // report.json text without the timing block
  std::string deterministic_json() const;
  std::string json() const;
};

/// Runs the tasks in declaration order (concurrently with parallel = true;
/// assembly order is unchanged) and writes report.json plus per-task CSV
/// files when out_dir is set. One task's failure does not stop the others.
RunReport run(const config::ExperimentConfig& config, const RunOptions& options = {});

}  // namespace capacitylab::runner
