#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capacitylab/errors.hpp"
#include "capacitylab/point_set.hpp"
#include "capacitylab/potential.hpp"
#include "capacitylab/space.hpp"
#include "capacitylab/steprans.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::config {

/// Experiment configuration: a line-oriented text format.
///
///   # comment
///   [global]
///   seed = 7
///   [space S]            arities = 2,2      base = 1/2
///   [tower T]            space = S          level = max   (one line per level)
///   [potential P]        nu = ...  M = x;y;...  X = ...  kernel = riesz alpha=1   p = 2  tol = 1e-6
///   [set A]              space = S | universe = N | potential = P;  leaves = 0,1 | paths = 0;1.0
///   [handle H]           kind = tower|uniform|weights|table|pointmass|potential|join ...
///   [task t1]            kind = capacity|join|tilde|hausdorff|game|verify|potential ...
///
/// Section names are unique per section type. Keys may repeat only where
/// noted (level).
struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
  std::size_t column = 0;  // 1-based column of the value
};

struct Section {
  std::string type;
  std::string name;  // empty for [global]
  std::size_t line = 0;
  std::vector<Entry> entries;

  const Entry* find(std::string_view key) const;
  std::vector<const Entry*> find_all(std::string_view key) const;
};

struct ExperimentConfig {
  std::vector<Section> sections;  // declaration order
  std::uint64_t seed = 0;
  double tol = 1e-9;
  std::vector<std::string> warnings;

  std::vector<const Section*> of_type(std::string_view type) const;
  const Section* find(std::string_view type, std::string_view name) const;

  // Canonical text: one entry per line, sections in declaration order.
  // parse_config(to_text()) yields the same config.
  std::string to_text() const;
  // FNV-1a of to_text(), as 16 hex digits.
  std::string digest() const;
};

/// All problems found while reading a config, each as "line L, column C: ...".
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  std::vector<std::string> messages;
};

/// Parses and fully validates: syntax, unknown sections, keys and task
/// kinds, dangling references, and out-of-range parameters. Every problem
/// is reported, not just the first.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Objects built from a validated config.
struct SpaceEntry {
  ProductTreeSpace space;
  TreeMetric metric;
};

struct HandleEntry {
  SubmeasureHandle handle;
  std::optional<std::string> space;  // name of the product space, if any
};

struct Workspace {
  std::map<std::string, SpaceEntry> spaces;
  std::map<std::string, std::shared_ptr<const steprans::NormTower>> towers;
  std::map<std::string, std::string> tower_spaces;  // tower name -> space name
  std::map<std::string, std::shared_ptr<const potential::Problem>> potentials;
  std::map<std::string, PointSet> sets;
  std::map<std::string, HandleEntry> handles;
};

/// Builds every declared object. Throws ConfigError on anything parse_config
/// would reject.
Workspace build_workspace(const ExperimentConfig& config);

// Value parsers shared with the runner. Each throws std::invalid_argument.
std::vector<std::string> split_list(std::string_view text, char sep = ',');
double parse_real(std::string_view text);
std::uint64_t parse_unsigned(std::string_view text);
bool parse_bool(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);

}  // namespace capacitylab::config
