#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anydoor/datapipe.hpp"
#include "anydoor/diffusion.hpp"
#include "anydoor/eval.hpp"
#include "anydoor/inference.hpp"

namespace anydoor {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Flat key=value run configuration. Lines are `key = value`; `#` starts a
/// comment. Unknown keys are rejected.
class RunConfig {
 public:
  static const std::vector<ConfigKey>& keys();

  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Applies `key=value`.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// The seed, or a validation error naming the command that needs it.
  std::uint64_t require_seed(const std::string& command) const;

  diffusion::ModelConfig model_config() const;
  diffusion::ScheduleKind schedule_kind() const;
  int total_steps() const;
  inference::TeleportConfig teleport_config() const;
  datapipe::PairConfig pair_config() const;
  datapipe::TimestepSamplerConfig timestep_config() const;
  diffusion::ConditioningConfig conditioning_config() const;

  /// Parses and cross-checks every value; throws InvalidArgument.
  void validate() const;

  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

/// ANYDOOR_RUNS if set, else the configured runs_dir.
std::filesystem::path runs_directory(const RunConfig& cfg);

}  // namespace anydoor
