#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "arcstab/classify.hpp"
#include "arcstab/eval.hpp"
#include "arcstab/features.hpp"
#include "arcstab/monitor.hpp"
#include "arcstab/signal.hpp"

namespace arcstab {

struct TrainSection {
  ModelKind kind = ModelKind::SvmRbf;
  Hyperparams hyperparams;
  double asi_quantile = 0.99;  // stable-class ASI quantile stored as the warning threshold
};

struct MonitorSection {
  std::optional<double> asi_threshold;
  std::size_t warmup_windows = 3;
  std::size_t min_lead_windows = 5;
};

/// Every stage's settings. One master seed feeds synthesis, training and
/// evaluation.
struct RunConfig {
  std::uint64_t seed = 42;
  DatasetRecipe generate;
  PipelineConfig pipeline;
  TrainSection train;
  EvalOptions eval;
  MonitorSection monitor;

  /// Pushes the master seed and the pipeline segmentation into the
  /// sections that consume them.
  void resolve();
  void validate() const;

  MonitorConfig monitor_config() const;
  double sample_rate() const { return generate.phases[0].sample_rate; }
};

nlohmann::json regime_params_to_json(const RegimeParams& p);
/// Overrides `base` with the keys present in `j`; unknown keys are rejected.
RegimeParams regime_params_from_json(const nlohmann::json& j, RegimeParams base);

/// Fully resolved config; keys sorted, so dump() is canonical.
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the compact canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace arcstab
