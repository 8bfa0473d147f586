#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arcstab/classify.hpp"
#include "arcstab/features.hpp"

namespace arcstab {

struct MonitorConfig {
  PipelineConfig pipeline;
  double sample_rate = 10000.0;
  std::optional<double> asi_threshold;  // falls back to the model's calibrated value
  std::size_t warmup_windows = 3;

  void validate() const;
};

enum class WarningReason { None, Classifier, AsiThreshold, Both, Degenerate };

std::string_view warning_reason_name(WarningReason reason);

struct MonitorEvent {
  std::size_t window_index = 0;
  double frame_time_s = 0.0;
  std::optional<Regime> label;
  std::array<double, kRegimeCount> scores{};
  double asi = 0.0;
  double thd_arc = 0.0;
  double h_s = 0.0;
  std::optional<double> dh_s_dt;
  bool warning = false;
  WarningReason reason = WarningReason::None;
  bool degenerate = false;
  bool warmup = false;
};

/// Caller-owned stream position. Copyable, so a stream can be forked.
struct MonitorState {
  std::vector<double> ring;   // last window_len samples, circular
  std::size_t head = 0;       // next write position
  std::uint64_t count = 0;    // samples consumed
  std::size_t windows = 0;    // events emitted
  std::optional<double> prev_h_s;
};

/// Algorithm: every hop, extract the window, classify it and raise a warning
/// when the classifier says Extinction or ASI exceeds the threshold.
class Monitor {
 public:
  Monitor(MonitorConfig config, std::shared_ptr<const TrainedModel> model);

  MonitorState initial_state() const;

  /// Consumes `chunk` and returns one event per completed hop. Any split of
  /// a stream into chunks gives the same events.
  std::vector<MonitorEvent> step(MonitorState& state, std::span<const double> chunk) const;

  double threshold() const { return threshold_; }
  const MonitorConfig& config() const { return config_; }

 private:
  MonitorEvent analyse(const MonitorState& state, std::uint64_t start) const;

  MonitorConfig config_;
  std::shared_ptr<const TrainedModel> model_;
  FeaturePipeline pipeline_;
  double threshold_ = 0.0;
};

nlohmann::json event_to_json(const MonitorEvent& event);

/// p-quantile (linear interpolation) of the ASI of `regime` rows.
double calibrate_asi_threshold(const std::vector<FeatureRow>& rows, Regime regime = Regime::Stable,
                               double quantile = 0.99);

}  // namespace arcstab
