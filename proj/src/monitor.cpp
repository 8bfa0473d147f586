#include "arcstab/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arcstab/errors.hpp"

namespace arcstab {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void MonitorConfig::validate() const {
  pipeline.validate();
  if (!(std::isfinite(sample_rate) && sample_rate > 0.0)) {
    throw InvalidArgument("monitor: sample_rate must be > 0");
  }
  if (asi_threshold && !(std::isfinite(*asi_threshold) && *asi_threshold > 0.0)) {
    throw InvalidArgument("monitor: asi_threshold must be > 0");
  }
}

std::string_view warning_reason_name(WarningReason reason) {
  switch (reason) {
    case WarningReason::None: return "none";
    case WarningReason::Classifier: return "classifier";
    case WarningReason::AsiThreshold: return "asi_threshold";
    case WarningReason::Both: return "both";
    case WarningReason::Degenerate: return "degenerate";
  }
  return "none";
}

Monitor::Monitor(MonitorConfig config, std::shared_ptr<const TrainedModel> model)
    : config_((config.validate(), std::move(config))),
      model_(std::move(model)),
      pipeline_(config_.pipeline, config_.sample_rate) {
  if (!model_) throw InvalidArgument("monitor: no model loaded");
  if (config_.asi_threshold) {
    threshold_ = *config_.asi_threshold;
  } else if (model_->asi_threshold) {
    threshold_ = *model_->asi_threshold;
  } else {
    throw ConfigError("monitor: no asi_threshold configured and the model carries none");
  }
  if (model_->standardizer.input_dims() != kFeatureCount) {
    throw InvalidArgument("monitor: model expects " +
                          std::to_string(model_->standardizer.input_dims()) + " features");
  }
}

MonitorState Monitor::initial_state() const {
  MonitorState s;
  s.ring.assign(config_.pipeline.segmentation.window_len, 0.0);
  return s;
}

std::vector<MonitorEvent> Monitor::step(MonitorState& state, std::span<const double> chunk) const {
  const std::size_t len = config_.pipeline.segmentation.window_len;
  const std::size_t hop = config_.pipeline.segmentation.hop;
  if (state.ring.size() != len) throw InvalidArgument("monitor: state does not match config");
  for (double v : chunk) {
    if (!std::isfinite(v)) throw InvalidArgument("monitor: non-finite sample");
  }
  std::vector<MonitorEvent> events;
  for (double v : chunk) {
    state.ring[state.head] = v;
    state.head = (state.head + 1) % len;
    ++state.count;
    if (state.count >= len && (state.count - len) % hop == 0) {
      MonitorEvent e = analyse(state, state.count - len);
      state.prev_h_s = e.degenerate ? std::nullopt : std::optional(e.h_s);
      ++state.windows;
      events.push_back(e);
    }
  }
  return events;
}

MonitorEvent Monitor::analyse(const MonitorState& state, std::uint64_t start) const {
  const std::size_t len = state.ring.size();
  std::vector<double> frame(len);
  // head points at the oldest sample once the ring is full.
  for (std::size_t i = 0; i < len; ++i) frame[i] = state.ring[(state.head + i) % len];

  MonitorEvent e;
  e.window_index = state.windows;
  e.frame_time_s = pipeline_.frame_time(static_cast<std::size_t>(start));
  e.warmup = state.windows < config_.warmup_windows;
  e.scores.fill(std::numeric_limits<double>::quiet_NaN());

  const PsdFrame psd = pipeline_.psd(frame, e.frame_time_s);
  FeatureVector v;
  try {
    v = feature_vector(frame, psd, config_.pipeline.bands);
  } catch (const DegenerateSpectrum&) {
    e.degenerate = true;
  }
  if (e.degenerate) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    e.asi = nan;
    e.thd_arc = nan;
    e.h_s = psd.total_power() > 0.0 ? spectral_entropy(psd) : nan;
    e.warning = true;
    e.reason = WarningReason::Degenerate;
    return e;
  }

  e.asi = v.asi;
  e.thd_arc = v.thd_arc;
  e.h_s = v.h_s;
  if (state.prev_h_s) e.dh_s_dt = (e.h_s - *state.prev_h_s) / pipeline_.hop_s();
  const auto features = v.to_array();
  const Prediction p = model_->predict(features);
  e.label = p.label;
  e.scores = p.scores;

  const bool by_class = p.label == Regime::Extinction;
  const bool by_asi = e.asi > threshold_;
  if (!e.warmup) {
    e.warning = by_class || by_asi;
    e.reason = by_class && by_asi ? WarningReason::Both
               : by_class         ? WarningReason::Classifier
               : by_asi           ? WarningReason::AsiThreshold
                                  : WarningReason::None;
  }
  return e;
}

json event_to_json(const MonitorEvent& e) {
  json scores = json::object();
  for (auto r : kRegimes) scores[std::string(regime_name(r))] = number_or_null(e.scores[regime_index(r)]);
  json j;
  j["window_index"] = e.window_index;
  j["frame_time_s"] = e.frame_time_s;
  j["label"] = e.label ? json(std::string(regime_name(*e.label))) : json(nullptr);
  j["scores"] = scores;
  j["asi"] = number_or_null(e.asi);
  j["thd_arc"] = number_or_null(e.thd_arc);
  j["h_s"] = number_or_null(e.h_s);
  j["dh_s_dt"] = e.dh_s_dt ? number_or_null(*e.dh_s_dt) : json(nullptr);
  j["warning"] = e.warning;
  j["reason"] = std::string(warning_reason_name(e.reason));
  j["degenerate"] = e.degenerate;
  j["warmup"] = e.warmup;
  return j;
}

double calibrate_asi_threshold(const std::vector<FeatureRow>& rows, Regime regime, double quantile) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw InvalidArgument("quantile must lie in [0, 1]");
  std::vector<double> values;
  for (const auto& r : rows) {
    if (r.label && *r.label == regime) values.push_back(r.features.asi);
  }
  if (values.empty()) {
    throw EmptyInput("no " + std::string(regime_name(regime)) + " rows to calibrate the threshold");
  }
  std::sort(values.begin(), values.end());
  const double pos = quantile * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace arcstab
