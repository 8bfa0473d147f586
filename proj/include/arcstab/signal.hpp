#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace arcstab {

/// Arc operating regime. The enumerator order is the fixed class order used
/// for tie-breaking everywhere.
enum class Regime : int { Transient = 0, Stable = 1, Extinction = 2 };

inline constexpr std::size_t kRegimeCount = 3;
inline constexpr std::array<Regime, kRegimeCount> kRegimes{
    Regime::Transient, Regime::Stable, Regime::Extinction};

std::string_view regime_name(Regime regime);

/// Accepts the canonical names case-insensitively; "Instable" is a synonym
/// for Extinction.
Regime parse_regime(std::string_view name);

inline constexpr std::size_t regime_index(Regime regime) {
  return static_cast<std::size_t>(regime);
}

struct FrequencyBand {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Knobs for one synthesized phase. Field names mirror the generator JSON.
struct RegimeParams {
  double base_amplitude = 100.0;  // A, peak of the fundamental
  double fundamental_hz = 50.0;
  double harmonic2_ratio = 0.1;   // amplitude of 2*f0 relative to base
  double noise_sigma = 1.0;       // A, additive white Gaussian noise
  double sample_rate = 10000.0;
  double duration_s = 1.0;

  // Transient bursts: band-limited noise under raised-cosine envelopes.
  FrequencyBand burst_band{100.0, 500.0};
  double burst_rate_min_hz = 3.0;
  double burst_rate_max_hz = 8.0;
  double burst_min_s = 0.2;
  double burst_max_s = 0.5;
  double burst_amplitude = 100.0;  // A rms at envelope peak (median burst)
  double burst_spread = 0.5;      // log-normal sigma of per-burst amplitude

  // Extinction: double-sideband AM, depth m(t) = m0 * exp(lambda t), m <= 1.
  double sideband_mod_hz = 5.0;
  double modulation_depth = 0.1;
  double instability_lambda = 2.0;

  bool clip = false;
  double clip_abs_a = 500.0;

  std::uint64_t seed = 0;

  /// Throws InvalidArgument on non-finite or out-of-range values.
  void validate() const;
};

struct WindowLabel {
  std::size_t window_index = 0;
  Regime label = Regime::Stable;
};

/// Contiguous run of samples owned by one regime.
struct RegimeSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  Regime regime = Regime::Stable;
};

struct SignalTrace {
  std::vector<double> samples;
  double sample_rate = 10000.0;
  std::vector<WindowLabel> labels;  // sparse, keyed by window index
  std::vector<RegimeSpan> spans;    // sample ownership, may be empty

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  /// Checks the type invariants; `window_count` bounds the label indices.
  void validate(std::optional<std::size_t> window_count = std::nullopt) const;
};

struct SegmentConfig {
  std::size_t window_len = 200;
  std::size_t hop = 16;
};

struct Frame {
  std::size_t index = 0;
  std::size_t start_index = 0;
  std::vector<double> samples;
  std::optional<Regime> label;
};

/// floor((n - window_len) / hop) + 1 for n >= window_len, else 0.
std::size_t frame_count(std::size_t n, std::size_t window_len, std::size_t hop);

std::vector<Frame> segment(const SignalTrace& trace, std::size_t window_len,
                           std::size_t hop);

inline std::vector<Frame> segment(const SignalTrace& trace, const SegmentConfig& cfg) {
  return segment(trace, cfg.window_len, cfg.hop);
}

/// Majority regime of samples [start, start + length) under `spans`; ties go
/// to the earlier regime in class order.
std::optional<Regime> majority_regime(std::span<const RegimeSpan> spans,
                                      std::size_t start, std::size_t length);

SignalTrace generate_phase(Regime regime, const RegimeParams& params);

/// Default per-regime parameters of the shipped dataset recipe.
RegimeParams default_params(Regime regime);

/// Three phases concatenated in Transient, Stable, Extinction order with
/// `windows_per_phase` labeled windows per phase.
struct DatasetRecipe {
  std::array<RegimeParams, kRegimeCount> phases{
      default_params(Regime::Transient), default_params(Regime::Stable),
      default_params(Regime::Extinction)};
  SegmentConfig segmentation;
  std::size_t windows_per_phase = 49;
  std::uint64_t seed = 42;
};

/// Phase seeds are derived from the recipe seed; the per-phase `seed` fields
/// are overwritten.
SignalTrace synthesize_dataset(const DatasetRecipe& recipe);

}  // namespace arcstab
