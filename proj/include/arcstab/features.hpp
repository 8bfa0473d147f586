#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arcstab/signal.hpp"
#include "arcstab/tfr.hpp"

namespace arcstab {

inline constexpr std::size_t kFeatureCount = 10;

/// Column names in the fixed feature order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "asi", "thd_arc", "h_s", "p50_n", "p100_n", "her", "rms", "cf", "k", "zcr"};

struct FeatureVector {
  double asi = 0.0;
  double thd_arc = 0.0;
  double h_s = 0.0;
  double p50_n = 0.0;
  double p100_n = 0.0;
  double her = 0.0;
  double rms = 0.0;
  double cf = 0.0;
  double k = 0.0;
  double zcr = 0.0;

  std::array<double, kFeatureCount> to_array() const {
    return {asi, thd_arc, h_s, p50_n, p100_n, her, rms, cf, k, zcr};
  }
  static FeatureVector from_array(std::span<const double> v);

  bool operator==(const FeatureVector&) const = default;
};

/// Frequencies and tolerances shared by the spectral descriptors.
struct SpectralBands {
  double fundamental_hz = 50.0;
  FrequencyBand asi_band{45.0, 55.0};
  FrequencyBand p100_band{95.0, 105.0};
  double her_half_width_hz = 5.0;
  std::size_t thd_harmonics = 0;  // highest harmonic n; 0 = all below Nyquist
  double degeneracy_eps = 1e-12;  // relative to total window power
};

double asi(const PsdFrame& psd, const SpectralBands& bands = {});
double thd_arc(const PsdFrame& psd, const SpectralBands& bands = {});
double spectral_entropy(const PsdFrame& psd);
double her(const PsdFrame& psd, const SpectralBands& bands = {});
/// Population variance of the PSD bins inside the ASI band.
double spd(const PsdFrame& psd, const SpectralBands& bands = {});

struct TimeFeatures {
  double rms = 0.0;
  double cf = 0.0;
  double k = 0.0;
  double zcr = 0.0;
  bool degenerate = false;  // constant frame: cf and k undefined, emitted as 0
};

TimeFeatures time_features(std::span<const double> frame);

/// All ten descriptors. Throws DegenerateSpectrum for zero-power or constant
/// frames.
FeatureVector feature_vector(std::span<const double> frame, const PsdFrame& psd,
                             const SpectralBands& bands = {});

struct PipelineConfig {
  SegmentConfig segmentation;
  std::size_t nfft = 4096;
  SpectralBands bands;

  void validate() const;
};

struct FeatureRow {
  std::size_t frame = 0;
  FeatureVector features;
  std::optional<Regime> label;
};

struct DescriptorSeries {
  std::vector<double> times_s;
  std::vector<double> asi;
  std::vector<double> thd_arc;
  std::vector<double> h_s;
  double hop_s = 0.0;
};

/// Forward difference of H_s over the hop duration; length frames - 1.
std::vector<double> entropy_rate(const DescriptorSeries& series);

/// Segmentation + PSD + descriptors for one sample rate. Immutable after
/// construction and safe to share across threads.
class FeaturePipeline {
 public:
  FeaturePipeline(PipelineConfig config, double sample_rate);

  const PipelineConfig& config() const { return config_; }
  const PsdEngine& engine() const { return engine_; }
  double sample_rate() const { return engine_.sample_rate(); }
  double hop_s() const;
  double frame_time(std::size_t start_index) const;

  PsdFrame psd(std::span<const double> frame, double frame_time_s = 0.0) const;
  FeatureVector extract(std::span<const double> frame) const;

  /// When the trace carries labels only the labeled windows are emitted,
  /// otherwise every window (label from regime spans when present).
  std::vector<FeatureRow> extract_trace(const SignalTrace& trace) const;

  DescriptorSeries descriptors(const SignalTrace& trace) const;

 private:
  PipelineConfig config_;
  PsdEngine engine_;
};

/// Feature table: optional `# ...` comment line, then the header
/// `frame,asi,thd_arc,h_s,p50_n,p100_n,her,rms,cf,k,zcr,label`.
void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows,
                       const std::string& comment = {});
std::string feature_csv_string(const std::vector<FeatureRow>& rows, const std::string& comment = {});
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

}  // namespace arcstab
