#include "arcstab/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "arcstab/errors.hpp"
#include "arcstab/trace_io.hpp"

namespace arcstab {

namespace {

constexpr std::string_view kCsvHeader = "frame,asi,thd_arc,h_s,p50_n,p100_n,her,rms,cf,k,zcr,label";

double checked_total(const PsdFrame& psd, const char* what) {
  const double total = psd.total_power();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateSpectrum(std::string(what) + ": zero total power");
  }
  return total;
}

// Energy-domain floor below which a ratio denominator counts as zero.
void require_above_floor(double energy, double total, const SpectralBands& bands,
                         const char* what) {
  if (!(energy > bands.degeneracy_eps * total)) {
    throw DegenerateSpectrum(std::string(what) + ": fundamental power below epsilon");
  }
}

std::size_t highest_harmonic(const PsdFrame& psd, const SpectralBands& bands) {
  const double nyquist = psd.nyquist_hz();
  auto below = static_cast<std::size_t>(std::floor(nyquist / bands.fundamental_hz));
  if (static_cast<double>(below) * bands.fundamental_hz >= nyquist) --below;
  return bands.thd_harmonics == 0 ? below : std::min(below, bands.thd_harmonics);
}

}  // namespace

FeatureVector FeatureVector::from_array(std::span<const double> v) {
  if (v.size() != kFeatureCount) {
    throw InvalidArgument("feature vector needs " + std::to_string(kFeatureCount) + " values");
  }
  return FeatureVector{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
}

double asi(const PsdFrame& psd, const SpectralBands& bands) {
  const double total = checked_total(psd, "asi");
  const double peak = peak_power_at(psd, bands.fundamental_hz).power * psd.bin_hz;
  require_above_floor(peak, total, bands, "asi");
  return band_energy(psd, bands.asi_band.low_hz, bands.asi_band.high_hz) / peak;
}

double thd_arc(const PsdFrame& psd, const SpectralBands& bands) {
  const double total = checked_total(psd, "thd_arc");
  const double fundamental = peak_power_at(psd, bands.fundamental_hz).power;
  require_above_floor(fundamental * psd.bin_hz, total, bands, "thd_arc");
  const std::size_t top = highest_harmonic(psd, bands);
  double harmonics = 0.0;
  for (std::size_t n = 2; n <= top; ++n) {
    harmonics += peak_power_at(psd, static_cast<double>(n) * bands.fundamental_hz).power;
  }
  return std::sqrt(harmonics / fundamental);
}

double spectral_entropy(const PsdFrame& psd) {
  double sum = 0.0;
  for (double p : psd.power) sum += p;
  if (!(sum > 0.0)) throw DegenerateSpectrum("spectral_entropy: zero total power");
  double h = 0.0;
  for (double p : psd.power) {
    if (p > 0.0) {
      const double q = p / sum;
      h -= q * std::log(q);
    }
  }
  return std::max(0.0, h);
}

double her(const PsdFrame& psd, const SpectralBands& bands) {
  const double total = checked_total(psd, "her");
  const double f0 = bands.fundamental_hz;
  const double eps = bands.her_half_width_hz;
  const double fundamental = band_energy(psd, f0 - eps, f0 + eps);
  require_above_floor(fundamental, total, bands, "her");
  return band_energy(psd, 2.0 * f0 - eps, 2.0 * f0 + eps) / fundamental;
}

double spd(const PsdFrame& psd, const SpectralBands& bands) {
  std::vector<double> values;
  for (std::size_t k = 0; k < psd.bins(); ++k) {
    const double f = psd.frequency(k);
    if (f >= bands.asi_band.low_hz && f <= bands.asi_band.high_hz) values.push_back(psd.power[k]);
  }
  if (values.size() < 2) throw InvalidArgument("spd: band holds fewer than 2 bins");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / static_cast<double>(values.size());
}

TimeFeatures time_features(std::span<const double> frame) {
  if (frame.size() < 2) throw InvalidArgument("time_features: frame needs >= 2 samples");
  const auto n = static_cast<double>(frame.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  double peak = 0.0;
  for (double x : frame) {
    sum += x;
    sum_sq += x * x;
    peak = std::max(peak, std::abs(x));
  }
  const double mean = sum / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : frame) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;

  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < frame.size(); ++i) {
    if (frame[i] * frame[i + 1] < 0.0) ++crossings;
  }

  TimeFeatures out;
  out.rms = std::sqrt(sum_sq / n);
  out.zcr = static_cast<double>(crossings) / (n - 1.0);
  if (!(m2 > 0.0) || !(out.rms > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.cf = peak / out.rms;
  out.k = m4 / (m2 * m2);
  return out;
}

FeatureVector feature_vector(std::span<const double> frame, const PsdFrame& psd,
                             const SpectralBands& bands) {
  const double total = checked_total(psd, "feature_vector");
  const TimeFeatures t = time_features(frame);
  if (t.degenerate) throw DegenerateSpectrum("feature_vector: constant frame");
  FeatureVector v;
  v.asi = asi(psd, bands);
  v.thd_arc = thd_arc(psd, bands);
  v.h_s = spectral_entropy(psd);
  v.p50_n = band_energy(psd, bands.asi_band.low_hz, bands.asi_band.high_hz) / total;
  v.p100_n = band_energy(psd, bands.p100_band.low_hz, bands.p100_band.high_hz) / total;
  v.her = her(psd, bands);
  v.rms = t.rms;
  v.cf = t.cf;
  v.k = t.k;
  v.zcr = t.zcr;
  return v;
}

void PipelineConfig::validate() const {
  if (segmentation.window_len < 2) throw InvalidArgument("pipeline: window_len must be >= 2");
  if (segmentation.hop < 1) throw InvalidArgument("pipeline: hop must be >= 1");
  if (nfft < segmentation.window_len || (nfft & (nfft - 1)) != 0) {
    throw InvalidArgument("pipeline: nfft must be a power of two >= window_len");
  }
  if (!(bands.fundamental_hz > 0.0)) throw InvalidArgument("pipeline: fundamental_hz must be > 0");
  if (!(bands.asi_band.low_hz < bands.asi_band.high_hz) ||
      !(bands.p100_band.low_hz < bands.p100_band.high_hz)) {
    throw InvalidArgument("pipeline: inverted band");
  }
  if (!(bands.her_half_width_hz > 0.0)) throw InvalidArgument("pipeline: her half width must be > 0");
  if (!(bands.degeneracy_eps > 0.0)) throw InvalidArgument("pipeline: degeneracy_eps must be > 0");
}

std::vector<double> entropy_rate(const DescriptorSeries& series) {
  if (series.h_s.size() < 2) throw InvalidArgument("entropy_rate: need at least 2 frames");
  if (!(series.hop_s > 0.0)) throw InvalidArgument("entropy_rate: hop_s must be > 0");
  std::vector<double> rate(series.h_s.size() - 1);
  for (std::size_t i = 0; i + 1 < series.h_s.size(); ++i) {
    rate[i] = (series.h_s[i + 1] - series.h_s[i]) / series.hop_s;
  }
  return rate;
}

FeaturePipeline::FeaturePipeline(PipelineConfig config, double sample_rate)
    : config_((config.validate(), config)),
      engine_(config.segmentation.window_len, config.nfft, sample_rate) {}

double FeaturePipeline::hop_s() const {
  return static_cast<double>(config_.segmentation.hop) / sample_rate();
}

double FeaturePipeline::frame_time(std::size_t start_index) const {
  const double centre = static_cast<double>(start_index) +
                        0.5 * static_cast<double>(config_.segmentation.window_len - 1);
  return centre / sample_rate();
}

PsdFrame FeaturePipeline::psd(std::span<const double> frame, double frame_time_s) const {
  return engine_.compute(frame, frame_time_s);
}

FeatureVector FeaturePipeline::extract(std::span<const double> frame) const {
  return feature_vector(frame, engine_.compute(frame), config_.bands);
}

std::vector<FeatureRow> FeaturePipeline::extract_trace(const SignalTrace& trace) const {
  if (trace.samples.empty()) throw EmptyInput("empty input: trace has no samples");
  if (trace.sample_rate != sample_rate()) {
    throw InvalidArgument("extract: trace sample rate does not match pipeline");
  }
  const auto frames = segment(trace, config_.segmentation);
  std::set<std::size_t> labeled;
  for (const auto& l : trace.labels) labeled.insert(l.window_index);

  std::vector<FeatureRow> rows;
  for (const auto& f : frames) {
    if (!labeled.empty() && !labeled.contains(f.index)) continue;
    FeatureRow row;
    row.frame = f.index;
    row.label = f.label;
    try {
      row.features = extract(f.samples);
    } catch (const DegenerateSpectrum& e) {
      throw DegenerateSpectrum(std::string(e.what()) + " (frame " + std::to_string(f.index) + ")");
    }
    rows.push_back(row);
  }
  return rows;
}

DescriptorSeries FeaturePipeline::descriptors(const SignalTrace& trace) const {
  const auto frames = segment(trace, config_.segmentation);
  DescriptorSeries s;
  s.hop_s = hop_s();
  for (const auto& f : frames) {
    const double t = frame_time(f.start_index);
    const PsdFrame p = engine_.compute(f.samples, t);
    s.times_s.push_back(t);
    s.asi.push_back(asi(p, config_.bands));
    s.thd_arc.push_back(thd_arc(p, config_.bands));
    s.h_s.push_back(spectral_entropy(p));
  }
  return s;
}

std::string feature_csv_string(const std::vector<FeatureRow>& rows, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.frame);
    for (double v : r.features.to_array()) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    if (r.label) out += regime_name(*r.label);
    out += '\n';
  }
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows,
                       const std::string& comment) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << feature_csv_string(rows, comment);
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kCsvHeader) throw ParseError("unexpected feature CSV header", line_no);
      header = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != kFeatureCount + 2) {
      throw ParseError("expected " + std::to_string(kFeatureCount + 2) + " columns", line_no);
    }
    FeatureRow row;
    const auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), row.frame);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size()) {
      throw ParseError("malformed frame index", line_no);
    }
    std::array<double, kFeatureCount> values{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) values[i] = parse_double(fields[i + 1], line_no);
    row.features = FeatureVector::from_array(values);
    if (!fields.back().empty()) {
      try {
        row.label = parse_regime(fields.back());
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), line_no);
      }
    }
    rows.push_back(row);
  }
  if (!header) throw ParseError("missing feature CSV header", line_no);
  return rows;
}

}  // namespace arcstab
