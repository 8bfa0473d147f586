#include "arcstab/signal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "arcstab/errors.hpp"
#include "arcstab/rng.hpp"

namespace arcstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("regime params: " + what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Fundamental plus phase-locked second harmonic.
void add_tone(std::vector<double>& x, const RegimeParams& p, double phase) {
  const double w0 = kTwoPi * p.fundamental_hz / p.sample_rate;
  const double a2 = p.base_amplitude * p.harmonic2_ratio;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double arg = w0 * static_cast<double>(i) + phase;
    x[i] += p.base_amplitude * std::sin(arg);
    if (a2 != 0.0) x[i] += a2 * std::sin(2.0 * arg);
  }
}

void add_noise(std::vector<double>& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (double& v : x) v += sigma * rng.normal();
}

// Random-phase multisine with frequencies drawn uniformly inside the band;
// unit rms, approximately Gaussian by the CLT.
constexpr std::size_t kBurstComponents = 64;

void add_bursts(std::vector<double>& x, const RegimeParams& p, Rng& rng) {
  const double rate = rng.uniform(p.burst_rate_min_hz, p.burst_rate_max_hz);
  const auto count = static_cast<std::size_t>(std::lround(rate * p.duration_s));
  const double comp_amp = std::sqrt(2.0 / static_cast<double>(kBurstComponents));
  std::array<double, kBurstComponents> freq{};
  std::array<double, kBurstComponents> phase{};

  for (std::size_t b = 0; b < count; ++b) {
    // Onsets may precede the phase so its first samples are covered as often
    // as the rest.
    const double len_s = rng.uniform(p.burst_min_s, p.burst_max_s);
    const double onset_s = rng.uniform(-len_s, p.duration_s);
    const double amp = p.burst_amplitude * std::exp(p.burst_spread * rng.normal());
    for (std::size_t k = 0; k < kBurstComponents; ++k) {
      freq[k] = rng.uniform(p.burst_band.low_hz, p.burst_band.high_hz);
      phase[k] = rng.uniform(0.0, kTwoPi);
    }
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(onset_s * p.sample_rate)));
    const auto last = std::min(
        x.size(), static_cast<std::size_t>(std::ceil((onset_s + len_s) * p.sample_rate)));
    for (std::size_t i = first; i < last; ++i) {
      const double t = static_cast<double>(i) / p.sample_rate;
      const double env = 0.5 * (1.0 - std::cos(kTwoPi * (t - onset_s) / len_s));
      double s = 0.0;
      for (std::size_t k = 0; k < kBurstComponents; ++k) {
        s += std::sin(kTwoPi * freq[k] * t + phase[k]);
      }
      x[i] += amp * env * comp_amp * s;
    }
  }
}

void apply_modulation(std::vector<double>& x, const RegimeParams& p, double phase) {
  const double wm = kTwoPi * p.sideband_mod_hz / p.sample_rate;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / p.sample_rate;
    const double depth = std::min(1.0, p.modulation_depth * std::exp(p.instability_lambda * t));
    x[i] *= 1.0 + depth * std::cos(wm * static_cast<double>(i) + phase);
  }
}

}  // namespace

std::string_view regime_name(Regime regime) {
  switch (regime) {
    case Regime::Transient: return "Transient";
    case Regime::Stable: return "Stable";
    case Regime::Extinction: return "Extinction";
  }
  return "Unknown";
}

Regime parse_regime(std::string_view name) {
  const std::string key = lower(name);
  if (key == "transient") return Regime::Transient;
  if (key == "stable") return Regime::Stable;
  if (key == "extinction" || key == "instable") return Regime::Extinction;
  throw InvalidArgument("unknown regime label '" + std::string(name) + "'");
}

void RegimeParams::validate() const {
  require(std::isfinite(sample_rate) && sample_rate > 0.0, "sample_rate must be > 0");
  require(std::isfinite(duration_s) && duration_s > 0.0, "duration_s must be > 0");
  require(finite_nonneg(base_amplitude), "base_amplitude must be finite and >= 0");
  require(finite_nonneg(harmonic2_ratio), "harmonic2_ratio must be finite and >= 0");
  require(finite_nonneg(noise_sigma), "noise_sigma must be finite and >= 0");
  require(finite_nonneg(burst_amplitude), "burst_amplitude must be finite and >= 0");
  require(finite_nonneg(burst_spread), "burst_spread must be finite and >= 0");
  const double nyquist = 0.5 * sample_rate;
  require(std::isfinite(fundamental_hz) && fundamental_hz > 0.0 && fundamental_hz < nyquist,
          "fundamental_hz must lie in (0, Nyquist)");
  require(harmonic2_ratio == 0.0 || 2.0 * fundamental_hz < nyquist,
          "second harmonic lies above Nyquist");
  require(std::isfinite(burst_band.low_hz) && std::isfinite(burst_band.high_hz) &&
              burst_band.low_hz >= 0.0 && burst_band.low_hz < burst_band.high_hz,
          "burst_band must satisfy 0 <= low < high");
  require(burst_band.high_hz <= nyquist, "burst_band lies above Nyquist");
  require(finite_nonneg(burst_rate_min_hz) && std::isfinite(burst_rate_max_hz) &&
              burst_rate_min_hz <= burst_rate_max_hz,
          "burst rates must satisfy 0 <= min <= max");
  require(std::isfinite(burst_min_s) && std::isfinite(burst_max_s) && burst_min_s > 0.0 &&
              burst_min_s <= burst_max_s,
          "burst durations must satisfy 0 < min <= max");
  require(finite_nonneg(sideband_mod_hz) && sideband_mod_hz < nyquist,
          "sideband_mod_hz must lie in [0, Nyquist)");
  require(std::isfinite(modulation_depth) && modulation_depth >= 0.0 && modulation_depth <= 1.0,
          "modulation_depth must lie in [0, 1]");
  require(std::isfinite(instability_lambda), "instability_lambda must be finite");
  require(std::isfinite(clip_abs_a) && clip_abs_a > 0.0, "clip_abs_a must be > 0");
}

void SignalTrace::validate(std::optional<std::size_t> window_count) const {
  if (!(std::isfinite(sample_rate) && sample_rate > 0.0)) {
    throw InvalidArgument("trace: sample_rate must be > 0");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw InvalidArgument("trace: non-finite sample at index " + std::to_string(i));
    }
  }
  if (window_count) {
    for (const auto& l : labels) {
      if (l.window_index >= *window_count) {
        throw InvalidArgument("trace: label window_index " + std::to_string(l.window_index) +
                              " out of range");
      }
    }
  }
  for (const auto& s : spans) {
    if (s.start + s.length > samples.size()) {
      throw InvalidArgument("trace: regime span exceeds sample count");
    }
  }
}

std::size_t frame_count(std::size_t n, std::size_t window_len, std::size_t hop) {
  if (window_len == 0 || hop == 0 || n < window_len) return 0;
  return (n - window_len) / hop + 1;
}

std::optional<Regime> majority_regime(std::span<const RegimeSpan> spans, std::size_t start,
                                      std::size_t length) {
  std::array<std::size_t, kRegimeCount> owned{};
  const std::size_t end = start + length;
  for (const auto& s : spans) {
    const std::size_t lo = std::max(start, s.start);
    const std::size_t hi = std::min(end, s.start + s.length);
    if (hi > lo) owned[regime_index(s.regime)] += hi - lo;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kRegimeCount; ++c) {
    if (owned[c] > owned[best]) best = c;
  }
  if (owned[best] == 0) return std::nullopt;
  return kRegimes[best];
}

std::vector<Frame> segment(const SignalTrace& trace, std::size_t window_len, std::size_t hop) {
  if (window_len == 0) throw InvalidArgument("segment: window_len must be >= 1");
  if (hop == 0) throw InvalidArgument("segment: hop must be >= 1");
  if (window_len > trace.samples.size()) {
    throw EmptyInput("empty input: trace shorter than one window (" +
                     std::to_string(trace.samples.size()) + " < " +
                     std::to_string(window_len) + " samples)");
  }
  const std::size_t count = frame_count(trace.samples.size(), window_len, hop);
  trace.validate(count);

  std::map<std::size_t, Regime> explicit_labels;
  for (const auto& l : trace.labels) explicit_labels[l.window_index] = l.label;

  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Frame f;
    f.index = i;
    f.start_index = i * hop;
    const auto first = trace.samples.begin() + static_cast<std::ptrdiff_t>(f.start_index);
    f.samples.assign(first, first + static_cast<std::ptrdiff_t>(window_len));
    if (auto it = explicit_labels.find(i); it != explicit_labels.end()) {
      f.label = it->second;
    } else if (!trace.spans.empty()) {
      f.label = majority_regime(trace.spans, f.start_index, window_len);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

SignalTrace generate_phase(Regime regime, const RegimeParams& params) {
  params.validate();
  Rng rng(params.seed);
  const auto n = static_cast<std::size_t>(std::llround(params.duration_s * params.sample_rate));

  SignalTrace trace;
  trace.sample_rate = params.sample_rate;
  trace.samples.assign(n, 0.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  add_tone(trace.samples, params, phase);

  switch (regime) {
    case Regime::Stable:
      add_noise(trace.samples, params.noise_sigma, rng);
      break;
    case Regime::Transient:
      add_noise(trace.samples, params.noise_sigma, rng);
      add_bursts(trace.samples, params, rng);
      break;
    case Regime::Extinction: {
      const double mod_phase = rng.uniform(0.0, kTwoPi);
      apply_modulation(trace.samples, params, mod_phase);
      add_noise(trace.samples, params.noise_sigma, rng);
      break;
    }
  }

  if (params.clip) {
    for (double& v : trace.samples) v = std::clamp(v, -params.clip_abs_a, params.clip_abs_a);
  }
  trace.spans.push_back(RegimeSpan{0, n, regime});
  return trace;
}

RegimeParams default_params(Regime regime) {
  RegimeParams p;
  switch (regime) {
    case Regime::Stable:
      break;
    case Regime::Transient:
      p.noise_sigma = 5.0;
      break;
    case Regime::Extinction:
      p.noise_sigma = 12.0;
      p.modulation_depth = 0.3;
      break;
  }
  return p;
}

SignalTrace synthesize_dataset(const DatasetRecipe& recipe) {
  const auto& seg = recipe.segmentation;
  if (recipe.windows_per_phase == 0) {
    throw InvalidArgument("dataset: windows_per_phase must be >= 1");
  }
  const double fs = recipe.phases[0].sample_rate;

  SignalTrace out;
  out.sample_rate = fs;
  for (Regime regime : kRegimes) {
    RegimeParams p = recipe.phases[regime_index(regime)];
    if (p.sample_rate != fs) {
      throw InvalidArgument("dataset: all phases must share one sample_rate");
    }
    p.seed = derive_seed(recipe.seed, regime_index(regime));
    SignalTrace phase = generate_phase(regime, p);

    const std::size_t start = out.samples.size();
    const std::size_t len = phase.samples.size();
    out.samples.insert(out.samples.end(), phase.samples.begin(), phase.samples.end());
    out.spans.push_back(RegimeSpan{start, len, regime});

    // Windows lying entirely inside this phase.
    const std::size_t first = (start + seg.hop - 1) / seg.hop;
    if (len < seg.window_len || (start + len - seg.window_len) / seg.hop < first) {
      throw InvalidArgument("dataset: phase too short for one window");
    }
    const std::size_t last = (start + len - seg.window_len) / seg.hop;
    const std::size_t available = last - first + 1;
    const std::size_t k = recipe.windows_per_phase;
    if (available < k) {
      throw InvalidArgument("dataset: phase '" + std::string(regime_name(regime)) +
                            "' holds only " + std::to_string(available) + " windows, need " +
                            std::to_string(k));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t offset =
          k == 1 ? 0
                 : static_cast<std::size_t>(std::llround(static_cast<double>(j) *
                                                         static_cast<double>(available - 1) /
                                                         static_cast<double>(k - 1)));
      out.labels.push_back(WindowLabel{first + offset, regime});
    }
  }
  return out;
}

}  // namespace arcstab
