#include "arcstab/tfr.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>
#include <json.hpp>
#include <string>

#include "arcstab/errors.hpp"
#include "arcstab/trace_io.hpp"

namespace arcstab {

namespace {

// The FFTW planner is not re-entrant; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr double kBinSlack = 1e-9;

}  // namespace

struct PsdEngine::Plan {
  fftw_plan handle = nullptr;

  explicit Plan(std::size_t nfft) {
    std::vector<double> in(nfft);
    std::vector<std::complex<double>> out(nfft / 2 + 1);
    std::lock_guard lock(planner_mutex());
    handle = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.data(),
                                  reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (handle == nullptr) throw Error("fft_error", "FFTW planning failed");
  }

  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(handle);
  }

  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
};

WindowWeights hann_window(std::size_t length) {
  if (length < 2) throw InvalidArgument("hann_window: length must be >= 2");
  WindowWeights w;
  w.weights.resize(length);
  const double denom = static_cast<double>(length - 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    // Evaluate on the folded index so w[n] == w[L-1-n] bit for bit.
    const std::size_t m = std::min(n, length - 1 - n);
    const double v = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / denom));
    w.weights[n] = v;
    sum += v;
    sum_sq += v * v;
  }
  w.coherent_gain = sum / static_cast<double>(length);
  w.energy_gain = sum_sq / static_cast<double>(length);
  return w;
}

double PsdFrame::total_power() const {
  double s = 0.0;
  for (double p : power) s += p;
  return s * bin_hz;
}

PsdEngine::PsdEngine(std::size_t window_len, std::size_t nfft, double sample_rate)
    : window_(hann_window(window_len)), nfft_(nfft), sample_rate_(sample_rate) {
  if (!is_power_of_two(nfft)) throw InvalidArgument("psd: nfft must be a power of two");
  if (nfft < window_len) throw InvalidArgument("psd: nfft must be >= window length");
  if (!(std::isfinite(sample_rate) && sample_rate > 0.0)) {
    throw InvalidArgument("psd: sample_rate must be > 0");
  }
  plan_ = std::make_unique<Plan>(nfft);
}

PsdEngine::~PsdEngine() = default;
PsdEngine::PsdEngine(PsdEngine&&) noexcept = default;
PsdEngine& PsdEngine::operator=(PsdEngine&&) noexcept = default;

PsdFrame PsdEngine::compute(std::span<const double> frame, double frame_time_s) const {
  const std::size_t len = window_.size();
  if (frame.size() != len) {
    throw InvalidArgument("psd: frame length " + std::to_string(frame.size()) +
                          " does not match window length " + std::to_string(len));
  }
  std::vector<double> in(nfft_, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    if (!std::isfinite(frame[i])) throw InvalidArgument("psd: non-finite sample in frame");
    in[i] = frame[i] * window_.weights[i];
  }
  std::vector<std::complex<double>> spectrum(nfft_ / 2 + 1);
  fftw_execute_dft_r2c(plan_->handle, in.data(),
                       reinterpret_cast<fftw_complex*>(spectrum.data()));

  PsdFrame psd;
  psd.bin_hz = bin_hz();
  psd.frame_time_s = frame_time_s;
  psd.power.resize(spectrum.size());
  const double scale = 1.0 / (sample_rate_ * window_.sum_squares());
  const std::size_t last = spectrum.size() - 1;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double p = std::norm(spectrum[k]) * scale;
    psd.power[k] = (k == 0 || k == last) ? p : 2.0 * p;
  }
  return psd;
}

PsdFrame psd_frame(std::span<const double> frame, const WindowWeights& window, std::size_t nfft,
                   double sample_rate, double frame_time_s) {
  if (frame.size() != window.size()) {
    throw InvalidArgument("psd: window does not match frame length");
  }
  PsdEngine engine(window.size(), nfft, sample_rate);
  return engine.compute(frame, frame_time_s);
}

double windowed_mean_power(std::span<const double> frame, const WindowWeights& window) {
  double s = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double v = frame[i] * window.weights[i];
    s += v * v;
  }
  return s / window.sum_squares();
}

double band_energy(const PsdFrame& psd, double f1, double f2) {
  const double nyquist = psd.nyquist_hz();
  if (!(std::isfinite(f1) && std::isfinite(f2)) || f1 < 0.0 || f2 > nyquist * (1.0 + kBinSlack)) {
    throw InvalidArgument("band_energy: band must lie within [0, Nyquist]");
  }
  if (!(f1 < f2)) throw InvalidArgument("band_energy: inverted band (f1 >= f2)");
  double s = 0.0;
  for (std::size_t k = 0; k < psd.bins(); ++k) {
    const double f = psd.frequency(k);
    if (f >= f1 && f <= f2) s += psd.power[k];
  }
  return s * psd.bin_hz;
}

PeakPower peak_power_at(const PsdFrame& psd, double f0) {
  if (!std::isfinite(f0) || f0 < 0.0 || f0 > psd.nyquist_hz() * (1.0 + kBinSlack)) {
    throw InvalidArgument("peak_power_at: frequency outside [0, Nyquist]");
  }
  const double reach = psd.bin_hz * (1.0 + kBinSlack);
  const auto centre = static_cast<std::size_t>(std::lround(f0 / psd.bin_hz));
  const std::size_t lo = centre == 0 ? 0 : centre - 1;
  const std::size_t hi = std::min(psd.bins() - 1, centre + 1);
  PeakPower best{-1.0, centre};
  for (std::size_t k = lo; k <= hi; ++k) {
    if (std::abs(psd.frequency(k) - f0) > reach) continue;
    if (psd.power[k] > best.power) best = PeakPower{psd.power[k], k};
  }
  if (best.power < 0.0) best.power = 0.0;
  return best;
}

void write_spectrogram(const std::filesystem::path& csv_path, const std::vector<PsdFrame>& frames,
                       double hop_s, std::size_t nfft) {
  std::string out;
  for (const auto& f : frames) {
    for (std::size_t k = 0; k < f.bins(); ++k) {
      if (k) out += ',';
      out += format_double(f.power[k]);
    }
    out += '\n';
  }
  {
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw FormatError("cannot write '" + csv_path.string() + "'");
    csv << out;
  }
  nlohmann::json meta;
  meta["bin_hz"] = frames.empty() ? 0.0 : frames.front().bin_hz;
  meta["hop_s"] = hop_s;
  meta["nfft"] = nfft;
  meta["bins"] = frames.empty() ? 0 : frames.front().bins();
  std::vector<double> times;
  for (const auto& f : frames) times.push_back(f.frame_time_s);
  meta["frame_time_s"] = times;
  auto sidecar = csv_path;
  sidecar += ".json";
  std::ofstream js(sidecar, std::ios::trunc);
  if (!js) throw FormatError("cannot write '" + sidecar.string() + "'");
  js << meta.dump(2) << '\n';
}

}  // namespace arcstab
