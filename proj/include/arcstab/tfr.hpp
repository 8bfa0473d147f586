#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "arcstab/signal.hpp"

namespace arcstab {

struct WindowWeights {
  std::vector<double> weights;
  double coherent_gain = 0.0;  // mean weight
  double energy_gain = 0.0;    // mean squared weight

  std::size_t size() const { return weights.size(); }
  double sum_squares() const { return energy_gain * static_cast<double>(weights.size()); }
};

/// Symmetric Hann: w[n] = 0.5 * (1 - cos(2 pi n / (L - 1))).
WindowWeights hann_window(std::size_t length);

/// One-sided PSD of a single window in A^2/Hz.
struct PsdFrame {
  std::vector<double> power;  // nfft / 2 + 1 bins
  double bin_hz = 0.0;        // sample_rate / nfft
  double frame_time_s = 0.0;  // window-centre time

  std::size_t bins() const { return power.size(); }
  double frequency(std::size_t bin) const { return static_cast<double>(bin) * bin_hz; }
  double nyquist_hz() const { return frequency(power.empty() ? 0 : power.size() - 1); }
  /// Sum of power * bin_hz over all bins.
  double total_power() const;
};

struct PeakPower {
  double power = 0.0;
  std::size_t bin = 0;
};

/// Hann-windowed, zero-padded FFT power spectrum with Welch normalization:
/// sum(P) * df equals sum((w x)^2) / sum(w^2).
///
/// Construction builds the FFT plan; compute() is const and may be called
/// concurrently from several threads.
class PsdEngine {
 public:
  PsdEngine(std::size_t window_len, std::size_t nfft, double sample_rate);
  ~PsdEngine();
  PsdEngine(const PsdEngine&) = delete;
  PsdEngine& operator=(const PsdEngine&) = delete;
  PsdEngine(PsdEngine&&) noexcept;
  PsdEngine& operator=(PsdEngine&&) noexcept;

  PsdFrame compute(std::span<const double> frame, double frame_time_s = 0.0) const;

  const WindowWeights& window() const { return window_; }
  std::size_t nfft() const { return nfft_; }
  double sample_rate() const { return sample_rate_; }
  double bin_hz() const { return sample_rate_ / static_cast<double>(nfft_); }

 private:
  struct Plan;
  WindowWeights window_;
  std::size_t nfft_;
  double sample_rate_;
  std::unique_ptr<Plan> plan_;
};

/// Convenience wrapper; `window` must match the frame length.
PsdFrame psd_frame(std::span<const double> frame, const WindowWeights& window, std::size_t nfft,
                   double sample_rate, double frame_time_s = 0.0);

/// sum(w x)^2 / sum(w^2): the quantity the PSD integrates to.
double windowed_mean_power(std::span<const double> frame, const WindowWeights& window);

/// Sum of P * df over bins whose centre lies in [f1, f2].
double band_energy(const PsdFrame& psd, double f1, double f2);

/// Largest bin within f0 +/- df. Ties go to the lower bin.
PeakPower peak_power_at(const PsdFrame& psd, double f0);

/// Spectrogram matrix (rows = frames, columns = bins) plus a JSON sidecar with
/// bin_hz, hop_s, nfft and frame times.
void write_spectrogram(const std::filesystem::path& csv_path, const std::vector<PsdFrame>& frames,
                       double hop_s, std::size_t nfft);

}  // namespace arcstab
