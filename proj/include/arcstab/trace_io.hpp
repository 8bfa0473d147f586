#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arcstab/signal.hpp"

namespace arcstab {

enum class TraceFormat { Csv, Wav };

TraceFormat parse_trace_format(const std::string& name);

/// Guess from the file extension (".wav" -> Wav, anything else -> Csv).
TraceFormat trace_format_for(const std::filesystem::path& path);

struct LoadOptions {
  // Required for single-column CSV; ignored for WAV and two-column CSV.
  std::optional<double> sample_rate;
  // Amperes per unit full scale for WAV samples (PCM16 is mapped to [-1, 1)).
  double wav_scale = 1.0;
};

/// CSV: `time_s,current_a` (header optional) or a single current column.
/// Timestamps must be uniform to 1 ppm. Lines starting with '#' are skipped.
SignalTrace load_trace(const std::filesystem::path& path, TraceFormat format,
                       const LoadOptions& options = {});

/// Writes `time_s,current_a` with shortest round-trip decimals so a reload
/// is bitwise equal.
void write_trace_csv(const std::filesystem::path& path, const SignalTrace& trace,
                     const std::string& comment = {});

enum class WavEncoding { Pcm16, Float32 };

void write_wav(const std::filesystem::path& path, const SignalTrace& trace,
               WavEncoding encoding, double scale = 1.0);

/// `window_index,label` rows.
void write_labels_csv(const std::filesystem::path& path, const std::vector<WindowLabel>& labels,
                      const std::string& comment = {});
std::vector<WindowLabel> read_labels_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-token parse; throws ParseError with `line` on failure.
double parse_double(std::string_view text, std::size_t line);

}  // namespace arcstab
