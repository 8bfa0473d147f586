#include "arcstab/trace_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include "arcstab/errors.hpp"

namespace arcstab {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  return out;
}

bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  const char c = s.front();
  return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
}

double snap_rate(double fs) {
  const double r = std::round(fs);
  return std::abs(fs - r) <= 1e-6 * fs ? r : fs;
}

SignalTrace load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  auto in = open_in(path);
  std::vector<double> times;
  std::vector<double> values;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split_commas(text);
    if (!seen_content) {
      seen_content = true;
      if (!looks_numeric(fields.front())) {
        if (fields.size() == 2 && fields[0] == "time_s" && fields[1] == "current_a") {
          columns = 2;
        } else if (fields.size() == 1 && fields[0] == "current_a") {
          columns = 1;
        } else {
          throw ParseError("unrecognized CSV header '" + std::string(text) + "'", line_no);
        }
        continue;
      }
      columns = fields.size();
      if (columns != 1 && columns != 2) {
        throw ParseError("expected 1 or 2 columns, got " + std::to_string(columns), line_no);
      }
    }
    if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " columns, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (columns == 2) {
      times.push_back(parse_double(fields[0], line_no));
      values.push_back(parse_double(fields[1], line_no));
    } else {
      values.push_back(parse_double(fields[0], line_no));
    }
  }

  SignalTrace trace;
  trace.samples = std::move(values);
  if (columns == 2 && times.size() >= 2) {
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw FormatError("timestamps must increase");
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double step = times[i] - times[i - 1];
      if (std::abs(step - dt) > 1e-6 * dt) {
        throw FormatError("non-uniform timestamps near row " + std::to_string(i + 1) +
                          " (step " + format_double(step) + " s vs mean " + format_double(dt) +
                          " s)");
      }
    }
    trace.sample_rate = snap_rate(1.0 / dt);
    if (options.sample_rate && std::abs(*options.sample_rate - trace.sample_rate) >
                                   1e-6 * trace.sample_rate) {
      throw FormatError("sample rate flag disagrees with CSV timestamps");
    }
  } else if (options.sample_rate) {
    trace.sample_rate = *options.sample_rate;
  } else {
    throw FormatError("sample rate required for single-column CSV");
  }
  trace.validate();
  return trace;
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

SignalTrace load_wav(const std::filesystem::path& path, const LoadOptions& options) {
  auto in = open_in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("truncated WAV chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("WAV fmt chunk too small");
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      if (format == 0xFFFE) {
        if (size < 26) throw FormatError("WAV extensible fmt chunk too small");
        format = read_u16(data + body + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = data + body;
      payload_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (payload == nullptr || rate == 0) throw FormatError("WAV missing fmt or data chunk");
  if (channels != 1) throw FormatError("WAV must be mono, got " + std::to_string(channels) + " channels");

  SignalTrace trace;
  trace.sample_rate = static_cast<double>(rate);
  if (format == 1 && bits == 16) {
    trace.samples.resize(payload_size / 2);
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(payload + 2 * i));
      trace.samples[i] = options.wav_scale * static_cast<double>(v) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    trace.samples.resize(payload_size / 4);
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      const std::uint32_t raw = read_u32(payload + 4 * i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      trace.samples[i] = options.wav_scale * static_cast<double>(f);
    }
  } else {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits); need PCM16 or float32");
  }
  trace.validate();
  return trace;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, std::size_t line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("malformed number '" + std::string(text) + "'", line);
  }
  if (!std::isfinite(value)) throw ParseError("non-finite value", line);
  return value;
}

TraceFormat parse_trace_format(const std::string& name) {
  if (name == "csv") return TraceFormat::Csv;
  if (name == "wav") return TraceFormat::Wav;
  throw InvalidArgument("unknown trace format '" + name + "' (expected csv or wav)");
}

TraceFormat trace_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".wav" ? TraceFormat::Wav : TraceFormat::Csv;
}

SignalTrace load_trace(const std::filesystem::path& path, TraceFormat format,
                       const LoadOptions& options) {
  return format == TraceFormat::Wav ? load_wav(path, options) : load_csv(path, options);
}

void write_trace_csv(const std::filesystem::path& path, const SignalTrace& trace,
                     const std::string& comment) {
  std::string out;
  out.reserve(trace.samples.size() * 28 + 64);
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "time_s,current_a\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    out += format_double(static_cast<double>(i) / trace.sample_rate);
    out += ',';
    out += format_double(trace.samples[i]);
    out += '\n';
  }
  auto f = open_out(path, std::ios::binary);
  f << out;
}

void write_wav(const std::filesystem::path& path, const SignalTrace& trace, WavEncoding encoding,
               double scale) {
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t fmt = encoding == WavEncoding::Pcm16 ? 1 : 3;
  const auto rate = static_cast<std::uint32_t>(std::lround(trace.sample_rate));
  const std::uint32_t bytes_per_sample = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(trace.samples.size() * bytes_per_sample);

  std::string out;
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, fmt);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(bytes_per_sample));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);
  for (double v : trace.samples) {
    const double s = v / scale;
    if (encoding == WavEncoding::Pcm16) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const auto f = static_cast<float>(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      put_u32(out, raw);
    }
  }
  auto f = open_out(path, std::ios::binary);
  f << out;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<WindowLabel>& labels,
                      const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "window_index,label\n";
  for (const auto& l : labels) out << l.window_index << ',' << regime_name(l.label) << '\n';
  auto f = open_out(path, std::ios::binary);
  f << out.str();
}

std::vector<WindowLabel> read_labels_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<WindowLabel> labels;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split_commas(text);
    if (!header) {
      if (fields.size() != 2 || fields[0] != "window_index" || fields[1] != "label") {
        throw ParseError("expected header 'window_index,label'", line_no);
      }
      header = true;
      continue;
    }
    if (fields.size() != 2) throw ParseError("expected 2 columns", line_no);
    std::size_t index = 0;
    const auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size()) {
      throw ParseError("malformed window index '" + std::string(fields[0]) + "'", line_no);
    }
    try {
      labels.push_back(WindowLabel{index, parse_regime(fields[1])});
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return labels;
}

}  // namespace arcstab
