#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "arcstab/errors.hpp"
#include "arcstab/features.hpp"
#include "arcstab/signal.hpp"
#include "arcstab/tfr.hpp"
#include "arcstab/trace_io.hpp"
#include "oracles.hpp"

using namespace arcstab;
namespace fs = std::filesystem;

namespace {

RegimeParams quiet(double h2 = 0.0) {
  RegimeParams p;
  p.harmonic2_ratio = h2;
  p.noise_sigma = 0.0;
  p.seed = 7;
  return p;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "arcstab_test_signal";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("pure stable tone has rms A/sqrt2") {
  const auto t = generate_phase(Regime::Stable, quiet());
  REQUIRE(t.samples.size() == 10000);
  double s = 0.0;
  for (double v : t.samples) s += v * v;
  CHECK(std::sqrt(s / t.samples.size()) == doctest::Approx(100.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("second harmonic ratio appears as a quarter of the band power") {
  // A long window keeps the 50 and 100 Hz main lobes apart.
  const auto t = generate_phase(Regime::Stable, quiet(0.5));
  const std::span<const double> frame(t.samples.data(), 2000);
  const auto p = oracle::dft_psd(frame, 16384, t.sample_rate);
  const double df = t.sample_rate / 16384.0;
  const double ratio = oracle::band_sum(p, df, 95, 105) / oracle::band_sum(p, df, 45, 55);
  CHECK(ratio == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("noise-free stable trace concentrates power at the harmonics") {
  const auto t = generate_phase(Regime::Stable, quiet(0.1));
  const PsdEngine engine(t.samples.size(), 16384, t.sample_rate);
  const auto psd = engine.compute(t.samples);
  double harmonic = 0.0;
  for (int n = 1; n * 50 < 5000; ++n) harmonic += band_energy(psd, 50.0 * n - 5, 50.0 * n + 5);
  CHECK(harmonic / psd.total_power() >= 0.95);
}

TEST_CASE("extinction ASI grows over the phase") {
  RegimeParams p = default_params(Regime::Extinction);
  p.instability_lambda = 2.0;
  p.duration_s = 2.0;
  p.seed = 11;
  const auto t = generate_phase(Regime::Extinction, p);

  const auto d = FeaturePipeline({}, t.sample_rate).descriptors(t);
  CHECK(d.asi.back() > d.asi.front());

  // The 5 Hz sidebands are only resolved by a window several modulation
  // periods long; there the quarter means rise monotonically.
  PipelineConfig wide;
  wide.segmentation = {2000, 200};
  wide.nfft = 16384;
  const auto w = FeaturePipeline(wide, t.sample_rate).descriptors(t);
  const std::size_t q = w.asi.size() / 4;
  REQUIRE(q >= 5);
  std::vector<double> means;
  for (std::size_t b = 0; b < 4; ++b) {
    double s = 0.0;
    for (std::size_t i = b * q; i < (b + 1) * q; ++i) s += w.asi[i];
    means.push_back(s / static_cast<double>(q));
  }
  CHECK(std::ranges::is_sorted(means));
  CHECK(means.back() > means.front());
}

TEST_CASE("generation is deterministic in the seed") {
  for (auto r : kRegimes) {
    RegimeParams p = default_params(r);
    p.seed = 99;
    const auto a = generate_phase(r, p);
    const auto b = generate_phase(r, p);
    CHECK(a.samples == b.samples);
    p.seed = 100;
    CHECK(generate_phase(r, p).samples != a.samples);
  }
}

TEST_CASE("parameter validation") {
  RegimeParams p;
  p.burst_band = {100.0, 6000.0};
  CHECK_THROWS_AS(generate_phase(Regime::Transient, p), InvalidArgument);
  p = {};
  p.noise_sigma = std::nan("");
  CHECK_THROWS_AS(generate_phase(Regime::Stable, p), InvalidArgument);
  p = {};
  p.duration_s = 0.0;
  CHECK_THROWS_AS(generate_phase(Regime::Stable, p), InvalidArgument);
}

TEST_CASE("clipping bounds every sample") {
  RegimeParams p = default_params(Regime::Transient);
  p.burst_amplitude = 2000.0;
  p.clip = true;
  p.clip_abs_a = 500.0;
  p.seed = 5;
  const auto t = generate_phase(Regime::Transient, p);
  const double peak = std::ranges::max(t.samples, {}, [](double v) { return std::abs(v); });
  CHECK(std::abs(peak) <= 500.0);
}

TEST_CASE("frame count matches the closed form and enumeration") {
  CHECK(frame_count(200, 200, 16) == 1);
  CHECK(frame_count(1000, 200, 16) == 51);
  for (std::size_t n = 1; n < 400; n += 7) {
    for (std::size_t len : {1u, 3u, 50u, 200u}) {
      for (std::size_t hop : {1u, 5u, 16u}) {
        std::size_t enumerated = 0;
        for (std::size_t s = 0; s + len <= n; s += hop) ++enumerated;
        CHECK(frame_count(n, len, hop) == enumerated);
      }
    }
  }
}

TEST_CASE("segment slices and labels frames") {
  SignalTrace t;
  t.samples.resize(1000);
  for (std::size_t i = 0; i < t.samples.size(); ++i) t.samples[i] = static_cast<double>(i);
  t.spans = {{0, 500, Regime::Transient}, {500, 500, Regime::Stable}};
  const auto frames = segment(t, 200, 16);
  REQUIRE(frames.size() == 51);
  for (const auto& f : frames) {
    CHECK(f.samples.size() == 200);
    CHECK(f.samples.front() == static_cast<double>(f.start_index));
    CHECK(f.start_index == f.index * 16);
    const std::size_t in_first = f.start_index >= 500 ? 0 : std::min<std::size_t>(500 - f.start_index, 200);
    CHECK(f.label == (in_first >= 100 ? Regime::Transient : Regime::Stable));
  }
  t.samples.resize(199);
  t.spans.clear();
  CHECK_THROWS_AS(segment(t, 200, 16), EmptyInput);
}

TEST_CASE("regime names") {
  CHECK(parse_regime("stable") == Regime::Stable);
  CHECK(parse_regime("Instable") == Regime::Extinction);
  CHECK(regime_name(Regime::Transient) == "Transient");
  CHECK_THROWS_AS(parse_regime("arc"), InvalidArgument);
}

TEST_CASE("default dataset has 49 labeled windows per regime") {
  const auto t = synthesize_dataset({});
  REQUIRE(t.labels.size() == 147);
  std::array<int, 3> counts{};
  for (const auto& l : t.labels) ++counts[regime_index(l.label)];
  CHECK(counts == std::array<int, 3>{49, 49, 49});
  const auto frames = segment(t, 200, 16);
  for (const auto& l : t.labels) CHECK(frames.at(l.window_index).label == l.label);
  CHECK(synthesize_dataset({}).samples == t.samples);
}

TEST_CASE("CSV traces round-trip bitwise") {
  RegimeParams p = default_params(Regime::Transient);
  p.seed = 3;
  const auto t = generate_phase(Regime::Transient, p);
  const auto path = scratch("trace.csv");
  write_trace_csv(path, t, "note");
  const auto back = load_trace(path, TraceFormat::Csv);
  CHECK(back.sample_rate == t.sample_rate);
  CHECK(back.samples == t.samples);
}

TEST_CASE("CSV contract errors") {
  const auto single = scratch("single.csv");
  write_text(single, "1.0\n2.0\n3.0\n");
  CHECK_THROWS_WITH_AS(load_trace(single, TraceFormat::Csv), doctest::Contains("sample rate required"),
                       FormatError);
  CHECK(load_trace(single, TraceFormat::Csv, {.sample_rate = 100.0}).samples.size() == 3);

  const auto bad = scratch("bad.csv");
  write_text(bad, "time_s,current_a\n0,1\n0.0001,abc\n");
  try {
    load_trace(bad, TraceFormat::Csv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  const auto jitter = scratch("jitter.csv");
  write_text(jitter, "time_s,current_a\n0,1\n0.0001,2\n0.00021,3\n");
  CHECK_THROWS_AS(load_trace(jitter, TraceFormat::Csv), FormatError);
}

TEST_CASE("two-column CSV infers the sample rate") {
  const auto path = scratch("rate.csv");
  std::ofstream out(path);
  out << "time_s,current_a\n";
  for (int i = 0; i < 10000; ++i) out << format_double(i / 10000.0) << "," << i % 7 << "\n";
  out.close();
  const auto t = load_trace(path, TraceFormat::Csv);
  CHECK(t.samples.size() == 10000);
  CHECK(t.sample_rate == doctest::Approx(10000.0).epsilon(1e-9));
}

TEST_CASE("WAV round trips") {
  SignalTrace t;
  t.sample_rate = 8000.0;
  for (int i = 0; i < 64; ++i) t.samples.push_back((i - 32) * 0.25);
  const auto f32 = scratch("f32.wav");
  write_wav(f32, t, WavEncoding::Float32);
  const auto a = load_trace(f32, TraceFormat::Wav);
  CHECK(a.sample_rate == 8000.0);
  CHECK(a.samples == t.samples);

  const auto pcm = scratch("pcm.wav");
  write_wav(pcm, t, WavEncoding::Pcm16, 10.0);
  const auto b = load_trace(pcm, TraceFormat::Wav, {.wav_scale = 10.0});
  REQUIRE(b.samples.size() == t.samples.size());
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    CHECK(std::abs(b.samples[i] - t.samples[i]) <= 10.0 / 32768.0);
  }
}

TEST_CASE("labels CSV round trip") {
  const std::vector<WindowLabel> labels{{0, Regime::Transient}, {5, Regime::Extinction}};
  const auto path = scratch("labels.csv");
  write_labels_csv(path, labels);
  const auto back = read_labels_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].window_index == 5);
  CHECK(back[1].label == Regime::Extinction);
}
