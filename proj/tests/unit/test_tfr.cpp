#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "arcstab/errors.hpp"
#include "arcstab/rng.hpp"
#include "arcstab/tfr.hpp"
#include "oracles.hpp"

using namespace arcstab;

namespace {

constexpr double kFs = 10000.0;

std::vector<double> tone(std::size_t n, double hz, double amp = 1.0, double phase = 0.0,
                         std::size_t offset = 0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i + offset) / kFs + phase);
  }
  return x;
}

std::vector<double> noise(Rng& rng, std::size_t n, double sigma = 1.0) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal(0.0, sigma);
  return x;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("hann window") {
  const auto w3 = hann_window(3);
  CHECK(w3.weights[0] == 0.0);
  CHECK(w3.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w3.weights[2] == doctest::Approx(0.0).epsilon(1e-15));

  const auto w = hann_window(200);
  for (std::size_t i = 0; i < 200; ++i) CHECK(w.weights[i] == doctest::Approx(w.weights[199 - i]).epsilon(1e-15));
  CHECK(w.weights[99] == w.weights[100]);
  CHECK(*std::ranges::max_element(w.weights) <= 1.0);
  CHECK(w.weights[99] > 0.9999);

  double s2 = 0.0, s1 = 0.0;
  for (double v : oracle::hann(200)) {
    s2 += v * v;
    s1 += v;
  }
  CHECK(oracle::rel_err(w.sum_squares(), s2) <= 1e-12);
  CHECK(oracle::rel_err(w.coherent_gain, s1 / 200.0) <= 1e-12);
  CHECK_THROWS_AS(hann_window(1), InvalidArgument);
}

TEST_CASE("fast PSD equals the direct DFT") {
  const PsdEngine engine(200, 4096, kFs);
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = noise(rng, 200, 1.0 + trial);
    const auto fast = engine.compute(x).power;
    const auto slow = oracle::dft_psd(x, 4096, kFs);
    REQUIRE(fast.size() == slow.size());
    double diff = 0.0;
    for (std::size_t k = 0; k < fast.size(); ++k) diff = std::max(diff, std::abs(fast[k] - slow[k]));
    CHECK(diff / max_abs(slow) <= 1e-9);
  }
}

TEST_CASE("pure tone PSD peak") {
  // One period per window: the argmax bin depends on phase, pi/4 puts it
  // next to 50 Hz.
  const auto x = tone(200, 50.0, 1.0, std::numbers::pi / 4);
  const auto psd = psd_frame(x, hann_window(200), 4096, kFs);
  CHECK(psd.bins() == 2049);
  CHECK(psd.bin_hz == doctest::Approx(kFs / 4096));
  const auto argmax = static_cast<std::size_t>(std::ranges::max_element(psd.power) - psd.power.begin());
  CHECK((argmax == 20 || argmax == 21));
  CHECK(psd.total_power() == doctest::Approx(0.5).epsilon(0.02));
  const double lo = 50.0 - 3 * psd.bin_hz, hi = 50.0 + 3 * psd.bin_hz;
  CHECK(oracle::rel_err(band_energy(psd, lo, hi),
                        oracle::band_sum(oracle::dft_psd(x, 4096, kFs), psd.bin_hz, lo, hi)) <= 1e-9);

  const auto peak = peak_power_at(psd, 50.0);
  CHECK(peak.bin == argmax);
  CHECK(peak.power == psd.power[argmax]);
}

TEST_CASE("long-window tone power sits within three bins of 50 Hz") {
  const auto x = tone(2000, 50.0);
  const auto psd = psd_frame(x, hann_window(2000), 16384, kFs);
  const double df = kFs / 4096;
  CHECK(band_energy(psd, 50.0 - 3 * df, 50.0 + 3 * df) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("zero frame gives a zero PSD") {
  const std::vector<double> x(200, 0.0);
  const auto psd = psd_frame(x, hann_window(200), 4096, kFs);
  CHECK(std::ranges::all_of(psd.power, [](double p) { return p == 0.0; }));
  CHECK(peak_power_at(psd, 50.0).power == 0.0);
}

TEST_CASE("Parseval and nonnegativity") {
  const PsdEngine engine(200, 4096, kFs);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = noise(rng, 200, 3.0);
    const auto psd = engine.compute(x);
    CHECK(std::ranges::all_of(psd.power, [](double p) { return p >= 0.0; }));
    CHECK(oracle::rel_err(psd.total_power(), oracle::windowed_power(x)) <= 1e-9);
    CHECK(oracle::rel_err(band_energy(psd, 0.0, psd.nyquist_hz()), psd.total_power()) <= 1e-12);
  }
}

TEST_CASE("PSD scales with the square of the amplitude") {
  const PsdEngine engine(200, 4096, kFs);
  Rng rng(8);
  auto x = noise(rng, 200);
  const auto base = engine.compute(x).power;
  for (auto& v : x) v *= 7.0;
  const auto scaled = engine.compute(x).power;
  const double top = max_abs(base);
  for (std::size_t k = 0; k < base.size(); ++k) CHECK(std::abs(scaled[k] - 49.0 * base[k]) <= 1e-12 * 49.0 * top);
}

TEST_CASE("whole-period shifts leave band energies unchanged") {
  const PsdEngine engine(200, 4096, kFs);
  std::vector<double> ref;
  for (std::size_t periods : {0u, 1u, 3u, 10u}) {
    auto x = tone(200, 50.0, 2.0, 0.3, periods * 200);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * std::sin(2.0 * std::numbers::pi * 100.0 * (i + periods * 200) / kFs);
    const auto psd = engine.compute(x);
    const std::vector<double> bands{band_energy(psd, 40, 60), band_energy(psd, 90, 110),
                                    band_energy(psd, 0, 500)};
    if (ref.empty()) ref = bands;
    for (std::size_t b = 0; b < bands.size(); ++b) CHECK(oracle::rel_err(bands[b], ref[b]) <= 1e-6);
  }
}

TEST_CASE("band energy") {
  // A long window keeps the tone inside 45-55 Hz.
  const auto x = tone(10000, 50.0, 3.0);
  const auto psd = psd_frame(x, hann_window(x.size()), 16384, kFs);
  CHECK(band_energy(psd, 45, 55) >= 0.99 * psd.total_power());

  const auto short_psd = psd_frame(tone(200, 50.0), hann_window(200), 4096, kFs);
  const double df = short_psd.bin_hz;
  CHECK(band_energy(short_psd, 20.2 * df, 20.8 * df) == 0.0);
  CHECK(band_energy(short_psd, 19.5 * df, 20.5 * df) == short_psd.power[20] * df);
  CHECK_THROWS_AS(band_energy(short_psd, 60, 40), InvalidArgument);
  CHECK_THROWS_AS(band_energy(short_psd, 0, 6000), InvalidArgument);
}

TEST_CASE("peak power on a bin-aligned tone") {
  const double f0 = 410 * kFs / 4096;
  const auto psd0 = psd_frame(tone(200, f0), hann_window(200), 4096, kFs);
  const auto peak = peak_power_at(psd0, f0);
  CHECK(peak.bin == 410);
  CHECK(peak.power == psd0.power[410]);
  CHECK_THROWS_AS(peak_power_at(psd0, -1.0), InvalidArgument);
}

TEST_CASE("engine preconditions") {
  CHECK_THROWS_AS(PsdEngine(200, 128, kFs), InvalidArgument);
  CHECK_THROWS_AS(PsdEngine(200, 3000, kFs), InvalidArgument);
  const PsdEngine engine(200, 4096, kFs);
  std::vector<double> x(200, 1.0);
  x[5] = std::nan("");
  CHECK_THROWS_AS(engine.compute(x), InvalidArgument);
  CHECK_THROWS_AS(engine.compute(std::vector<double>(199, 1.0)), InvalidArgument);
}

TEST_CASE("spectrogram export") {
  const PsdEngine engine(200, 256, kFs);
  std::vector<PsdFrame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(engine.compute(tone(200, 50.0 * (i + 1)), 0.01 * i));
  const auto dir = std::filesystem::temp_directory_path() / "arcstab_test_tfr";
  std::filesystem::create_directories(dir);
  write_spectrogram(dir / "spectrogram.csv", frames, 0.0016, 256);
  std::ifstream csv(dir / "spectrogram.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(csv, line);) {
    if (!line.empty() && line[0] != '#') ++lines;
  }
  CHECK(lines >= 3);
  std::ifstream js(dir / "spectrogram.csv.json");
  const auto meta = nlohmann::json::parse(js);
  CHECK(meta.at("nfft") == 256);
  CHECK(meta.at("hop_s").get<double>() == doctest::Approx(0.0016));
}
