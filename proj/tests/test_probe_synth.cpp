#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "acoustiprobe/dsp_core.hpp"
#include "acoustiprobe/error.hpp"
#include "acoustiprobe/onset_clip.hpp"
#include "acoustiprobe/probe_synth.hpp"
#include "oracles.hpp"

using namespace acoustiprobe;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an acoustiprobe::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("single tone follows the direct formula") {
  const Waveform w = gen_tones({5000.0}, 1.0, 48000.0, 0.9);
  REQUIRE(w.size() == 48000);
  for (std::size_t n : {0u, 1u, 7u, 12u, 1000u, 47999u}) {
    CHECK(w.samples[n] ==
          doctest::Approx(0.9 * std::sin(2.0 * std::numbers::pi * 5000.0 * n / 48000.0)).epsilon(1e-12));
  }
}

TEST_CASE("half-second probe has 24000 samples") {
  CHECK(gen_tones({5000.0}, 0.5, 48000.0, 0.9).size() == 24000);
  CHECK(gen_sweep(ProbeKind::ExpSweep, 100, 10000, 0.5, 48000.0, 0.9).size() == 24000);
}

TEST_CASE("multi tone has exactly three dominant spectral peaks") {
  const Waveform w = gen_tones({3500.0, 5000.0, 6500.0}, 0.1, 48000.0, 0.9);
  // 4800 samples -> 10 Hz bins; tones fall on bins 350, 500, 650.
  const auto mags = oracle::dft_magnitudes(w.samples, w.size());
  std::vector<std::size_t> order(mags.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mags[a] > mags[b]; });
  std::vector<std::size_t> top(order.begin(), order.begin() + 3);
  std::sort(top.begin(), top.end());
  CHECK(top == std::vector<std::size_t>{350, 500, 650});
  CHECK(mags[order[3]] < 1e-6 * mags[order[2]]);
}

TEST_CASE("sweep instantaneous frequency at midpoint") {
  ProbeSpec lin = default_probe_spec(ProbeKind::LinearSweep);
  ProbeSpec exp = default_probe_spec(ProbeKind::ExpSweep);
  CHECK(instantaneous_frequency(lin, 0.5) == doctest::Approx(5050.0));
  CHECK(instantaneous_frequency(exp, 0.5) == doctest::Approx(1000.0));
  CHECK(instantaneous_frequency(lin, 0.0) == doctest::Approx(100.0));
  CHECK(instantaneous_frequency(exp, 1.0) == doctest::Approx(10000.0));
}

TEST_CASE("sweep phase derivative matches the instantaneous frequency") {
  // Local zero-crossing rate around t = 0.5 s.
  for (ProbeKind kind : {ProbeKind::LinearSweep, ProbeKind::ExpSweep}) {
    const Waveform w = gen_sweep(kind, 100, 10000, 1.0, 48000.0, 0.9);
    const std::size_t a = 24000 - 480, b = 24000 + 480;
    int crossings = 0;
    for (std::size_t n = a; n < b; ++n) {
      if ((w.samples[n] < 0) != (w.samples[n + 1] < 0)) ++crossings;
    }
    const double est = crossings / 2.0 / 0.02;
    const double expected = kind == ProbeKind::LinearSweep ? 5050.0 : 1000.0;
    CHECK(std::abs(est - expected) < 0.03 * expected + 50.0);
  }
}

TEST_CASE("sweep spectrogram ridge follows its template") {
  StftConfig cfg;
  for (ProbeKind kind : {ProbeKind::LinearSweep, ProbeKind::ExpSweep}) {
    const ProbeSpec spec = default_probe_spec(kind);
    const Spectrogram s = stft(synthesize(spec), cfg);
    const Template t = template_for(spec, cfg);
    REQUIRE(s.frames() == t.frames());
    // Frame f is centred on probe time (f * hop + W/2) / N.
    for (std::size_t f = 0; f < s.frames(); ++f) {
      const auto row = s.frame(f);
      const auto peak = std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
      const double centre_t = (f * 256.0 + 256.0) / 48000.0;
      const double true_bin = instantaneous_frequency(spec, centre_t) * 512.0 / 48000.0;
      CHECK(std::abs(double(peak) - true_bin) <= 1.0 + 0.5);
      const double tmpl_t = double(f + 1) / double(t.frames());
      CHECK(t.targets[f] == doctest::Approx(instantaneous_frequency(spec, tmpl_t)).epsilon(1e-9));
    }
  }
}

TEST_CASE("sweep endpoints: first and last frame peaks near f0 and f1") {
  StftConfig cfg;
  for (ProbeKind kind : {ProbeKind::LinearSweep, ProbeKind::ExpSweep}) {
    const Spectrogram s = stft(synthesize(default_probe_spec(kind)), cfg);
    auto peak_hz = [&](std::size_t f) {
      const auto row = s.frame(f);
      return double(std::max_element(row.begin(), row.end()) - row.begin()) * 93.75;
    };
    // The first and last frames are centred W/2 samples inside the probe, so
    // the ridge ends short of f1 on the steep exponential sweep.
    const ProbeSpec spec = default_probe_spec(kind);
    const double first = instantaneous_frequency(spec, 256.0 / 48000.0);
    const double last = instantaneous_frequency(spec, (s.frames() - 1) * 256.0 / 48000.0 + 256.0 / 48000.0);
    CHECK(std::abs(peak_hz(0) - first) <= 93.75);
    CHECK(std::abs(peak_hz(s.frames() - 1) - last) <= 93.75);
  }
}

TEST_CASE("generators respect the peak bound and are deterministic") {
  for (ProbeKind kind : kAllProbeKinds) {
    ProbeSpec spec = default_probe_spec(kind);
    spec.amplitude = 0.7;
    const Waveform a = synthesize(spec);
    const Waveform b = synthesize(spec);
    CHECK(a.samples == b.samples);
    CHECK(oracle::max_abs(a.samples) <= 0.7 + 1e-15);
    CHECK(oracle::max_abs(a.samples) > 0.69);
  }
}

TEST_CASE("composite length and layout") {
  const ProbeSet set = default_probe_set();
  CHECK(gen_composite(0.5, set).size() == 312000);
  CHECK(gen_composite(0.0, set).size() == 192000);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(composite_probe_offset(0.0, set, k) == k * 48000);
    CHECK(composite_probe_offset(0.5, set, k) == 24000 + k * 72000);
  }
  const Waveform w = gen_composite(0.5, set);
  const Waveform exp = synthesize(set[1]);
  CHECK(std::equal(exp.samples.begin(), exp.samples.end(), w.samples.begin() + 96000));
  CHECK(std::all_of(w.samples.begin(), w.samples.begin() + 24000, [](double v) { return v == 0.0; }));
}

TEST_CASE("composite order is single, exp, linear, multi") {
  const ProbeSet set = default_probe_set();
  CHECK(set[0].kind == ProbeKind::SingleFreq);
  CHECK(set[1].kind == ProbeKind::ExpSweep);
  CHECK(set[2].kind == ProbeKind::LinearSweep);
  CHECK(set[3].kind == ProbeKind::MultiFreq);
  ProbeSet swapped = set;
  std::swap(swapped[1], swapped[2]);
  CHECK(code_of([&] { gen_composite(0.5, swapped); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("invalid specs are rejected") {
  CHECK(code_of([] { gen_tones({24000.0}, 1.0, 48000.0, 0.9); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { gen_tones({}, 1.0, 48000.0, 0.9); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { gen_sweep(ProbeKind::LinearSweep, 5000, 100, 1.0, 48000.0, 0.9); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { gen_sweep(ProbeKind::ExpSweep, 100, 30000, 1.0, 48000.0, 0.9); }) ==
        ErrorCode::InvalidSpec);
  ProbeSet set = default_probe_set();
  set[2].sample_rate = 44100.0;
  CHECK(code_of([&] { gen_composite(0.5, set); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("probe kind names round-trip") {
  for (ProbeKind kind : kAllProbeKinds) CHECK(parse_probe_kind(probe_kind_name(kind)) == kind);
  CHECK_FALSE(parse_probe_kind("chirp").has_value());
}
