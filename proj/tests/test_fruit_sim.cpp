#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "acoustiprobe/dataio.hpp"
#include "acoustiprobe/error.hpp"
#include "acoustiprobe/features.hpp"
#include "acoustiprobe/fruit_sim.hpp"
#include "oracles.hpp"

using namespace acoustiprobe;

namespace {

std::vector<double> sampled_response(const Resonance& res, double rate, std::size_t n) {
  const double r = std::exp(-std::numbers::pi * res.frequency / (res.q * rate));
  const double theta = 2.0 * std::numbers::pi * res.frequency / rate;
  const double g = resonator_gain(res, rate);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = g * std::pow(r, double(i)) * std::sin(double(i) * theta);
  return h;
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / double(v.size()));
}

}  // namespace

TEST_CASE("recursive resonator equals convolution with its sampled impulse response") {
  std::mt19937_64 rng(1);
  const std::vector<double> x = oracle::random_signal(rng, 3000);
  for (const Resonance res : {Resonance{2000.0, 25.0}, Resonance{977.0, 7.5}, Resonance{9000.0, 60.0}}) {
    const std::vector<double> want = oracle::convolve(x, sampled_response(res, 48000.0, x.size()));
    const std::vector<double> got = apply_resonator(x, res, 48000.0);
    CHECK(oracle::rel_error(got, want) < 1e-9);
  }
}

TEST_CASE("resonator has unit gain at its resonance") {
  const Resonance res{1500.0, 20.0};
  std::vector<double> x(48000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 1500.0 * i / 48000.0);
  const std::vector<double> y = apply_resonator(x, res, 48000.0);
  const std::vector<double> tail(y.begin() + 24000, y.end());
  CHECK(oracle::max_abs(tail) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("day-0 fruit response peaks near 2000 Hz") {
  SimFruitParams params;
  params.fruit_perturbation = 0.0;
  const Resonance res = resonance_at(params, 0.0);
  CHECK(res.frequency == 2000.0);
  CHECK(res.q == 25.0);
  std::vector<double> impulse(8192, 0.0);
  impulse[0] = 1.0;
  const std::vector<double> h = apply_resonator(impulse, res, 48000.0);
  const std::vector<double> mags = oracle::dft_magnitudes(h, 8192);
  const auto peak = std::size_t(std::max_element(mags.begin(), mags.end()) - mags.begin());
  CHECK(std::abs(double(peak) * 48000.0 / 8192.0 - 2000.0) <= 48000.0 / 8192.0);
}

TEST_CASE("resonance drifts with storage day") {
  SimFruitParams params;
  const FruitTraits unit{};
  CHECK(resonance_at(params, 10.0, unit).frequency == 1700.0);
  CHECK(resonance_at(params, 10.0, unit).q == doctest::Approx(25.0 * std::pow(0.97, 10.0)));
  const FruitTraits t = fruit_traits(params, 1234);
  CHECK(std::abs(t.f_scale - 1.0) <= 0.02);
  CHECK(std::abs(t.q_scale - 1.0) <= 0.02);
  CHECK(resonance_at(params, 4.0, t).frequency == doctest::Approx(1880.0 * t.f_scale));
}

TEST_CASE("silent probe yields noise at the configured level") {
  SimFruitParams params;
  const Waveform zero{std::vector<double>(96000, 0.0), 48000.0};
  const Waveform w = simulate_recording(zero, params, 3.0, 1, 2);
  CHECK(w.size() >= 96000);
  CHECK(w.size() <= 96000 + 48000);
  CHECK(rms(w.samples) == doctest::Approx(noise_rms(params)).epsilon(0.02));
  CHECK(noise_rms(params) == doctest::Approx(0.25 / std::sqrt(2.0) / 10.0));

  params.snr_db = std::numeric_limits<double>::infinity();
  CHECK(noise_rms(params) == 0.0);
  CHECK(oracle::max_abs(simulate_recording(zero, params, 3.0, 1, 2).samples) == 0.0);
}

TEST_CASE("recordings that differ only by gain give the same spectrum feature") {
  SimFruitParams a;
  a.snr_db = std::numeric_limits<double>::infinity();
  SimFruitParams b = a;
  b.gain_jitter_db = 0.0;
  const Waveform probe = synthesize(default_probe_spec(ProbeKind::ExpSweep));
  const Waveform wa = simulate_recording(probe, a, 8.0, 5, 6);
  const Waveform wb = simulate_recording(probe, b, 8.0, 5, 6);
  REQUIRE(wa.size() == wb.size());
  const std::size_t lead = wa.size() - probe.size();
  auto clip = [&](const Waveform& w) {
    return Waveform{{w.samples.begin() + std::ptrdiff_t(lead), w.samples.end()}, 48000.0};
  };
  const FeatureVector fa = spectrum_feature(clip(wa));
  const FeatureVector fb = spectrum_feature(clip(wb));
  CHECK(oracle::rel_error(fa.values, fb.values) < 1e-6);
  CHECK(oracle::max_abs(wa.samples) != doctest::Approx(oracle::max_abs(wb.samples)));
}

TEST_CASE("cohort sizes") {
  CHECK(Cohort::tomato().record_count() == 648);
  CHECK(Cohort::mandarin().record_count() == 612);
  CHECK(Cohort::tomato().max_day() == 34.0);
  const SimulatedDataset ds(Cohort::mandarin(), SimFruitParams{}, 3);
  CHECK(ds.records().size() == 612);
  std::map<int, int> per_fruit;
  for (const LabeledRecord& r : ds.records()) ++per_fruit[r.fruit_id];
  CHECK(per_fruit.size() == 153);
  for (const auto& [fruit, n] : per_fruit) CHECK(n == 4);
}

TEST_CASE("labels follow storage day") {
  SimFruitParams params;
  params.firmness_noise = 0.0;
  const SimulatedDataset exact(Cohort{5, 2, 2, 3.0}, params, 1);
  for (const LabeledRecord& r : exact.records()) {
    CHECK(r.storage_days == 3.0 * r.group_id);
    CHECK(r.firmness == 180.0 - 3.5 * r.storage_days);
  }

  const SimulatedDataset noisy(Cohort::tomato(), SimFruitParams{}, 1);
  std::map<int, std::pair<double, int>> by_group;
  for (const LabeledRecord& r : noisy.records()) {
    by_group[r.group_id].first += r.firmness;
    ++by_group[r.group_id].second;
  }
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [g, acc] : by_group) {
    const double mean = acc.first / acc.second;
    CHECK(mean < prev);
    CHECK(std::abs(mean - (180.0 - 7.0 * g)) < 3.0);
    prev = mean;
  }
}

TEST_CASE("rendering is deterministic and order independent") {
  const SimulatedDataset a(Cohort{3, 2, 2, 2.0}, SimFruitParams{}, 9);
  const SimulatedDataset b(Cohort{3, 2, 2, 2.0}, SimFruitParams{}, 9);
  CHECK(a.records() == b.records());
  const Waveform last_first = b.render(11);
  for (std::size_t i = 0; i < a.records().size(); ++i) CHECK(a.render(i).samples == b.render(i).samples);
  CHECK(a.render(11).samples == last_first.samples);
  CHECK(a.render(0).samples != a.render(1).samples);
  const SimulatedDataset c(Cohort{3, 2, 2, 2.0}, SimFruitParams{}, 10);
  CHECK(c.render(0).samples != a.render(0).samples);
}

TEST_CASE("writing a dataset produces a readable manifest and WAVs") {
  const auto dir = std::filesystem::temp_directory_path() / "acoustiprobe_sim_write";
  std::filesystem::remove_all(dir);
  SimulatedDataset ds(Cohort{2, 2, 1, 2.0}, SimFruitParams{}, 4);
  const auto manifest = ds.write(dir, 2);
  const std::vector<LabeledRecord> back = read_manifest(manifest);
  CHECK(back == ds.records());
  const Waveform w = read_wav(dir / back[1].wav_path);
  const Waveform ref = ds.render(1);
  REQUIRE(w.size() == ref.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w.samples[i] - ref.samples[i]));
  CHECK(worst <= 1.0 / 32767.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulator parameter validation") {
  SimFruitParams params;
  params.q0 = 0.5;
  CHECK_THROWS_AS(params.validate(), Error);
  // Day 68 would drive the resonance to zero.
  try {
    SimulatedDataset(Cohort{35, 1, 1, 2.0}, SimFruitParams{}, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
  CHECK_THROWS_AS(apply_resonator(std::vector<double>(10), Resonance{30000.0, 5.0}, 48000.0), Error);
}
