#include "acoustiprobe/fruit_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "acoustiprobe/dataio.hpp"
#include "acoustiprobe/error.hpp"
#include "acoustiprobe/parallel.hpp"

namespace acoustiprobe {
namespace {

// Stream tags for mix_seed.
constexpr std::uint64_t kFruitStream = 0x66727569;      // "frui"
constexpr std::uint64_t kRecordingStream = 0x7265636f;  // "reco"
constexpr std::uint64_t kLabelStream = 0x6c61626c;      // "labl"

double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SimFruitParams::validate() const {
  require(sample_rate > 0.0, ErrorCode::InvalidSpec, "simulator sample rate must be positive");
  require(q0 > 1.0, ErrorCode::InvalidSpec, "q0 must exceed 1");
  require(q_decay >= 0.0 && q_decay < 1.0, ErrorCode::InvalidSpec, "q_decay must lie in [0, 1)");
  require(gain_jitter_db >= 0.0, ErrorCode::InvalidSpec, "gain_jitter_db must be non-negative");
  require(leading_silence >= 0.0, ErrorCode::InvalidSpec, "leading_silence must be non-negative");
  require(fruit_perturbation >= 0.0 && fruit_perturbation < 1.0, ErrorCode::InvalidSpec,
          "fruit_perturbation must lie in [0, 1)");
  require(firmness_noise >= 0.0, ErrorCode::InvalidSpec, "firmness_noise must be non-negative");
  require(capture_level > 0.0, ErrorCode::InvalidSpec, "capture_level must be positive");
  require(!std::isnan(snr_db), ErrorCode::InvalidSpec, "snr_db is NaN");
}

FruitTraits fruit_traits(const SimFruitParams& params, std::uint64_t fruit_seed) {
  std::mt19937_64 rng(mix_seed(fruit_seed, kFruitStream));
  std::uniform_real_distribution<double> spread(-params.fruit_perturbation,
                                                params.fruit_perturbation);
  FruitTraits t;
  t.f_scale = 1.0 + spread(rng);
  t.q_scale = 1.0 + spread(rng);
  return t;
}

Resonance resonance_at(const SimFruitParams& params, double day, const FruitTraits& traits) {
  Resonance r;
  r.frequency = (params.f_res0 + params.f_drift * day) * traits.f_scale;
  r.q = params.q0 * std::pow(1.0 - params.q_decay, day) * traits.q_scale;
  return r;
}

double noise_rms(const SimFruitParams& params) {
  if (std::isinf(params.snr_db) && params.snr_db > 0.0) return 0.0;
  return params.capture_level / std::numbers::sqrt2 * db_to_gain(-params.snr_db);
}

double resonator_gain(const Resonance& res, double sample_rate) {
  const double r = std::exp(-std::numbers::pi * res.frequency / (res.q * sample_rate));
  const double theta = 2.0 * std::numbers::pi * res.frequency / sample_rate;
  const std::complex<double> z1 = std::polar(1.0, -theta);
  const std::complex<double> h =
      r * std::sin(theta) * z1 / (1.0 - 2.0 * r * std::cos(theta) * z1 + r * r * z1 * z1);
  return 1.0 / std::abs(h);
}

std::vector<double> apply_resonator(std::span<const double> input, const Resonance& res,
                                    double sample_rate) {
  require(res.frequency > 0.0 && res.frequency < sample_rate / 2.0, ErrorCode::InvalidSpec,
          "resonance " + std::to_string(res.frequency) + " Hz is outside (0, Nyquist)");
  require(res.q > 0.0, ErrorCode::InvalidSpec, "resonator Q must be positive");
  // h[n] = g r^n sin(n theta)  <=>  y[n] = g r sin(theta) x[n-1] + 2 r cos(theta) y[n-1] - r^2 y[n-2]
  const double r = std::exp(-std::numbers::pi * res.frequency / (res.q * sample_rate));
  const double theta = 2.0 * std::numbers::pi * res.frequency / sample_rate;
  const double b1 = resonator_gain(res, sample_rate) * r * std::sin(theta);
  const double a1 = 2.0 * r * std::cos(theta);
  const double a2 = r * r;

  std::vector<double> out(input.size(), 0.0);
  double y1 = 0.0, y2 = 0.0, x1 = 0.0;
  for (std::size_t n = 0; n < input.size(); ++n) {
    const double y = b1 * x1 + a1 * y1 - a2 * y2;
    out[n] = y;
    y2 = y1;
    y1 = y;
    x1 = input[n];
  }
  return out;
}

Waveform simulate_recording(const Waveform& probe, const SimFruitParams& params, double day,
                            std::uint64_t fruit_seed, std::uint64_t recording_seed) {
  params.validate();
  require(probe.sample_rate == params.sample_rate, ErrorCode::InvalidSpec,
          "probe sample rate differs from the simulator's");
  const Resonance res = resonance_at(params, day, fruit_traits(params, fruit_seed));
  require(res.frequency > 0.0 && res.frequency < params.sample_rate / 2.0, ErrorCode::InvalidSpec,
          "resonance " + std::to_string(res.frequency) + " Hz at day " + std::to_string(day) +
              " is outside (0, Nyquist)");

  std::mt19937_64 rng(mix_seed(recording_seed, kRecordingStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double jitter_db = params.gain_jitter_db * (2.0 * unit(rng) - 1.0);
  const double silence_s = params.leading_silence * unit(rng);

  const double gain = params.capture_level * db_to_gain(jitter_db);
  const double direct = db_to_gain(params.direct_path_db);
  const std::vector<double> resonant = apply_resonator(probe.samples, res, params.sample_rate);

  const auto lead = static_cast<std::size_t>(std::llround(silence_s * params.sample_rate));
  Waveform out;
  out.sample_rate = params.sample_rate;
  out.samples.assign(lead + probe.size(), 0.0);
  for (std::size_t n = 0; n < probe.size(); ++n) {
    out.samples[lead + n] = gain * (resonant[n] + direct * probe.samples[n]);
  }

  const double sigma = noise_rms(params);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& s : out.samples) s += noise(rng);
  }
  return out;
}

SimulatedDataset::SimulatedDataset(Cohort cohort, SimFruitParams params, std::uint64_t seed,
                                   double gap, ProbeSet probes)
    : cohort_(cohort), params_(params), seed_(seed), gap_(gap), probes_(std::move(probes)) {
  params_.validate();
  require(cohort_.n_groups >= 1 && cohort_.fruits_per_group >= 1 && cohort_.points >= 1,
          ErrorCode::InvalidSpec, "cohort counts must be at least 1");
  require(cohort_.points <= 4, ErrorCode::InvalidSpec, "at most four measurement points per fruit");
  require(cohort_.day_step > 0.0, ErrorCode::InvalidSpec, "day_step must be positive");

  double f_lo = probes_[0].f0;
  double f_hi = probes_[0].f1;
  for (const ProbeSpec& p : probes_) {
    if (p.kind == ProbeKind::LinearSweep || p.kind == ProbeKind::ExpSweep) {
      f_lo = p.f0;
      f_hi = p.f1;
    }
  }
  const double spread = params_.fruit_perturbation;
  for (double day : {0.0, cohort_.max_day()}) {
    const Resonance lo = resonance_at(params_, day, {1.0 - spread, 1.0 - spread});
    const Resonance hi = resonance_at(params_, day, {1.0 + spread, 1.0 + spread});
    require(lo.frequency > f_lo && hi.frequency < f_hi, ErrorCode::InvalidSpec,
            "simulated resonance leaves the sweep range by day " + std::to_string(day));
    require(lo.q > 1.0, ErrorCode::InvalidSpec,
            "simulated Q drops to 1 or below by day " + std::to_string(day));
  }
  require(params_.firmness0 - params_.firmness_decay * cohort_.max_day() > 0.0,
          ErrorCode::InvalidSpec, "simulated firmness reaches zero within the day range");

  composite_ = gen_composite(gap_, probes_);

  records_.reserve(cohort_.record_count());
  for (std::size_t g = 0; g < cohort_.n_groups; ++g) {
    const double day = static_cast<double>(g) * cohort_.day_step;
    for (std::size_t f = 0; f < cohort_.fruits_per_group; ++f) {
      const int fruit = static_cast<int>(g * cohort_.fruits_per_group + f);
      for (std::size_t p = 1; p <= cohort_.points; ++p) {
        LabeledRecord r;
        char id[48];
        std::snprintf(id, sizeof id, "g%02zu_f%03d_p%zu", g, fruit, p);
        r.record_id = id;
        r.fruit_id = fruit;
        r.group_id = static_cast<int>(g);
        r.point_id = static_cast<int>(p);
        r.storage_days = day;
        std::mt19937_64 label_rng(
            mix_seed(mix_seed(mix_seed(seed_, kLabelStream), static_cast<std::uint64_t>(fruit)), p));
        std::normal_distribution<double> label_noise(0.0, 1.0);
        const double firmness = params_.firmness0 - params_.firmness_decay * day +
                                params_.firmness_noise * label_noise(label_rng);
        r.firmness = std::max(firmness, 1.0);
        r.wav_path = r.record_id + ".wav";
        records_.push_back(std::move(r));
      }
    }
  }
}

Waveform SimulatedDataset::render(std::size_t index) const {
  const LabeledRecord& r = records_.at(index);
  const std::uint64_t fruit_seed = mix_seed(seed_, static_cast<std::uint64_t>(r.fruit_id));
  const std::uint64_t recording_seed =
      mix_seed(fruit_seed, static_cast<std::uint64_t>(r.point_id));
  return simulate_recording(composite_, params_, r.storage_days, fruit_seed, recording_seed);
}

std::filesystem::path SimulatedDataset::write(const std::filesystem::path& dir,
                                              std::size_t threads) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create directory " + dir.string());
  parallel_for(records_.size(), threads, [&](std::size_t i) {
    write_wav(dir / records_[i].wav_path, render(i));
  });
  const std::filesystem::path manifest = dir / "manifest.csv";
  write_manifest(manifest, records_);
  return manifest;
}

SimulatedDataset gen_dataset(const Cohort& cohort, const SimFruitParams& params,
                             std::uint64_t seed) {
  return SimulatedDataset(cohort, params, seed);
}

}  // namespace acoustiprobe
