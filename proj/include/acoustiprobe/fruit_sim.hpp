#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "acoustiprobe/probe_synth.hpp"
#include "acoustiprobe/record.hpp"

namespace acoustiprobe {

/// Calibration of the synthetic reflection model. None of these constants are
/// fruit physics; they make the probing pipeline testable.
struct SimFruitParams {
  double sample_rate = kCanonicalSampleRate;
  double f_res0 = 2000.0;       // resonance at day 0, Hz
  double f_drift = -30.0;       // Hz per day
  double q0 = 25.0;             // quality factor at day 0
  double q_decay = 0.03;        // fractional Q loss per day
  double firmness0 = 180.0;     // g/mm^2 at day 0
  double firmness_decay = 3.5;  // g/mm^2 per day
  double firmness_noise = 4.0;  // per-point label std, g/mm^2
  double gain_jitter_db = 6.0;  // per-recording gain, uniform in +-this
  double snr_db = 20.0;         // +inf disables noise
  double leading_silence = 1.0; // max leading silence, s (uniform in [0, this])
  double fruit_perturbation = 0.02;  // per-fruit relative spread of f_r and Q
  double direct_path_db = -10.0;
  double capture_level = 0.25;  // nominal output scale before jitter

  void validate() const;
};

/// Per-fruit multiplicative perturbations of resonance frequency and Q.
struct FruitTraits {
  double f_scale = 1.0;
  double q_scale = 1.0;
};

FruitTraits fruit_traits(const SimFruitParams& params, std::uint64_t fruit_seed);

struct Resonance {
  double frequency = 0.0;  // Hz
  double q = 0.0;
};

/// f_r = (f_res0 + f_drift * day) * f_scale,  Q = q0 (1 - q_decay)^day * q_scale.
Resonance resonance_at(const SimFruitParams& params, double day, const FruitTraits& traits = {});

/// Noise RMS implied by snr_db: referenced to a sinusoid of peak capture_level.
double noise_rms(const SimFruitParams& params);

/// Applies e^{-pi f_r t / Q} sin(2 pi f_r t) (scaled to unit gain at f_r) to the
/// probe, adds a direct-path copy, then gain jitter, leading silence and white
/// noise drawn from recording_seed. fruit_seed fixes the per-fruit traits.
Waveform simulate_recording(const Waveform& probe, const SimFruitParams& params, double day,
                            std::uint64_t fruit_seed, std::uint64_t recording_seed);

/// The resonator alone, as a recursive filter; equals convolution with the
/// sampled impulse response scaled by resonator_gain.
std::vector<double> apply_resonator(std::span<const double> input, const Resonance& res,
                                    double sample_rate);
double resonator_gain(const Resonance& res, double sample_rate);

struct Cohort {
  std::size_t n_groups = 18;
  std::size_t fruits_per_group = 9;
  std::size_t points = 4;
  double day_step = 2.0;

  static Cohort tomato() { return {18, 9, 4, 2.0}; }
  static Cohort mandarin() { return {17, 9, 4, 3.0}; }
  std::size_t record_count() const { return n_groups * fruits_per_group * points; }
  double max_day() const { return static_cast<double>(n_groups - 1) * day_step; }
};

/// Labels of a simulated cohort plus everything needed to render each
/// record's composite recording on demand.
class SimulatedDataset {
 public:
  SimulatedDataset(Cohort cohort, SimFruitParams params, std::uint64_t seed,
                   double gap = 0.5, ProbeSet probes = default_probe_set());

  const std::vector<LabeledRecord>& records() const noexcept { return records_; }
  const Cohort& cohort() const noexcept { return cohort_; }
  const SimFruitParams& params() const noexcept { return params_; }
  const ProbeSet& probes() const noexcept { return probes_; }
  double gap() const noexcept { return gap_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Deterministic in (seed, fruit, point); independent of call order.
  Waveform render(std::size_t index) const;

  /// Writes one WAV per record plus manifest.csv into dir; records' wav_path
  /// are set relative to dir. Returns the manifest path.
  std::filesystem::path write(const std::filesystem::path& dir, std::size_t threads = 1);

 private:
  Cohort cohort_;
  SimFruitParams params_;
  std::uint64_t seed_;
  double gap_;
  ProbeSet probes_;
  Waveform composite_;
  std::vector<LabeledRecord> records_;
};

/// Builds the labels for a cohort: group g is stored g * day_step days.
SimulatedDataset gen_dataset(const Cohort& cohort, const SimFruitParams& params,
                             std::uint64_t seed);

/// splitmix64-style mixing used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace acoustiprobe
