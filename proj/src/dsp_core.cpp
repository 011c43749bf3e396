#include "acoustiprobe/dsp_core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {
namespace {

// FFTW's planner is not reentrant; plan execution on private buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Real-to-complex transform of a fixed size with its own aligned buffers.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n_);
    out_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, n_}; }

  /// Transforms input() and writes |X_k| for k = 0..n/2.
  void magnitudes(std::span<double> out) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

std::size_t StftConfig::hop() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(window_size) * overlap_ratio));
}

std::size_t StftConfig::frame_count(std::size_t length) const {
  if (length < window_size) return 0;
  return (length - window_size) / hop() + 1;
}

std::size_t StftConfig::bin_of(double hz) const {
  return static_cast<std::size_t>(
      std::llround(hz * static_cast<double>(window_size) / sample_rate));
}

void StftConfig::validate() const {
  require(is_power_of_two(window_size) && window_size >= 2, ErrorCode::InvalidSpec,
          "STFT window size must be a power of two");
  require(overlap_ratio > 0.0 && overlap_ratio < 1.0, ErrorCode::InvalidSpec,
          "STFT overlap ratio must lie in (0, 1)");
  const double hop_exact = static_cast<double>(window_size) * overlap_ratio;
  require(hop_exact >= 1.0 && hop_exact == std::floor(hop_exact), ErrorCode::InvalidSpec,
          "STFT hop W*O must be a positive integer");
  require(sample_rate > 0.0, ErrorCode::InvalidSpec, "sample rate must be positive");
}

Spectrogram::Spectrogram(std::size_t frames, StftConfig config)
    : frames_(frames), bins_(config.bins()), config_(config), data_(frames * bins_, 0.0) {}

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
  }
  return w;
}

Spectrogram stft(const Waveform& signal, const StftConfig& config) {
  config.validate();
  const std::size_t w = config.window_size;
  require(signal.size() >= w, ErrorCode::TooShort,
          "signal of " + std::to_string(signal.size()) + " samples is shorter than the " +
              std::to_string(w) + "-sample window");

  const std::size_t hop = config.hop();
  Spectrogram spec(config.frame_count(signal.size()), config);
  const std::vector<double> taper = hamming_window(w);
  RealFft fft(w);
  auto in = fft.input();
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    const double* src = signal.samples.data() + f * hop;
    for (std::size_t n = 0; n < w; ++n) in[n] = src[n] * taper[n];
    fft.magnitudes(spec.frame(f));
  }
  return spec;
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

MagnitudeSpectrum magnitude_spectrum(const Waveform& signal) {
  require(!signal.empty(), ErrorCode::TooShort, "cannot take the spectrum of an empty signal");
  MagnitudeSpectrum out;
  out.sample_rate = signal.sample_rate;
  out.fft_size = next_power_of_two(signal.size());
  out.magnitudes.resize(out.fft_size / 2 + 1);

  const std::vector<double> taper = hamming_window(signal.size());
  RealFft fft(out.fft_size);
  auto in = fft.input();
  std::fill(in.begin(), in.end(), 0.0);
  for (std::size_t n = 0; n < signal.size(); ++n) in[n] = signal.samples[n] * taper[n];
  fft.magnitudes(out.magnitudes);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  std::vector<double> energies(bands, 0.0);
  const std::size_t n = std::min(bins, power.size());
  for (std::size_t m = 0; m < bands; ++m) {
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) acc += weight(m, b) * power[b];
    energies[m] = acc;
  }
  return energies;
}

MelFilterbank mel_filterbank(std::size_t n_bands, std::size_t n_fft, double sample_rate,
                             double fmin, double fmax) {
  require(n_bands >= 2, ErrorCode::InvalidSpec, "mel filterbank needs at least two bands");
  require(n_fft >= 2, ErrorCode::InvalidSpec, "mel filterbank needs n_fft >= 2");
  require(fmin >= 0.0 && fmin < fmax, ErrorCode::InvalidSpec,
          "mel filterbank needs 0 <= fmin < fmax");
  require(fmax <= sample_rate / 2.0, ErrorCode::InvalidSpec,
          "mel filterbank fmax " + std::to_string(fmax) + " Hz exceeds Nyquist");

  MelFilterbank fb;
  fb.bands = n_bands;
  fb.bins = n_fft / 2 + 1;
  fb.weights.assign(fb.bands * fb.bins, 0.0);

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_bands + 1));
  }
  fb.centers_hz.assign(edges.begin() + 1, edges.end() - 1);

  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_bands; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < fb.bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb.weights[m * fb.bins + b] = w;
    }
  }
  return fb;
}

std::vector<double> dct_ii(std::span<const double> values) {
  require(!values.empty(), ErrorCode::InvalidInput, "DCT of an empty vector");
  const std::size_t n = values.size();
  const double nd = static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += values[i] * std::cos(std::numbers::pi / nd * (static_cast<double>(i) + 0.5) *
                                  static_cast<double>(k));
    }
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / nd);
  }
  return out;
}

}  // namespace acoustiprobe
