#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "acoustiprobe/waveform.hpp"

namespace acoustiprobe {

/// Framing parameters for the short-time transform. Frames are Hamming-tapered.
struct StftConfig {
  std::size_t window_size = 512;
  double overlap_ratio = 0.5;
  double sample_rate = kCanonicalSampleRate;

  std::size_t hop() const;
  std::size_t bins() const { return window_size / 2 + 1; }
  /// floor((length - W) / hop) + 1, or 0 when length < W.
  std::size_t frame_count(std::size_t length) const;
  /// Bin nearest to a frequency: round(hz * W / N).
  std::size_t bin_of(double hz) const;
  void validate() const;
};

/// Magnitude STFT, frames x bins, row-major.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, StftConfig config);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t bins() const noexcept { return bins_; }
  const StftConfig& config() const noexcept { return config_; }

  double at(std::size_t frame, std::size_t bin) const { return data_[frame * bins_ + bin]; }
  double& at(std::size_t frame, std::size_t bin) { return data_[frame * bins_ + bin]; }
  std::span<const double> frame(std::size_t i) const {
    return {data_.data() + i * bins_, bins_};
  }
  std::span<double> frame(std::size_t i) { return {data_.data() + i * bins_, bins_}; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  StftConfig config_;
  std::vector<double> data_;
};

/// Symmetric Hamming taper 0.54 - 0.46 cos(2 pi n / (n - 1)).
std::vector<double> hamming_window(std::size_t n);

/// Frame i covers samples [i * hop, i * hop + W). Throws too-short when the
/// signal is shorter than one window.
Spectrogram stft(const Waveform& signal, const StftConfig& config);

struct MagnitudeSpectrum {
  std::vector<double> magnitudes;  // fft_size / 2 + 1 one-sided bins
  std::size_t fft_size = 0;        // signal length rounded up to a power of two
  double sample_rate = kCanonicalSampleRate;

  double bin_hz() const { return sample_rate / static_cast<double>(fft_size); }
};

/// Whole-signal Hamming taper, zero-padded to the next power of two.
MagnitudeSpectrum magnitude_spectrum(const Waveform& signal);

std::size_t next_power_of_two(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with centers evenly spaced on the mel scale.
struct MelFilterbank {
  std::size_t bands = 0;
  std::size_t bins = 0;  // n_fft / 2 + 1
  std::vector<double> weights;  // bands x bins, row-major
  std::vector<double> centers_hz;

  double weight(std::size_t band, std::size_t bin) const { return weights[band * bins + bin]; }
  /// Band energies for one power-spectrum frame.
  std::vector<double> apply(std::span<const double> power) const;
};

MelFilterbank mel_filterbank(std::size_t n_bands, std::size_t n_fft, double sample_rate,
                             double fmin, double fmax);

/// Orthonormal DCT-II.
std::vector<double> dct_ii(std::span<const double> values);

}  // namespace acoustiprobe
