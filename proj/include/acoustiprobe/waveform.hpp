#pragma once

#include <cstddef>
#include <vector>

namespace acoustiprobe {

inline constexpr double kCanonicalSampleRate = 48000.0;

/// Uniformly sampled mono signal.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = kCanonicalSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

}  // namespace acoustiprobe
