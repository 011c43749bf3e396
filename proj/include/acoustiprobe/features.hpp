#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "acoustiprobe/onset_clip.hpp"

namespace acoustiprobe {

enum class FeatureKind { Spectrum, Mfcc };

inline constexpr std::array<FeatureKind, 2> kAllFeatureKinds = {FeatureKind::Spectrum,
                                                                 FeatureKind::Mfcc};

std::string_view feature_kind_name(FeatureKind kind);  // "spectrum" | "mfcc"
std::optional<FeatureKind> parse_feature_kind(std::string_view name);

struct FeatureConfig {
  std::size_t spectrum_bands = 2048;  // 0 keeps every one-sided bin up to spectrum_fmax
  double spectrum_fmax = 12000.0;
  std::size_t mfcc_window = 1024;
  std::size_t mfcc_hop = 512;
  std::size_t mel_bands = 20;
  std::size_t mfcc_coeffs = 20;
  double mel_fmin = 0.0;
  double mel_fmax = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;
  double clip_duration = 1.0;  // seconds every clip must span

  void validate(double sample_rate) const;
};

struct FeatureVector {
  FeatureKind kind = FeatureKind::Spectrum;
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

/// Band-averaged, L2-normalised magnitude spectrum of the whole clip. A silent
/// clip yields the zero vector.
FeatureVector spectrum_feature(const Waveform& clip, const FeatureConfig& cfg = {});

/// Frame-averaged MFCCs: Hamming frames, power spectrum, mel bands,
/// log(max(e, floor)), orthonormal DCT-II, first mfcc_coeffs kept.
FeatureVector mfcc_feature(const Waveform& clip, const FeatureConfig& cfg = {});

FeatureVector extract_feature(FeatureKind kind, const Waveform& clip,
                              const FeatureConfig& cfg = {});

inline FeatureVector spectrum_feature(const ClippedSignal& clip, const FeatureConfig& cfg = {}) {
  return spectrum_feature(clip.samples, cfg);
}
inline FeatureVector mfcc_feature(const ClippedSignal& clip, const FeatureConfig& cfg = {}) {
  return mfcc_feature(clip.samples, cfg);
}

/// Output dimension for a config at a sample rate.
std::size_t feature_dim(FeatureKind kind, const FeatureConfig& cfg, double sample_rate);

}  // namespace acoustiprobe
