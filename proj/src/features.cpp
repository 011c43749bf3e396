#include "acoustiprobe/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {
namespace {

std::size_t clip_length(const FeatureConfig& cfg, double sample_rate) {
  return static_cast<std::size_t>(std::llround(cfg.clip_duration * sample_rate));
}

void check_clip(const Waveform& clip, const FeatureConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const std::size_t expected = clip_length(cfg, clip.sample_rate);
  require(clip.size() == expected, ErrorCode::InvalidInput,
          "clip has " + std::to_string(clip.size()) + " samples, expected " +
              std::to_string(expected));
}

// One-sided bins at or below spectrum_fmax for a given transform size.
std::size_t spectrum_bins(const FeatureConfig& cfg, std::size_t fft_size, double sample_rate) {
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  const auto top = static_cast<std::size_t>(std::floor(cfg.spectrum_fmax / bin_hz));
  return std::min(top, fft_size / 2) + 1;
}

}  // namespace

std::string_view feature_kind_name(FeatureKind kind) {
  return kind == FeatureKind::Spectrum ? "spectrum" : "mfcc";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view name) {
  for (FeatureKind kind : kAllFeatureKinds) {
    if (feature_kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

void FeatureConfig::validate(double sample_rate) const {
  const double nyquist = sample_rate / 2.0;
  require(spectrum_fmax > 0.0 && spectrum_fmax <= nyquist, ErrorCode::InvalidSpec,
          "spectrum_fmax must lie in (0, Nyquist]");
  require(mel_bands >= 2, ErrorCode::InvalidSpec, "mel_bands must be at least 2");
  require(mfcc_coeffs >= 1 && mfcc_coeffs <= mel_bands, ErrorCode::InvalidSpec,
          "mfcc_coeffs must lie in [1, mel_bands]");
  require(mfcc_hop >= 1 && mfcc_hop < mfcc_window, ErrorCode::InvalidSpec,
          "mfcc_hop must lie in [1, mfcc_window)");
  require(log_floor > 0.0, ErrorCode::InvalidSpec, "log_floor must be positive");
  require(clip_duration > 0.0, ErrorCode::InvalidSpec, "clip_duration must be positive");
  require(mel_fmax <= nyquist, ErrorCode::InvalidSpec, "mel_fmax exceeds Nyquist");
}

std::size_t feature_dim(FeatureKind kind, const FeatureConfig& cfg, double sample_rate) {
  cfg.validate(sample_rate);
  if (kind == FeatureKind::Mfcc) return cfg.mfcc_coeffs;
  const std::size_t fft_size = next_power_of_two(clip_length(cfg, sample_rate));
  const std::size_t bins = spectrum_bins(cfg, fft_size, sample_rate);
  return cfg.spectrum_bands == 0 ? bins : std::min(cfg.spectrum_bands, bins);
}

FeatureVector spectrum_feature(const Waveform& clip, const FeatureConfig& cfg) {
  check_clip(clip, cfg);
  const MagnitudeSpectrum spectrum = magnitude_spectrum(clip);
  const std::size_t bins = spectrum_bins(cfg, spectrum.fft_size, clip.sample_rate);
  const std::span<const double> kept(spectrum.magnitudes.data(), bins);

  FeatureVector fv;
  fv.kind = FeatureKind::Spectrum;
  if (cfg.spectrum_bands == 0 || cfg.spectrum_bands >= bins) {
    fv.values.assign(kept.begin(), kept.end());
  } else {
    const std::size_t bands = cfg.spectrum_bands;
    fv.values.assign(bands, 0.0);
    for (std::size_t j = 0; j < bands; ++j) {
      const std::size_t begin = j * bins / bands;
      const std::size_t end = (j + 1) * bins / bands;
      double acc = 0.0;
      for (std::size_t b = begin; b < end; ++b) acc += kept[b];
      fv.values[j] = acc / static_cast<double>(end - begin);
    }
  }

  double norm = 0.0;
  for (double v : fv.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : fv.values) v /= norm;
  }
  return fv;
}

FeatureVector mfcc_feature(const Waveform& clip, const FeatureConfig& cfg) {
  check_clip(clip, cfg);
  StftConfig frame_cfg;
  frame_cfg.window_size = cfg.mfcc_window;
  frame_cfg.overlap_ratio =
      static_cast<double>(cfg.mfcc_hop) / static_cast<double>(cfg.mfcc_window);
  frame_cfg.sample_rate = clip.sample_rate;
  const Spectrogram frames = stft(clip, frame_cfg);

  const double fmax = cfg.mel_fmax > 0.0 ? cfg.mel_fmax : clip.sample_rate / 2.0;
  const MelFilterbank fb =
      mel_filterbank(cfg.mel_bands, cfg.mfcc_window, clip.sample_rate, cfg.mel_fmin, fmax);

  FeatureVector fv;
  fv.kind = FeatureKind::Mfcc;
  fv.values.assign(cfg.mfcc_coeffs, 0.0);
  std::vector<double> power(frames.bins());
  std::vector<double> log_energy(cfg.mel_bands);
  for (std::size_t f = 0; f < frames.frames(); ++f) {
    const auto mags = frames.frame(f);
    for (std::size_t b = 0; b < power.size(); ++b) power[b] = mags[b] * mags[b];
    const std::vector<double> energies = fb.apply(power);
    for (std::size_t m = 0; m < energies.size(); ++m) {
      log_energy[m] = std::log(std::max(energies[m], cfg.log_floor));
    }
    const std::vector<double> cepstrum = dct_ii(log_energy);
    for (std::size_t c = 0; c < cfg.mfcc_coeffs; ++c) fv.values[c] += cepstrum[c];
  }
  for (double& v : fv.values) v /= static_cast<double>(frames.frames());
  return fv;
}

FeatureVector extract_feature(FeatureKind kind, const Waveform& clip, const FeatureConfig& cfg) {
  return kind == FeatureKind::Spectrum ? spectrum_feature(clip, cfg) : mfcc_feature(clip, cfg);
}

}  // namespace acoustiprobe
