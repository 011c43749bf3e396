#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "acoustiprobe/dsp_core.hpp"
#include "acoustiprobe/probe_synth.hpp"

namespace acoustiprobe {

/// Expected probe frequency per spectrogram frame, S(1..M).
struct Template {
  ProbeKind kind = ProbeKind::SingleFreq;
  std::vector<double> targets;  // targets[i - 1] = S(i), Hz

  std::size_t frames() const noexcept { return targets.size(); }
};

inline constexpr double kToneTemplateHz = 5000.0;

/// constant:    S(i) = tone_hz
/// linear:      S(i) = f0 + (f1 - f0) i / M
/// exponential: S(i) = f0 exp(log(f1 / f0) i / M)
Template build_template(ProbeKind kind, std::size_t frames, double f0, double f1,
                        double tone_hz = kToneTemplateHz);

/// Template for a probe spec under a framing config; M is the number of
/// full frames in the probe's duration.
Template template_for(const ProbeSpec& spec, const StftConfig& config);

struct OnsetOptions {
  /// Take the max over the nearest bin and its two neighbours instead of the
  /// nearest bin alone.
  bool neighbor_max = false;
};

/// argmax over t of sum_{i=1..M} F(t + i, bin(S(i))), restricted to
/// t in [first, last]. Ties go to the smallest t.
std::size_t detect_onset(const Spectrogram& spec, const Template& tmpl, std::size_t first,
                         std::size_t last, const OnsetOptions& options = {});

/// Full search range t in [0, frames - M - 1].
std::size_t detect_onset(const Spectrogram& spec, const Template& tmpl,
                         const OnsetOptions& options = {});

struct ClippedSignal {
  Waveform samples;
  std::size_t onset_frame = 0;
  std::size_t onset_sample = 0;
  ProbeKind source_kind = ProbeKind::SingleFreq;
};

struct SegmentOptions {
  double gap = 0.5;    // nominal silence between probes, seconds
  double slack = 0.5;  // search half-width around the nominal next onset, seconds
  StftConfig stft;
  OnsetOptions onset;
};

/// Locates the four probes of a composite recording in kCompositeOrder and cuts
/// one probe duration from each detected onset (sample t* * hop).
std::array<ClippedSignal, 4> segment_composite(const Waveform& raw, const ProbeSet& probes,
                                               const SegmentOptions& options = {});

}  // namespace acoustiprobe
