#include "acoustiprobe/onset_clip.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {
namespace {

double template_target(ProbeKind kind, double i, double m, double f0, double f1,
                       double tone_hz) {
  switch (kind) {
    case ProbeKind::SingleFreq:
    case ProbeKind::MultiFreq:
      return tone_hz;
    case ProbeKind::LinearSweep:
      return f0 + (f1 - f0) * i / m;
    case ProbeKind::ExpSweep:
      // pow(f1/f0, i/M) == exp(log(f1/f0) * i/M), but exact at the endpoints.
      return f0 * std::pow(f1 / f0, i / m);
  }
  fail(ErrorCode::InvalidSpec, "unknown probe kind");
}

std::size_t samples_of(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

Template build_template(ProbeKind kind, std::size_t frames, double f0, double f1,
                        double tone_hz) {
  require(frames >= 1, ErrorCode::InvalidSpec, "template needs at least one frame");
  Template t;
  t.kind = kind;
  t.targets.resize(frames);
  const double m = static_cast<double>(frames);
  for (std::size_t i = 1; i <= frames; ++i) {
    t.targets[i - 1] = template_target(kind, static_cast<double>(i), m, f0, f1, tone_hz);
  }
  return t;
}

Template template_for(const ProbeSpec& spec, const StftConfig& config) {
  spec.validate();
  config.validate();
  const std::size_t frames = config.frame_count(samples_of(spec.duration, spec.sample_rate));
  double tone = kToneTemplateHz;
  if (!spec.tones.empty() &&
      std::find(spec.tones.begin(), spec.tones.end(), kToneTemplateHz) == spec.tones.end()) {
    tone = spec.tones.front();
  }
  return build_template(spec.kind, frames, spec.f0, spec.f1, tone);
}

std::size_t detect_onset(const Spectrogram& spec, const Template& tmpl, std::size_t first,
                         std::size_t last, const OnsetOptions& options) {
  const std::size_t m = tmpl.frames();
  require(m >= 1, ErrorCode::InvalidSpec, "empty template");
  require(spec.frames() >= m + 1, ErrorCode::TooShort,
          "spectrogram of " + std::to_string(spec.frames()) +
              " frames is shorter than the template (" + std::to_string(m + 1) + " needed)");
  last = std::min(last, spec.frames() - m - 1);
  require(first <= last, ErrorCode::TooShort, "empty onset search range");

  std::vector<std::size_t> rows(m);
  const std::size_t top_bin = spec.bins() - 1;
  for (std::size_t i = 0; i < m; ++i) {
    rows[i] = std::min(spec.config().bin_of(tmpl.targets[i]), top_bin);
  }

  std::size_t best_t = first;
  double best_score = -1.0;
  for (std::size_t t = first; t <= last; ++t) {
    double score = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
      const std::size_t bin = rows[i - 1];
      double v = spec.at(t + i, bin);
      if (options.neighbor_max) {
        if (bin > 0) v = std::max(v, spec.at(t + i, bin - 1));
        if (bin < top_bin) v = std::max(v, spec.at(t + i, bin + 1));
      }
      score += v;
    }
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  return best_t;
}

std::size_t detect_onset(const Spectrogram& spec, const Template& tmpl,
                         const OnsetOptions& options) {
  return detect_onset(spec, tmpl, 0, spec.frames(), options);
}

std::array<ClippedSignal, 4> segment_composite(const Waveform& raw, const ProbeSet& probes,
                                               const SegmentOptions& options) {
  const StftConfig& cfg = options.stft;
  cfg.validate();
  for (const ProbeSpec& p : probes) {
    p.validate();
    require(p.sample_rate == raw.sample_rate, ErrorCode::InvalidSpec,
            "probe sample rate differs from the recording's");
  }
  const double rate = raw.sample_rate;
  require(raw.size() >= samples_of(4.0, rate), ErrorCode::TruncatedRecording,
          "recording of " + std::to_string(raw.duration()) + " s is shorter than 4 s");

  const Spectrogram spec = stft(raw, cfg);
  const std::size_t hop = cfg.hop();
  const std::size_t gap = samples_of(options.gap, rate);
  const std::size_t slack = samples_of(options.slack, rate);

  // Samples from the start of slot k to the end of the last probe.
  std::array<std::size_t, 4> tail_span{};
  std::size_t span = 0;
  for (std::size_t k = probes.size(); k-- > 0;) {
    span += samples_of(probes[k].duration, rate);
    tail_span[k] = span;
    span += gap;
  }

  std::array<ClippedSignal, 4> clips;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const Template tmpl = template_for(probes[k], cfg);
    const std::size_t length = samples_of(probes[k].duration, rate);

    std::size_t lo = 0;
    std::size_t hi = 0;
    if (k == 0) {
      require(raw.size() >= tail_span[0], ErrorCode::TruncatedRecording,
              "recording is too short to hold all four probes");
      hi = raw.size() - tail_span[0];
    } else {
      const ClippedSignal& prev = clips[k - 1];
      const std::size_t expected =
          prev.onset_sample + samples_of(probes[k - 1].duration, rate) + gap;
      require(expected + length <= raw.size() + 2 * hop, ErrorCode::TruncatedRecording,
              "recording ends before the expected end of the " +
                  std::string(probe_kind_name(probes[k].kind)) + " probe");
      lo = expected > slack ? expected - slack : 0;
      hi = expected + slack;
    }
    const std::size_t first = (lo + hop - 1) / hop;
    const std::size_t last = hi / hop;
    require(spec.frames() > tmpl.frames() + first, ErrorCode::TruncatedRecording,
            "recording ends before the " + std::string(probe_kind_name(probes[k].kind)) +
                " probe search window");

    ClippedSignal& clip = clips[k];
    clip.source_kind = probes[k].kind;
    clip.onset_frame = detect_onset(spec, tmpl, first, last, options.onset);
    clip.onset_sample = clip.onset_frame * hop;
    require(clip.onset_sample + length <= raw.size(), ErrorCode::TruncatedRecording,
            "clip for the " + std::string(probe_kind_name(probes[k].kind)) +
                " probe runs past the end of the recording");
    if (k > 0) {
      const ClippedSignal& prev = clips[k - 1];
      const std::size_t prev_end = prev.onset_sample + prev.samples.size();
      require(clip.onset_sample + hop >= prev_end, ErrorCode::AmbiguousSegmentation,
              "detected " + std::string(probe_kind_name(probes[k].kind)) +
                  " probe overlaps the preceding clip by more than one hop");
    }
    clip.samples.sample_rate = rate;
    clip.samples.samples.assign(raw.samples.begin() + clip.onset_sample,
                                raw.samples.begin() + clip.onset_sample + length);
  }
  return clips;
}

}  // namespace acoustiprobe
