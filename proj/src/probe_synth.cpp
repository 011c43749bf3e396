#include "acoustiprobe/probe_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t sample_count(double duration, double sample_rate) {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

bool is_sweep(ProbeKind kind) {
  return kind == ProbeKind::LinearSweep || kind == ProbeKind::ExpSweep;
}

void check_common(double duration, double sample_rate, double amplitude) {
  require(sample_rate > 0.0 && std::isfinite(sample_rate), ErrorCode::InvalidSpec,
          "sample rate must be positive");
  require(duration > 0.0 && std::isfinite(duration), ErrorCode::InvalidSpec,
          "probe duration must be positive");
  require(amplitude > 0.0 && amplitude <= 1.0, ErrorCode::InvalidSpec,
          "probe amplitude must lie in (0, 1]");
}

void check_sweep_range(double f0, double f1, double sample_rate) {
  require(f0 > 0.0, ErrorCode::InvalidSpec, "sweep start frequency must be positive");
  require(f0 < f1, ErrorCode::InvalidSpec,
          "sweep start frequency " + std::to_string(f0) +
              " Hz must be below end frequency " + std::to_string(f1) + " Hz");
  require(f1 < sample_rate / 2.0, ErrorCode::InvalidSpec,
          "sweep end frequency " + std::to_string(f1) + " Hz is not below Nyquist");
}

}  // namespace

std::string_view probe_kind_name(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::SingleFreq: return "single";
    case ProbeKind::MultiFreq: return "multi";
    case ProbeKind::LinearSweep: return "linsweep";
    case ProbeKind::ExpSweep: return "expsweep";
  }
  return "unknown";
}

std::optional<ProbeKind> parse_probe_kind(std::string_view name) {
  for (ProbeKind kind : kAllProbeKinds) {
    if (probe_kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

void ProbeSpec::validate() const {
  check_common(duration, sample_rate, amplitude);
  if (is_sweep(kind)) {
    check_sweep_range(f0, f1, sample_rate);
    return;
  }
  require(!tones.empty(), ErrorCode::InvalidSpec, "tone probe needs at least one tone");
  for (double tone : tones) {
    require(tone > 0.0 && tone < sample_rate / 2.0, ErrorCode::InvalidSpec,
            "tone " + std::to_string(tone) + " Hz is outside (0, Nyquist)");
  }
}

ProbeSpec default_probe_spec(ProbeKind kind) {
  ProbeSpec spec;
  spec.kind = kind;
  if (kind == ProbeKind::SingleFreq) spec.tones = {5000.0};
  if (kind == ProbeKind::MultiFreq) spec.tones = {3500.0, 5000.0, 6500.0};
  return spec;
}

ProbeSet default_probe_set() {
  ProbeSet set;
  for (std::size_t i = 0; i < set.size(); ++i) set[i] = default_probe_spec(kCompositeOrder[i]);
  return set;
}

Waveform gen_tones(const std::vector<double>& tones, double duration, double sample_rate,
                   double amplitude) {
  ProbeSpec spec;
  spec.kind = ProbeKind::MultiFreq;
  spec.tones = tones;
  spec.duration = duration;
  spec.sample_rate = sample_rate;
  spec.amplitude = amplitude;
  spec.validate();

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(sample_count(duration, sample_rate), 0.0);
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    double acc = 0.0;
    for (double tone : tones) {
      acc += std::sin(kTwoPi * tone * static_cast<double>(n) / sample_rate);
    }
    out.samples[n] = acc;
  }

  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double scale = amplitude / peak;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

double instantaneous_frequency(const ProbeSpec& spec, double t) {
  switch (spec.kind) {
    case ProbeKind::LinearSweep:
      return spec.f0 + (spec.f1 - spec.f0) * t / spec.duration;
    case ProbeKind::ExpSweep:
      return spec.f0 * std::exp(std::log(spec.f1 / spec.f0) * t / spec.duration);
    case ProbeKind::SingleFreq:
    case ProbeKind::MultiFreq:
      break;
  }
  return spec.tones.empty() ? 0.0 : spec.tones.front();
}

Waveform gen_sweep(ProbeKind kind, double f0, double f1, double duration, double sample_rate,
                   double amplitude) {
  require(is_sweep(kind), ErrorCode::InvalidSpec, "gen_sweep needs a sweep kind");
  check_common(duration, sample_rate, amplitude);
  check_sweep_range(f0, f1, sample_rate);

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(sample_count(duration, sample_rate));

  const double log_ratio = std::log(f1 / f0);
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    double phase = 0.0;
    if (kind == ProbeKind::LinearSweep) {
      phase = kTwoPi * (f0 * t + (f1 - f0) * t * t / (2.0 * duration));
    } else {
      phase = kTwoPi * f0 * duration / log_ratio * (std::exp(t / duration * log_ratio) - 1.0);
    }
    out.samples[n] = amplitude * std::sin(phase);
  }
  return out;
}

Waveform synthesize(const ProbeSpec& spec) {
  spec.validate();
  if (is_sweep(spec.kind)) {
    return gen_sweep(spec.kind, spec.f0, spec.f1, spec.duration, spec.sample_rate,
                     spec.amplitude);
  }
  return gen_tones(spec.tones, spec.duration, spec.sample_rate, spec.amplitude);
}

namespace {

void check_composite(double gap, const ProbeSet& specs) {
  require(gap >= 0.0 && std::isfinite(gap), ErrorCode::InvalidSpec,
          "composite gap must be non-negative");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    require(specs[i].kind == kCompositeOrder[i], ErrorCode::InvalidSpec,
            "composite slot " + std::to_string(i) + " must hold the " +
                std::string(probe_kind_name(kCompositeOrder[i])) + " probe");
    require(specs[i].sample_rate == specs[0].sample_rate, ErrorCode::InvalidSpec,
            "composite probes have mismatched sample rates");
  }
}

}  // namespace

std::size_t composite_probe_offset(double gap, const ProbeSet& specs, std::size_t slot) {
  check_composite(gap, specs);
  const double rate = specs[0].sample_rate;
  const std::size_t gap_samples = sample_count(gap, rate);
  std::size_t offset = gap_samples;
  for (std::size_t i = 0; i < slot && i < specs.size(); ++i) {
    offset += sample_count(specs[i].duration, rate) + gap_samples;
  }
  return offset;
}

Waveform gen_composite(double gap, const ProbeSet& specs) {
  check_composite(gap, specs);
  const double rate = specs[0].sample_rate;
  const std::size_t gap_samples = sample_count(gap, rate);

  Waveform out;
  out.sample_rate = rate;
  out.samples.assign(gap_samples, 0.0);
  for (const ProbeSpec& spec : specs) {
    const Waveform probe = synthesize(spec);
    out.samples.insert(out.samples.end(), probe.samples.begin(), probe.samples.end());
    out.samples.insert(out.samples.end(), gap_samples, 0.0);
  }
  return out;
}

}  // namespace acoustiprobe
