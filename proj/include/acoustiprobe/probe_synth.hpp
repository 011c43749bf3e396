#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "acoustiprobe/waveform.hpp"

namespace acoustiprobe {

enum class ProbeKind { SingleFreq, MultiFreq, LinearSweep, ExpSweep };

inline constexpr std::array<ProbeKind, 4> kAllProbeKinds = {
    ProbeKind::SingleFreq, ProbeKind::MultiFreq, ProbeKind::LinearSweep,
    ProbeKind::ExpSweep};

/// Order in which the probes are joined inside one composite recording.
inline constexpr std::array<ProbeKind, 4> kCompositeOrder = {
    ProbeKind::SingleFreq, ProbeKind::ExpSweep, ProbeKind::LinearSweep,
    ProbeKind::MultiFreq};

/// CLI token: single | multi | linsweep | expsweep.
std::string_view probe_kind_name(ProbeKind kind);
std::optional<ProbeKind> parse_probe_kind(std::string_view name);

struct ProbeSpec {
  ProbeKind kind = ProbeKind::ExpSweep;
  double sample_rate = kCanonicalSampleRate;
  double duration = 1.0;  // seconds
  double f0 = 100.0;      // sweep start, Hz
  double f1 = 10000.0;    // sweep end, Hz
  std::vector<double> tones;  // tone probes only
  double amplitude = 0.9;

  /// Throws invalid-spec when frequencies, duration or amplitude are out of range.
  void validate() const;

  bool operator==(const ProbeSpec&) const = default;
};

/// Defaults for one kind: 5000 Hz single tone, 3500/5000/6500 Hz multi tone,
/// 100 Hz to 10 kHz sweeps, 1 s at 48 kHz.
ProbeSpec default_probe_spec(ProbeKind kind);

/// Probe specs laid out in kCompositeOrder.
using ProbeSet = std::array<ProbeSpec, 4>;
ProbeSet default_probe_set();

/// Equal-weight sum of sines rescaled so that the peak magnitude equals amplitude.
Waveform gen_tones(const std::vector<double>& tones, double duration,
                   double sample_rate, double amplitude);

/// Linear or exponential sine sweep from f0 to f1 over duration seconds.
Waveform gen_sweep(ProbeKind kind, double f0, double f1, double duration,
                   double sample_rate, double amplitude);

/// Instantaneous frequency (Hz) of a sweep at time t; tones return their first tone.
double instantaneous_frequency(const ProbeSpec& spec, double t);

Waveform synthesize(const ProbeSpec& spec);

/// gap seconds of silence, probe, gap, probe, ... , probe, gap.
/// The set must be in kCompositeOrder and share one sample rate.
Waveform gen_composite(double gap, const ProbeSet& specs);

/// Sample index at which the probe in composite slot `slot` starts.
std::size_t composite_probe_offset(double gap, const ProbeSet& specs, std::size_t slot);

}  // namespace acoustiprobe
