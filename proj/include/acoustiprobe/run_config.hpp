#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "acoustiprobe/evaluation.hpp"
#include "acoustiprobe/features.hpp"
#include "acoustiprobe/fruit_sim.hpp"
#include "acoustiprobe/onset_clip.hpp"
#include "acoustiprobe/regression.hpp"

namespace acoustiprobe {

/// Every tunable default of the pipeline, addressable as "section.name".
struct RunConfig {
  double gap = 0.5;
  double probe_amplitude = 0.9;
  double sweep_f0 = 100.0;
  double sweep_f1 = 10000.0;
  double segment_slack = 0.5;
  bool onset_neighbor_max = false;
  std::size_t stft_window = 512;
  double stft_overlap = 0.5;
  FeatureConfig features;
  SvrParams svr;
  GbrParams gbr;
  SimFruitParams sim;
  std::size_t folds = 3;
  bool stratify_by_day = true;
  std::uint64_t seed = 0;

  /// Throws invalid-input for unknown keys or unparseable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  std::vector<std::string> keys() const;

  /// One "key=value" line per setting, sorted by key.
  std::string dump() const;

  ProbeSet probe_set() const;
  SegmentOptions segment_options() const;
  GridConfig grid_config(std::size_t threads) const;
};

/// Applies "key=value" lines; blank lines and '#' comments are ignored.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace acoustiprobe
