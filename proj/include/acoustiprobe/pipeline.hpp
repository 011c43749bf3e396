#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acoustiprobe/features.hpp"
#include "acoustiprobe/onset_clip.hpp"
#include "acoustiprobe/record.hpp"

namespace acoustiprobe {

/// Position of a probe kind inside kCompositeOrder.
std::size_t composite_slot(ProbeKind kind);

/// Both feature kinds for each of the four probes of one recording.
struct RecordFeatures {
  std::array<std::array<FeatureVector, 2>, 4> by_slot;  // [composite slot][feature kind]

  const FeatureVector& get(ProbeKind probe, FeatureKind feature) const {
    return by_slot[composite_slot(probe)][static_cast<std::size_t>(feature)];
  }
};

RecordFeatures extract_record_features(const Waveform& recording, const ProbeSet& probes,
                                       const SegmentOptions& segment, const FeatureConfig& features);

/// Features for a labelled dataset; records whose recording could not be
/// segmented or featurised carry std::nullopt and a reason.
struct FeatureTable {
  std::vector<LabeledRecord> records;
  std::vector<std::optional<RecordFeatures>> features;
  std::vector<std::string> skip_reasons;  // empty string when not skipped

  std::size_t skipped() const;
};

using RecordingLoader = std::function<Waveform(std::size_t)>;

FeatureTable build_feature_table(const std::vector<LabeledRecord>& records,
                                 const RecordingLoader& load, const ProbeSet& probes,
                                 const SegmentOptions& segment, const FeatureConfig& features,
                                 std::size_t threads = 1);

}  // namespace acoustiprobe
