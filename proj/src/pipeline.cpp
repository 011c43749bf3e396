#include "acoustiprobe/pipeline.hpp"

#include <algorithm>

#include "acoustiprobe/error.hpp"
#include "acoustiprobe/parallel.hpp"

namespace acoustiprobe {

std::size_t composite_slot(ProbeKind kind) {
  const auto it = std::find(kCompositeOrder.begin(), kCompositeOrder.end(), kind);
  return static_cast<std::size_t>(it - kCompositeOrder.begin());
}

RecordFeatures extract_record_features(const Waveform& recording, const ProbeSet& probes,
                                       const SegmentOptions& segment,
                                       const FeatureConfig& features) {
  const auto clips = segment_composite(recording, probes, segment);
  RecordFeatures out;
  for (std::size_t slot = 0; slot < clips.size(); ++slot) {
    for (FeatureKind kind : kAllFeatureKinds) {
      out.by_slot[slot][static_cast<std::size_t>(kind)] =
          extract_feature(kind, clips[slot].samples, features);
    }
  }
  return out;
}

std::size_t FeatureTable::skipped() const {
  return static_cast<std::size_t>(
      std::count_if(features.begin(), features.end(), [](const auto& f) { return !f; }));
}

FeatureTable build_feature_table(const std::vector<LabeledRecord>& records,
                                 const RecordingLoader& load, const ProbeSet& probes,
                                 const SegmentOptions& segment, const FeatureConfig& features,
                                 std::size_t threads) {
  FeatureTable table;
  table.records = records;
  table.features.resize(records.size());
  table.skip_reasons.resize(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    try {
      table.features[i] = extract_record_features(load(i), probes, segment, features);
    } catch (const Error& e) {
      // Unreadable or unsegmentable recordings are skipped, not fatal.
      if (e.code() == ErrorCode::InvalidSpec) throw;
      table.skip_reasons[i] = std::string(error_code_name(e.code())) + ": " + e.what();
    }
  });
  return table;
}

}  // namespace acoustiprobe
