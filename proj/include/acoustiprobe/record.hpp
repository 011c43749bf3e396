#pragma once

#include <optional>
#include <string>

#include "acoustiprobe/waveform.hpp"

namespace acoustiprobe {

inline constexpr const char* kCompositeLayout = "composite";

/// One measurement: a composite-probe recording at one point of one fruit.
struct LabeledRecord {
  std::string record_id;
  int fruit_id = 0;
  int group_id = 0;
  int point_id = 1;  // 1..4
  double storage_days = 0.0;
  double firmness = 0.0;  // g/mm^2
  std::string wav_path;
  std::string probe_layout = kCompositeLayout;

  bool operator==(const LabeledRecord&) const = default;
};

}  // namespace acoustiprobe
