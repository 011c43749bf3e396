#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acoustiprobe/features.hpp"
#include "acoustiprobe/record.hpp"
#include "acoustiprobe/regression.hpp"

namespace acoustiprobe {

// WAV: PCM signed 16-bit, mono, 48 kHz, little-endian RIFF/WAVE only.

/// Samples are code / 32768.
Waveform read_wav(const std::filesystem::path& path);
/// Quantises with round(x * 32768) clamped to the int16 range, so a read-back
/// differs from the input by at most 1/32768. Writes via temp file + rename.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Exact bytes write_wav would produce.
std::string encode_wav(const Waveform& wave);
Waveform decode_wav(const std::string& bytes);

// Manifest CSV.

inline constexpr const char* kManifestHeader =
    "record_id,fruit_id,group_id,point_id,storage_days,firmness_g_mm2,wav_path,probe_layout";

struct ManifestReadOptions {
  bool require_wavs = true;  // fail when a referenced WAV does not exist
};

std::vector<LabeledRecord> read_manifest(const std::filesystem::path& path,
                                         const ManifestReadOptions& options = {});
void write_manifest(const std::filesystem::path& path, const std::vector<LabeledRecord>& records);

/// wav_path resolved against the manifest's directory when relative.
std::filesystem::path resolve_wav_path(const std::filesystem::path& manifest,
                                       const LabeledRecord& record);

// Model persistence.

inline constexpr int kModelSchemaVersion = 1;

/// How a model's inputs were produced; carried alongside the model so that
/// `predict` can rebuild the same feature.
struct PipelineInfo {
  ProbeKind probe = ProbeKind::ExpSweep;
  FeatureKind feature = FeatureKind::Spectrum;
  std::string target;  // "storage_days" | "firmness"
  FeatureConfig features;
  double gap = 0.5;
};

struct ModelDocument {
  Model model;
  std::optional<PipelineInfo> pipeline;
};

std::string serialize_model(const Model& model, const std::optional<PipelineInfo>& pipeline = {});
ModelDocument deserialize_model(const std::string& text);

void save_model(const std::filesystem::path& path, const Model& model,
                const std::optional<PipelineInfo>& pipeline = {});
ModelDocument load_model(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes text to path through a sibling temp file and an atomic rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace acoustiprobe
