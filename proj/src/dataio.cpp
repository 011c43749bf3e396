#include "acoustiprobe/dataio.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  require(!in.bad(), ErrorCode::Io, "read failed for " + path.string());
  return buf.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      fail(ErrorCode::Io, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move temp file onto " + path.string());
  }
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t get_u32(const std::string& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + static_cast<std::size_t>(i)]);
  return v;
}

[[noreturn]] void malformed(std::size_t offset, const std::string& what) {
  fail(ErrorCode::Parse, "malformed RIFF at byte " + std::to_string(offset) + ": " + what);
}

}  // namespace

std::string encode_wav(const Waveform& wave) {
  require(wave.sample_rate == kCanonicalSampleRate, ErrorCode::UnsupportedFormat,
          "sample_rate " + format_double(wave.sample_rate) + " is not 48000");
  const auto data_bytes = static_cast<std::uint32_t>(wave.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, 48000);
  put_u32(out, 48000 * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : wave.samples) {
    require(std::isfinite(s), ErrorCode::InvalidInput, "cannot write a non-finite sample");
    const long scaled = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto code = static_cast<std::int16_t>(std::clamp(scaled, -32768L, 32767L));
    put_u16(out, static_cast<std::uint16_t>(code));
  }
  return out;
}

Waveform decode_wav(const std::string& b) {
  if (b.size() < 12) malformed(b.size(), "file shorter than the RIFF header");
  if (b.compare(0, 4, "RIFF") != 0) malformed(0, "missing RIFF tag");
  if (b.compare(8, 4, "WAVE") != 0) malformed(8, "missing WAVE tag");

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size()) malformed(pos, "truncated fmt chunk");
      const std::uint16_t format = get_u16(b, body);
      const std::uint16_t channels = get_u16(b, body + 2);
      const std::uint32_t rate = get_u32(b, body + 4);
      const std::uint16_t bits = get_u16(b, body + 14);
      require(format == kFormatPcm, ErrorCode::UnsupportedFormat,
              "audio_format " + std::to_string(format) + " is not PCM (1)");
      require(channels == 1, ErrorCode::UnsupportedFormat,
              "channels " + std::to_string(channels) + " is not mono (1)");
      require(rate == 48000, ErrorCode::UnsupportedFormat,
              "sample_rate " + std::to_string(rate) + " is not 48000");
      require(bits == 16, ErrorCode::UnsupportedFormat,
              "bits_per_sample " + std::to_string(bits) + " is not 16");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) malformed(pos, "data chunk before fmt chunk");
      if (body + size > b.size()) malformed(pos, "data chunk runs past end of file");
      if (size % 2 != 0) malformed(pos, "odd data chunk size for 16-bit samples");
      Waveform wave;
      wave.sample_rate = kCanonicalSampleRate;
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto code = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
        wave.samples[i] = static_cast<double>(code) / 32768.0;
      }
      return wave;
    }
    pos = body + size + (size & 1u);
  }
  malformed(std::min(pos, b.size()), have_fmt ? "no data chunk" : "no fmt chunk");
}

Waveform read_wav(const fs::path& path) {
  require(fs::exists(path), ErrorCode::Io, "no such file: " + path.string());
  try {
    return decode_wav(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_wav(const fs::path& path, const Waveform& wave) {
  write_file_atomic(path, encode_wav(wave));
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  require(!quoted, ErrorCode::Parse, "manifest row " + std::to_string(row) + ": unterminated quote");
  return fields;
}

template <typename T>
T parse_number(const std::string& text, std::size_t row, const std::string& column) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  bool ok = ec == std::errc() && ptr == end && !text.empty();
  if constexpr (std::is_floating_point_v<T>) ok = ok && std::isfinite(value);
  require(ok, ErrorCode::Parse,
          "manifest row " + std::to_string(row) + ": column " + column + " value \"" + text +
              "\" is not a valid number");
  return value;
}

}  // namespace

fs::path resolve_wav_path(const fs::path& manifest, const LabeledRecord& record) {
  const fs::path wav(record.wav_path);
  if (wav.is_absolute()) return wav;
  return manifest.parent_path() / wav;
}

void write_manifest(const fs::path& path, const std::vector<LabeledRecord>& records) {
  std::string out = kManifestHeader;
  out += '\n';
  for (const LabeledRecord& r : records) {
    out += csv_field(r.record_id) + ',' + std::to_string(r.fruit_id) + ',' +
           std::to_string(r.group_id) + ',' + std::to_string(r.point_id) + ',' +
           format_double(r.storage_days) + ',' + format_double(r.firmness) + ',' +
           csv_field(r.wav_path) + ',' + csv_field(r.probe_layout) + '\n';
  }
  write_file_atomic(path, out);
}

std::vector<LabeledRecord> read_manifest(const fs::path& path, const ManifestReadOptions& options) {
  std::istringstream in(read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse,
          "manifest " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line, 1);
  const std::vector<std::string> expected = split_csv_line(kManifestHeader, 1);
  for (const std::string& column : expected) {
    require(std::find(header.begin(), header.end(), column) != header.end(), ErrorCode::Parse,
            "manifest row 1: missing column " + column);
  }
  auto column_index = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };

  std::vector<LabeledRecord> records;
  std::set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line, row);
    require(f.size() == header.size(), ErrorCode::Parse,
            "manifest row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                " fields, found " + std::to_string(f.size()));
    auto field = [&](const char* name) -> const std::string& { return f[column_index(name)]; };

    LabeledRecord r;
    r.record_id = field("record_id");
    r.fruit_id = parse_number<int>(field("fruit_id"), row, "fruit_id");
    r.group_id = parse_number<int>(field("group_id"), row, "group_id");
    r.point_id = parse_number<int>(field("point_id"), row, "point_id");
    r.storage_days = parse_number<double>(field("storage_days"), row, "storage_days");
    r.firmness = parse_number<double>(field("firmness_g_mm2"), row, "firmness_g_mm2");
    r.wav_path = field("wav_path");
    r.probe_layout = field("probe_layout");
    require(!r.record_id.empty(), ErrorCode::Parse,
            "manifest row " + std::to_string(row) + ": empty record_id");
    require(seen.insert(r.record_id).second, ErrorCode::Parse,
            "manifest row " + std::to_string(row) + ": duplicate record_id " + r.record_id);
    if (options.require_wavs) {
      const fs::path wav = resolve_wav_path(path, r);
      require(fs::exists(wav), ErrorCode::Io,
              "manifest row " + std::to_string(row) + ": missing WAV " + wav.string());
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Models

namespace {

json scaler_to_json(const Scaler& s) { return {{"means", s.means}, {"stds", s.stds}}; }

Scaler scaler_from_json(const json& j) {
  Scaler s;
  s.means = j.at("means").get<std::vector<double>>();
  s.stds = j.at("stds").get<std::vector<double>>();
  require(s.means.size() == s.stds.size(), ErrorCode::Parse, "scaler means/stds size mismatch");
  return s;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json feature_config_to_json(const FeatureConfig& c) {
  return {{"spectrum_bands", c.spectrum_bands}, {"spectrum_fmax", c.spectrum_fmax},
          {"mfcc_window", c.mfcc_window},       {"mfcc_hop", c.mfcc_hop},
          {"mel_bands", c.mel_bands},           {"mfcc_coeffs", c.mfcc_coeffs},
          {"mel_fmin", c.mel_fmin},             {"mel_fmax", c.mel_fmax},
          {"log_floor", c.log_floor},           {"clip_duration", c.clip_duration}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig c;
  j.at("spectrum_bands").get_to(c.spectrum_bands);
  j.at("spectrum_fmax").get_to(c.spectrum_fmax);
  j.at("mfcc_window").get_to(c.mfcc_window);
  j.at("mfcc_hop").get_to(c.mfcc_hop);
  j.at("mel_bands").get_to(c.mel_bands);
  j.at("mfcc_coeffs").get_to(c.mfcc_coeffs);
  j.at("mel_fmin").get_to(c.mel_fmin);
  j.at("mel_fmax").get_to(c.mel_fmax);
  j.at("log_floor").get_to(c.log_floor);
  j.at("clip_duration").get_to(c.clip_duration);
  return c;
}

json model_to_json(const SvrModel& m) {
  json doc;
  doc["kind"] = "svr";
  doc["hyperparameters"] = {{"C", m.params.c},
                            {"epsilon", m.params.epsilon},
                            {"gamma", m.params.gamma},
                            {"kernel", kernel_kind_name(m.params.kernel)},
                            {"tolerance", m.params.tolerance},
                            {"max_iterations", m.params.max_iterations}};
  doc["scaler"] = scaler_to_json(m.scaler);
  doc["parameters"] = {{"target_mean", m.target_mean},
                       {"target_std", m.target_std},
                       {"dim", m.scaler.dim()},
                       {"support_vectors", matrix_to_json(m.support_vectors)},
                       {"dual_coeffs", m.dual_coeffs},
                       {"bias", m.bias},
                       {"converged", m.converged},
                       {"final_violation", m.final_violation},
                       {"iterations", m.iterations}};
  return doc;
}

json model_to_json(const GbrModel& m) {
  json doc;
  doc["kind"] = "gbr";
  doc["hyperparameters"] = {{"n_trees", m.params.n_trees},
                            {"learning_rate", m.params.learning_rate},
                            {"max_depth", m.params.max_depth},
                            {"min_samples_leaf", m.params.min_samples_leaf},
                            {"subsample", m.params.subsample},
                            {"seed", m.params.seed}};
  doc["scaler"] = scaler_to_json(m.scaler);
  json trees = json::array();
  for (const RegressionTree& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  doc["parameters"] = {{"base_value", m.base_value}, {"trees", std::move(trees)},
                       {"train_mse", m.train_mse}};
  return doc;
}

SvrModel svr_from_json(const json& doc) {
  SvrModel m;
  const json& h = doc.at("hyperparameters");
  h.at("C").get_to(m.params.c);
  h.at("epsilon").get_to(m.params.epsilon);
  h.at("gamma").get_to(m.params.gamma);
  const auto kernel = parse_kernel_kind(h.at("kernel").get<std::string>());
  require(kernel.has_value(), ErrorCode::Parse, "unknown SVR kernel");
  m.params.kernel = *kernel;
  h.at("tolerance").get_to(m.params.tolerance);
  h.at("max_iterations").get_to(m.params.max_iterations);
  m.scaler = scaler_from_json(doc.at("scaler"));
  const json& p = doc.at("parameters");
  p.at("target_mean").get_to(m.target_mean);
  p.at("target_std").get_to(m.target_std);
  const auto dim = p.at("dim").get<std::size_t>();
  require(dim == m.scaler.dim(), ErrorCode::Parse, "SVR dim disagrees with scaler");
  const json& svs = p.at("support_vectors");
  m.support_vectors = Matrix(svs.size(), dim);
  for (std::size_t r = 0; r < svs.size(); ++r) {
    const auto row = svs[r].get<std::vector<double>>();
    require(row.size() == dim, ErrorCode::Parse, "support vector of wrong dimension");
    std::copy(row.begin(), row.end(), m.support_vectors.row(r).begin());
  }
  m.dual_coeffs = p.at("dual_coeffs").get<std::vector<double>>();
  require(m.dual_coeffs.size() == svs.size(), ErrorCode::Parse,
          "dual coefficient count disagrees with support vectors");
  p.at("bias").get_to(m.bias);
  p.at("converged").get_to(m.converged);
  p.at("final_violation").get_to(m.final_violation);
  p.at("iterations").get_to(m.iterations);
  return m;
}

GbrModel gbr_from_json(const json& doc) {
  GbrModel m;
  const json& h = doc.at("hyperparameters");
  h.at("n_trees").get_to(m.params.n_trees);
  h.at("learning_rate").get_to(m.params.learning_rate);
  h.at("max_depth").get_to(m.params.max_depth);
  h.at("min_samples_leaf").get_to(m.params.min_samples_leaf);
  h.at("subsample").get_to(m.params.subsample);
  h.at("seed").get_to(m.params.seed);
  m.scaler = scaler_from_json(doc.at("scaler"));
  const json& p = doc.at("parameters");
  p.at("base_value").get_to(m.base_value);
  m.train_mse = p.at("train_mse").get<std::vector<double>>();
  const int dim = static_cast<int>(m.scaler.dim());
  for (const json& jt : p.at("trees")) {
    RegressionTree t;
    t.max_depth = m.params.max_depth;
    t.min_samples_leaf = m.params.min_samples_leaf;
    const int count = static_cast<int>(jt.size());
    require(count > 0, ErrorCode::Parse, "tree without nodes");
    for (const json& jn : jt) {
      RegressionTree::Node n;
      jn.at(0).get_to(n.feature);
      jn.at(1).get_to(n.threshold);
      jn.at(2).get_to(n.left);
      jn.at(3).get_to(n.right);
      jn.at(4).get_to(n.value);
      if (!n.is_leaf()) {
        require(n.feature < dim && n.left > 0 && n.left < count && n.right > 0 && n.right < count,
                ErrorCode::Parse, "tree node references out of range");
      }
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace

std::string serialize_model(const Model& model, const std::optional<PipelineInfo>& pipeline) {
  json doc = std::visit([](const auto& m) { return model_to_json(m); }, model);
  doc["schema_version"] = kModelSchemaVersion;
  if (pipeline) {
    doc["pipeline"] = {{"probe", probe_kind_name(pipeline->probe)},
                       {"feature", feature_kind_name(pipeline->feature)},
                       {"target", pipeline->target},
                       {"gap", pipeline->gap},
                       {"feature_config", feature_config_to_json(pipeline->features)}};
  }
  return doc.dump(1) + "\n";
}

ModelDocument deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("model JSON: ") + e.what());
  }
  try {
    require(doc.is_object() && doc.contains("schema_version"), ErrorCode::Parse,
            "model JSON has no schema_version");
    const int version = doc.at("schema_version").get<int>();
    require(version == kModelSchemaVersion, ErrorCode::IncompatibleVersion,
            "model schema_version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kModelSchemaVersion) + ")");
    ModelDocument out{SvrModel{}, std::nullopt};
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "svr") {
      out.model = svr_from_json(doc);
    } else if (kind == "gbr") {
      out.model = gbr_from_json(doc);
    } else {
      fail(ErrorCode::Parse, "unknown model kind " + kind);
    }
    if (doc.contains("pipeline")) {
      const json& p = doc.at("pipeline");
      PipelineInfo info;
      const auto probe = parse_probe_kind(p.at("probe").get<std::string>());
      const auto feature = parse_feature_kind(p.at("feature").get<std::string>());
      require(probe && feature, ErrorCode::Parse, "unknown probe or feature in model pipeline");
      info.probe = *probe;
      info.feature = *feature;
      p.at("target").get_to(info.target);
      p.at("gap").get_to(info.gap);
      info.features = feature_config_from_json(p.at("feature_config"));
      out.pipeline = info;
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("model JSON: ") + e.what());
  }
}

void save_model(const fs::path& path, const Model& model, const std::optional<PipelineInfo>& pipeline) {
  write_file_atomic(path, serialize_model(model, pipeline));
}

ModelDocument load_model(const fs::path& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace acoustiprobe
