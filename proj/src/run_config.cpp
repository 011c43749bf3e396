#include "acoustiprobe/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "acoustiprobe/dataio.hpp"
#include "acoustiprobe/error.hpp"

namespace acoustiprobe {
namespace {

struct Field {
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::InvalidInput,
       "config value \"" + std::string(value) + "\" is not valid for " + std::string(key));
}

double parse_double(std::string_view key, std::string_view value) {
  if (value == "inf" || value == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value);
  }
  return out;
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::string show(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

Field real(double& ref) {
  return {[&ref](std::string_view v) { ref = parse_double("", v); }, [&ref] { return show(ref); }};
}

template <typename T>
Field whole(T& ref) {
  return {[&ref](std::string_view v) { ref = parse_unsigned<T>("", v); },
          [&ref] { return std::to_string(ref); }};
}

Field flag(bool& ref) {
  return {[&ref](std::string_view v) { ref = parse_bool("", v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

std::map<std::string, Field, std::less<>> fields_of(RunConfig& c) {
  std::map<std::string, Field, std::less<>> f;
  f["probe.gap"] = real(c.gap);
  f["probe.amplitude"] = real(c.probe_amplitude);
  f["probe.f0"] = real(c.sweep_f0);
  f["probe.f1"] = real(c.sweep_f1);
  f["onset.slack"] = real(c.segment_slack);
  f["onset.neighbor_max"] = flag(c.onset_neighbor_max);
  f["onset.window"] = whole(c.stft_window);
  f["onset.overlap"] = real(c.stft_overlap);

  f["features.spectrum_bands"] = whole(c.features.spectrum_bands);
  f["features.spectrum_fmax"] = real(c.features.spectrum_fmax);
  f["features.mfcc_window"] = whole(c.features.mfcc_window);
  f["features.mfcc_hop"] = whole(c.features.mfcc_hop);
  f["features.mel_bands"] = whole(c.features.mel_bands);
  f["features.mfcc_coeffs"] = whole(c.features.mfcc_coeffs);
  f["features.mel_fmin"] = real(c.features.mel_fmin);
  f["features.mel_fmax"] = real(c.features.mel_fmax);
  f["features.log_floor"] = real(c.features.log_floor);

  f["svr.C"] = real(c.svr.c);
  f["svr.epsilon"] = real(c.svr.epsilon);
  f["svr.gamma"] = real(c.svr.gamma);
  f["svr.tolerance"] = real(c.svr.tolerance);
  f["svr.max_iterations"] = whole(c.svr.max_iterations);
  KernelKind& kernel = c.svr.kernel;
  f["svr.kernel"] = {[&kernel](std::string_view v) {
                       const auto k = parse_kernel_kind(v);
                       if (!k) bad_value("svr.kernel", v);
                       kernel = *k;
                     },
                     [&kernel] { return std::string(kernel_kind_name(kernel)); }};

  f["gbr.n_trees"] = whole(c.gbr.n_trees);
  f["gbr.learning_rate"] = real(c.gbr.learning_rate);
  f["gbr.max_depth"] = whole(c.gbr.max_depth);
  f["gbr.min_samples_leaf"] = whole(c.gbr.min_samples_leaf);
  f["gbr.subsample"] = real(c.gbr.subsample);
  f["gbr.seed"] = whole(c.gbr.seed);

  f["sim.f_res0"] = real(c.sim.f_res0);
  f["sim.f_drift"] = real(c.sim.f_drift);
  f["sim.q0"] = real(c.sim.q0);
  f["sim.q_decay"] = real(c.sim.q_decay);
  f["sim.firmness0"] = real(c.sim.firmness0);
  f["sim.firmness_decay"] = real(c.sim.firmness_decay);
  f["sim.firmness_noise"] = real(c.sim.firmness_noise);
  f["sim.gain_jitter_db"] = real(c.sim.gain_jitter_db);
  f["sim.snr_db"] = real(c.sim.snr_db);
  f["sim.leading_silence"] = real(c.sim.leading_silence);
  f["sim.fruit_perturbation"] = real(c.sim.fruit_perturbation);
  f["sim.direct_path_db"] = real(c.sim.direct_path_db);
  f["sim.capture_level"] = real(c.sim.capture_level);

  f["cv.folds"] = whole(c.folds);
  f["cv.stratify_by_day"] = flag(c.stratify_by_day);
  f["seed"] = whole(c.seed);
  return f;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  auto fields = fields_of(*this);
  const auto it = fields.find(key);
  require(it != fields.end(), ErrorCode::InvalidInput, "unknown config key " + std::string(key));
  try {
    it->second.set(value);
  } catch (const Error&) {
    bad_value(key, value);
  }
}

std::string RunConfig::get(std::string_view key) const {
  auto fields = fields_of(const_cast<RunConfig&>(*this));
  const auto it = fields.find(key);
  require(it != fields.end(), ErrorCode::InvalidInput, "unknown config key " + std::string(key));
  return it->second.get();
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields_of(const_cast<RunConfig&>(*this))) out.push_back(key);
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, field] : fields_of(const_cast<RunConfig&>(*this))) {
    out += key + "=" + field.get() + "\n";
  }
  return out;
}

ProbeSet RunConfig::probe_set() const {
  ProbeSet set = default_probe_set();
  for (ProbeSpec& p : set) {
    p.amplitude = probe_amplitude;
    p.f0 = sweep_f0;
    p.f1 = sweep_f1;
    p.sample_rate = sim.sample_rate;
    p.validate();
  }
  return set;
}

SegmentOptions RunConfig::segment_options() const {
  SegmentOptions o;
  o.gap = gap;
  o.slack = segment_slack;
  o.stft.window_size = stft_window;
  o.stft.overlap_ratio = stft_overlap;
  o.stft.sample_rate = sim.sample_rate;
  o.onset.neighbor_max = onset_neighbor_max;
  o.stft.validate();
  return o;
}

GridConfig RunConfig::grid_config(std::size_t threads) const {
  GridConfig g;
  g.svr = svr;
  g.gbr = gbr;
  g.k = folds;
  g.seed = seed;
  g.stratify_by_day = stratify_by_day;
  g.threads = threads;
  return g;
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string_view::npos, ErrorCode::Parse,
            "config line " + std::to_string(line_no) + " is not key=value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  apply_config_text(config, read_file(path));
}

}  // namespace acoustiprobe
