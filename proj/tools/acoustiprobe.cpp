#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acoustiprobe/dataio.hpp"
#include "acoustiprobe/error.hpp"
#include "acoustiprobe/evaluation.hpp"
#include "acoustiprobe/fruit_sim.hpp"
#include "acoustiprobe/parallel.hpp"
#include "acoustiprobe/pipeline.hpp"
#include "acoustiprobe/run_config.hpp"

using namespace acoustiprobe;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_file;
  std::optional<std::size_t> threads;
};

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config_file.empty()) apply_config_file(cfg, g.config_file);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void write_provenance(const fs::path& path, const RunConfig& cfg) {
  write_file_atomic(path, cfg.dump());
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".config.txt"); }

ProbeKind probe_arg(const std::string& name) {
  const auto kind = parse_probe_kind(name);
  require(kind.has_value(), ErrorCode::InvalidInput, "unknown probe kind " + name);
  return *kind;
}

FeatureKind feature_arg(const std::string& name) {
  const auto kind = parse_feature_kind(name);
  require(kind.has_value(), ErrorCode::InvalidInput, "unknown feature kind " + name);
  return *kind;
}

std::size_t clip_samples(const FeatureConfig& f, double rate) {
  return static_cast<std::size_t>(std::llround(f.clip_duration * rate));
}

FeatureTable manifest_features(const fs::path& manifest, const RunConfig& cfg,
                               std::size_t threads, std::vector<LabeledRecord>& records) {
  records = read_manifest(manifest);
  return build_feature_table(
      records, [&](std::size_t i) { return read_wav(resolve_wav_path(manifest, records[i])); },
      cfg.probe_set(), cfg.segment_options(), cfg.features, threads);
}

void check_skips(const FeatureTable& table, double max_fraction) {
  const std::size_t skipped = table.skipped();
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    if (!table.features[i]) {
      std::cerr << "skipped record_id=" << table.records[i].record_id
                << " reason=" << quoted(table.skip_reasons[i]) << "\n";
    }
  }
  require(static_cast<double>(skipped) <= max_fraction * static_cast<double>(table.records.size()),
          ErrorCode::InvalidInput,
          std::to_string(skipped) + " of " + std::to_string(table.records.size()) +
              " records could not be processed");
}

std::string feature_row(const std::string& id, const std::string& probe, const FeatureVector& fv) {
  std::string line = id + "," + probe + "," + std::string(feature_kind_name(fv.kind));
  for (double v : fv.values) line += "," + format_double(v);
  return line + "\n";
}

std::string feature_header(FeatureKind kind, const RunConfig& cfg) {
  std::string line = "record_id,probe,feature";
  const std::size_t dim = feature_dim(kind, cfg.features, kCanonicalSampleRate);
  for (std::size_t i = 0; i < dim; ++i) line += ",f" + std::to_string(i);
  return line + "\n";
}

// Subcommands.

int run_probe(const Globals& g, const std::string& kind, std::optional<double> gap,
              const fs::path& out) {
  RunConfig cfg = resolve_config(g);
  if (gap) cfg.gap = *gap;
  const ProbeSet set = cfg.probe_set();
  Waveform wave;
  if (kind == "composite") {
    wave = gen_composite(cfg.gap, set);
  } else {
    wave = synthesize(set[composite_slot(probe_arg(kind))]);
  }
  write_wav(out, wave);
  write_provenance(sidecar(out), cfg);
  std::cout << "wrote " << out.string() << " samples=" << wave.size() << "\n";
  return 0;
}

int run_synth(const Globals& g, const std::string& cohort_name, const Cohort& custom,
              const fs::path& out_dir) {
  const RunConfig cfg = resolve_config(g);
  Cohort cohort = custom;
  if (cohort_name == "tomato") {
    cohort = Cohort::tomato();
  } else if (cohort_name == "mandarin") {
    cohort = Cohort::mandarin();
  } else {
    require(cohort_name == "custom", ErrorCode::InvalidInput, "unknown cohort " + cohort_name);
  }
  SimulatedDataset ds(cohort, cfg.sim, cfg.seed, cfg.gap, cfg.probe_set());
  const fs::path manifest = ds.write(out_dir, resolve_threads(g.threads));
  write_provenance(out_dir / "config.txt", cfg);
  std::cout << "wrote " << manifest.string() << " records=" << ds.records().size() << "\n";
  return 0;
}

int run_clip(const Globals& g, const fs::path& in, const std::string& layout,
             const fs::path& out_dir) {
  require(layout == "composite", ErrorCode::InvalidInput, "unsupported layout " + layout);
  const RunConfig cfg = resolve_config(g);
  const Waveform raw = read_wav(in);
  const auto clips = segment_composite(raw, cfg.probe_set(), cfg.segment_options());
  fs::create_directories(out_dir);
  std::string onsets = "probe,onset_frame,onset_sample,wav_path\n";
  for (const ClippedSignal& clip : clips) {
    const std::string name = std::string(probe_kind_name(clip.source_kind)) + ".wav";
    write_wav(out_dir / name, clip.samples);
    onsets += std::string(probe_kind_name(clip.source_kind)) + "," +
              std::to_string(clip.onset_frame) + "," + std::to_string(clip.onset_sample) + "," +
              name + "\n";
  }
  write_file_atomic(out_dir / "onsets.csv", onsets);
  write_provenance(out_dir / "config.txt", cfg);
  std::cout << onsets;
  return 0;
}

int run_extract(const Globals& g, const fs::path& in, const std::string& feature_name,
                const fs::path& out) {
  const RunConfig cfg = resolve_config(g);
  const FeatureKind feature = feature_arg(feature_name);
  std::string csv = feature_header(feature, cfg);

  if (in.extension() == ".csv") {
    std::vector<LabeledRecord> records;
    const FeatureTable table = manifest_features(in, cfg, resolve_threads(g.threads), records);
    check_skips(table, cfg.grid_config(1).max_skip_fraction);
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!table.features[i]) continue;
      for (ProbeKind probe : kCompositeOrder) {
        csv += feature_row(records[i].record_id, std::string(probe_kind_name(probe)),
                           table.features[i]->get(probe, feature));
      }
    }
  } else {
    const Waveform wave = read_wav(in);
    const std::string id = in.stem().string();
    if (wave.size() == clip_samples(cfg.features, wave.sample_rate)) {
      csv += feature_row(id, "clip", extract_feature(feature, wave, cfg.features));
    } else {
      const RecordFeatures rf =
          extract_record_features(wave, cfg.probe_set(), cfg.segment_options(), cfg.features);
      for (ProbeKind probe : kCompositeOrder) {
        csv += feature_row(id, std::string(probe_kind_name(probe)), rf.get(probe, feature));
      }
    }
  }
  write_file_atomic(out, csv);
  write_provenance(sidecar(out), cfg);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int run_train(const Globals& g, const fs::path& manifest, const std::string& regressor_name,
              const std::string& probe_name, const std::string& feature_name,
              const std::string& target_name_arg, const fs::path& out) {
  const RunConfig cfg = resolve_config(g);
  const auto regressor = parse_regressor_kind(regressor_name);
  require(regressor.has_value(), ErrorCode::InvalidInput, "unknown regressor " + regressor_name);
  const ProbeKind probe = probe_arg(probe_name);
  const FeatureKind feature = feature_arg(feature_name);
  const auto target = parse_target(target_name_arg);
  require(target.has_value(), ErrorCode::InvalidInput, "unknown target " + target_name_arg);

  const std::size_t threads = resolve_threads(g.threads);
  std::vector<LabeledRecord> records;
  const FeatureTable table = manifest_features(manifest, cfg, threads, records);
  const GridConfig grid = cfg.grid_config(threads);
  check_skips(table, grid.max_skip_fraction);

  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!table.features[i]) continue;
    rows.push_back(table.features[i]->get(probe, feature).values);
    y.push_back(target_value(records[i], *target));
  }
  const Model model = train_model(*regressor, Matrix::from_rows(rows), y, grid);

  PipelineInfo info;
  info.probe = probe;
  info.feature = feature;
  info.target = std::string(target_name(*target));
  info.features = cfg.features;
  info.gap = cfg.gap;
  save_model(out, model, info);
  write_provenance(sidecar(out), cfg);
  std::cout << "wrote " << out.string() << " rows=" << rows.size() << "\n";
  return 0;
}

int run_predict(const Globals& g, const fs::path& model_path, const fs::path& in) {
  RunConfig cfg = resolve_config(g);
  const ModelDocument doc = load_model(model_path);
  require(doc.pipeline.has_value(), ErrorCode::InvalidInput,
          "model file carries no pipeline description");
  const PipelineInfo& info = *doc.pipeline;
  cfg.features = info.features;
  cfg.gap = info.gap;

  const Waveform wave = read_wav(in);
  FeatureVector fv;
  std::string source = "clip";
  if (wave.size() == clip_samples(info.features, wave.sample_rate)) {
    fv = extract_feature(info.feature, wave, info.features);
  } else {
    const RecordFeatures rf =
        extract_record_features(wave, cfg.probe_set(), cfg.segment_options(), info.features);
    fv = rf.get(info.probe, info.feature);
    source = "composite";
  }
  const double estimate = predict(doc.model, fv.values);
  std::cout << "target=" << info.target << " estimate=" << format_double(estimate)
            << " probe=" << probe_kind_name(info.probe) << " feature=" << feature_kind_name(info.feature)
            << " input=" << source << "\n";
  return 0;
}

int run_crossval(const Globals& g, const fs::path& manifest, std::optional<std::size_t> k,
                 const fs::path& out_dir) {
  RunConfig cfg = resolve_config(g);
  if (k) cfg.folds = *k;
  const std::size_t threads = resolve_threads(g.threads);
  std::vector<LabeledRecord> records;
  const FeatureTable table = manifest_features(manifest, cfg, threads, records);
  const CvReport report = run_grid(table, all_conditions(), cfg.grid_config(threads));

  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "report.csv", report_csv(report));
  write_file_atomic(out_dir / "report.txt", report_table(report));
  write_file_atomic(out_dir / "predictions.csv", predictions_csv(report));
  write_provenance(out_dir / "config.txt", cfg);
  for (const std::string& id : report.skipped_records) std::cerr << "skipped record_id=" << id << "\n";
  std::cout << report_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic probing toolkit: probe synthesis, fruit simulation, feature extraction, "
               "regression and cross-validation."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--config", g.config_file, "File of key=value overrides")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads (default: ACOUSTIPROBE_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  std::function<int()> action;

  auto* probe = app.add_subcommand("probe", "Write a probe signal as WAV");
  std::string probe_kind;
  std::optional<double> probe_gap;
  std::string probe_out;
  probe->add_option("--kind", probe_kind, "single|multi|linsweep|expsweep|composite")
      ->required()
      ->check(CLI::IsMember({"single", "multi", "linsweep", "expsweep", "composite"}));
  probe->add_option("--gap", probe_gap, "Silence between composite probes, s");
  probe->add_option("--out", probe_out, "Output WAV")->required();
  probe->callback([&] { action = [&] { return run_probe(g, probe_kind, probe_gap, probe_out); }; });

  auto* synth = app.add_subcommand("synth", "Generate a simulated fruit dataset");
  std::string cohort_name = "tomato";
  Cohort custom;
  std::string synth_out;
  synth->add_option("--cohort", cohort_name, "tomato|mandarin|custom")
      ->check(CLI::IsMember({"tomato", "mandarin", "custom"}));
  synth->add_option("--groups", custom.n_groups, "Storage-day groups (custom cohort)");
  synth->add_option("--fruits", custom.fruits_per_group, "Fruits per group (custom cohort)");
  synth->add_option("--points", custom.points, "Measurement points per fruit (custom cohort)");
  synth->add_option("--day-step", custom.day_step, "Days between groups (custom cohort)");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->callback([&] { action = [&] { return run_synth(g, cohort_name, custom, synth_out); }; });

  auto* clip = app.add_subcommand("clip", "Cut a composite recording into its four probe clips");
  std::string clip_in, clip_layout = "composite", clip_out;
  clip->add_option("--in", clip_in, "Recording WAV")->required();
  clip->add_option("--layout", clip_layout, "Probe layout of the recording");
  clip->add_option("--out-dir", clip_out, "Output directory")->required();
  clip->callback([&] { action = [&] { return run_clip(g, clip_in, clip_layout, clip_out); }; });

  auto* extract = app.add_subcommand("extract", "Compute features of a clip, recording or manifest");
  std::string extract_in, extract_feature_name = "spectrum", extract_out;
  extract->add_option("--in", extract_in, "Clip WAV, composite recording WAV or manifest CSV")
      ->required();
  extract->add_option("--feature", extract_feature_name, "spectrum|mfcc")
      ->check(CLI::IsMember({"spectrum", "mfcc"}));
  extract->add_option("--out", extract_out, "Output CSV")->required();
  extract->callback(
      [&] { action = [&] { return run_extract(g, extract_in, extract_feature_name, extract_out); }; });

  auto* train = app.add_subcommand("train", "Fit one regressor on a labelled manifest");
  std::string train_manifest, train_regressor = "gbr", train_probe = "expsweep",
                              train_feature = "spectrum", train_target = "storage_days", train_out;
  train->add_option("--manifest", train_manifest, "Manifest CSV")->required();
  train->add_option("--regressor", train_regressor, "svr|gbr")->check(CLI::IsMember({"svr", "gbr"}));
  train->add_option("--probe", train_probe, "single|multi|linsweep|expsweep")
      ->check(CLI::IsMember({"single", "multi", "linsweep", "expsweep"}));
  train->add_option("--feature", train_feature, "spectrum|mfcc")
      ->check(CLI::IsMember({"spectrum", "mfcc"}));
  train->add_option("--target", train_target, "storage_days|firmness")
      ->check(CLI::IsMember({"storage_days", "firmness"}));
  train->add_option("--out", train_out, "Output model JSON")->required();
  train->callback([&] {
    action = [&] {
      return run_train(g, train_manifest, train_regressor, train_probe, train_feature, train_target,
                       train_out);
    };
  });

  auto* pred = app.add_subcommand("predict", "Estimate storage time or firmness for one WAV");
  std::string pred_model, pred_in;
  pred->add_option("--model", pred_model, "Model JSON written by train")->required();
  pred->add_option("--in", pred_in, "Clip or composite recording WAV")->required();
  pred->callback([&] { action = [&] { return run_predict(g, pred_model, pred_in); }; });

  auto* cv = app.add_subcommand("crossval", "Grouped k-fold evaluation of all 16 conditions");
  std::string cv_manifest, cv_out = ".";
  std::optional<std::size_t> cv_k;
  cv->add_option("--manifest", cv_manifest, "Manifest CSV")->required();
  cv->add_option("--k", cv_k, "Number of folds")->check(CLI::PositiveNumber);
  cv->add_option("--out-dir", cv_out, "Directory for report.csv, report.txt, predictions.csv");
  cv->callback([&] { action = [&] { return run_crossval(g, cv_manifest, cv_k, cv_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error=usage message=" << quoted(e.what()) << "\n";
    return 2;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error=" << error_code_name(e.code()) << " message=" << quoted(e.what()) << "\n";
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error=io message=" << quoted(e.what()) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error=internal message=" << quoted(e.what()) << "\n";
  }
  return 1;
}
