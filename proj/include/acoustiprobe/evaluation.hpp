#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acoustiprobe/pipeline.hpp"
#include "acoustiprobe/regression.hpp"

namespace acoustiprobe {

/// Fruit id -> fold index in [0, k).
struct FoldAssignment {
  std::size_t k = 0;
  std::map<int, std::size_t> fold_of_fruit;

  std::size_t fold_of(int fruit_id) const;
  std::vector<int> fruits_in(std::size_t fold) const;
};

/// Shuffles fruits with `seed` and deals them round-robin into k folds. With
/// stratify_by_day the dealing walks storage days in ascending order, shuffling
/// within each day, so every fold spans the full day range. The dealing
/// counter carries over between days, keeping fold sizes within one fruit.
FoldAssignment grouped_kfold(const std::vector<LabeledRecord>& records, std::size_t k,
                             std::uint64_t seed, bool stratify_by_day = true);

double mean_abs_error(std::span<const double> predictions, std::span<const double> truths);

enum class Target { StorageDays, Firmness };

inline constexpr std::array<Target, 2> kAllTargets = {Target::StorageDays, Target::Firmness};

std::string_view target_name(Target target);  // "storage_days" | "firmness"
std::optional<Target> parse_target(std::string_view name);
double target_value(const LabeledRecord& record, Target target);

struct Condition {
  RegressorKind regressor = RegressorKind::Gbr;
  ProbeKind probe = ProbeKind::ExpSweep;
  FeatureKind feature = FeatureKind::Spectrum;

  bool operator==(const Condition&) const = default;
};

/// The 16 conditions in table order: regressor, then probe
/// (single, multi, linear, exponential), then feature (spectrum, MFCC).
std::vector<Condition> all_conditions();

struct GridConfig {
  SvrParams svr;
  GbrParams gbr;
  std::size_t k = 3;
  std::uint64_t seed = 0;
  bool stratify_by_day = true;
  double max_skip_fraction = 0.05;
  std::size_t threads = 1;
};

struct FoldSplit {
  std::vector<int> train_fruits;
  std::vector<int> test_fruits;
};

struct CvRow {
  Condition condition;
  Target target = Target::StorageDays;
  double mae = 0.0;
  std::vector<double> fold_maes;
  std::string hyperparams;
  std::vector<FoldSplit> splits;
};

struct PredictionRow {
  Condition condition;
  Target target = Target::StorageDays;
  std::string record_id;
  std::size_t fold = 0;
  double truth = 0.0;
  double prediction = 0.0;
};

struct CvReport {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::size_t records = 0;
  std::vector<std::string> skipped_records;
  FoldAssignment folds;
  std::vector<CvRow> rows;  // conditions x targets, in condition order
  std::vector<PredictionRow> predictions;

  const CvRow* find(const Condition& condition, Target target) const;
};

std::string svr_hyperparams(const SvrParams& p);
std::string gbr_hyperparams(const GbrParams& p);

/// Trains one regressor on the given rows.
Model train_model(RegressorKind kind, const Matrix& x, std::span<const double> y,
                  const GridConfig& config);

/// k-fold evaluation of every condition for both targets. Skipped records are
/// excluded and counted; more than max_skip_fraction skipped is an error.
CvReport run_grid(const FeatureTable& table, const std::vector<Condition>& conditions,
                  const GridConfig& config);

/// regressor,probe,feature,target,mae,fold_maes,hyperparams,seed
std::string report_csv(const CvReport& report);
/// Aligned text table: one line per condition, storage-time and firmness MAE.
std::string report_table(const CvReport& report);
/// regressor,probe,feature,target,record_id,fold,truth,prediction
std::string predictions_csv(const CvReport& report);

}  // namespace acoustiprobe
