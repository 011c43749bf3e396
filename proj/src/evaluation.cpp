#include "acoustiprobe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "acoustiprobe/dataio.hpp"
#include "acoustiprobe/error.hpp"
#include "acoustiprobe/parallel.hpp"

namespace acoustiprobe {

std::size_t FoldAssignment::fold_of(int fruit_id) const {
  const auto it = fold_of_fruit.find(fruit_id);
  require(it != fold_of_fruit.end(), ErrorCode::InvalidInput,
          "fruit " + std::to_string(fruit_id) + " has no fold");
  return it->second;
}

std::vector<int> FoldAssignment::fruits_in(std::size_t fold) const {
  std::vector<int> out;
  for (const auto& [fruit, f] : fold_of_fruit) {
    if (f == fold) out.push_back(fruit);
  }
  return out;
}

FoldAssignment grouped_kfold(const std::vector<LabeledRecord>& records, std::size_t k,
                             std::uint64_t seed, bool stratify_by_day) {
  require(k >= 2, ErrorCode::InvalidInput, "k-fold needs k >= 2");
  // Fruits keyed by stratum (storage day, or a single stratum).
  std::map<double, std::vector<int>> strata;
  std::map<int, double> day_of;
  for (const LabeledRecord& r : records) {
    const auto [it, inserted] = day_of.emplace(r.fruit_id, r.storage_days);
    if (!inserted) continue;
    strata[stratify_by_day ? r.storage_days : 0.0].push_back(r.fruit_id);
  }
  require(day_of.size() >= k, ErrorCode::InvalidInput,
          std::to_string(day_of.size()) + " distinct fruits cannot fill " + std::to_string(k) +
              " folds");

  FoldAssignment out;
  out.k = k;
  std::mt19937_64 rng(seed);
  std::size_t deal = 0;
  for (auto& [day, fruits] : strata) {
    std::sort(fruits.begin(), fruits.end());
    std::shuffle(fruits.begin(), fruits.end(), rng);
    for (int fruit : fruits) out.fold_of_fruit[fruit] = deal++ % k;
  }
  return out;
}

double mean_abs_error(std::span<const double> predictions, std::span<const double> truths) {
  require(predictions.size() == truths.size(), ErrorCode::InvalidInput,
          "prediction and truth counts differ");
  require(!predictions.empty(), ErrorCode::InvalidInput, "mean absolute error of nothing");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) acc += std::abs(predictions[i] - truths[i]);
  return acc / static_cast<double>(predictions.size());
}

std::string_view target_name(Target target) {
  return target == Target::StorageDays ? "storage_days" : "firmness";
}

std::optional<Target> parse_target(std::string_view name) {
  if (name == "storage_days") return Target::StorageDays;
  if (name == "firmness") return Target::Firmness;
  return std::nullopt;
}

double target_value(const LabeledRecord& record, Target target) {
  return target == Target::StorageDays ? record.storage_days : record.firmness;
}

std::vector<Condition> all_conditions() {
  std::vector<Condition> out;
  for (RegressorKind reg : {RegressorKind::Svr, RegressorKind::Gbr}) {
    for (ProbeKind probe : kAllProbeKinds) {
      for (FeatureKind feature : kAllFeatureKinds) out.push_back({reg, probe, feature});
    }
  }
  return out;
}

const CvRow* CvReport::find(const Condition& condition, Target target) const {
  for (const CvRow& row : rows) {
    if (row.condition == condition && row.target == target) return &row;
  }
  return nullptr;
}

std::string svr_hyperparams(const SvrParams& p) {
  return "C=" + format_double(p.c) + ";epsilon=" + format_double(p.epsilon) +
         ";gamma=" + (p.gamma == 0.0 ? std::string("1/dim") : format_double(p.gamma)) +
         ";kernel=" + std::string(kernel_kind_name(p.kernel)) +
         ";tolerance=" + format_double(p.tolerance);
}

std::string gbr_hyperparams(const GbrParams& p) {
  return "n_trees=" + std::to_string(p.n_trees) + ";learning_rate=" +
         format_double(p.learning_rate) + ";max_depth=" + std::to_string(p.max_depth) +
         ";min_samples_leaf=" + std::to_string(p.min_samples_leaf) +
         ";subsample=" + format_double(p.subsample) + ";seed=" + std::to_string(p.seed);
}

Model train_model(RegressorKind kind, const Matrix& x, std::span<const double> y,
                  const GridConfig& config) {
  if (kind == RegressorKind::Svr) return train_svr(x, y, config.svr);
  return train_gbr(x, y, config.gbr);
}

CvReport run_grid(const FeatureTable& table, const std::vector<Condition>& conditions,
                  const GridConfig& config) {
  require(table.features.size() == table.records.size(), ErrorCode::InvalidInput,
          "feature table is inconsistent");
  CvReport report;
  report.seed = config.seed;
  report.k = config.k;
  report.records = table.records.size();

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    if (table.features[i]) {
      usable.push_back(i);
    } else {
      report.skipped_records.push_back(table.records[i].record_id);
    }
  }
  const double skipped_fraction = table.records.empty()
                                      ? 0.0
                                      : static_cast<double>(report.skipped_records.size()) /
                                            static_cast<double>(table.records.size());
  require(skipped_fraction <= config.max_skip_fraction, ErrorCode::InvalidInput,
          std::to_string(report.skipped_records.size()) + " of " +
              std::to_string(table.records.size()) + " records could not be processed");

  std::vector<LabeledRecord> kept;
  kept.reserve(usable.size());
  for (std::size_t i : usable) kept.push_back(table.records[i]);
  report.folds = grouped_kfold(kept, config.k, config.seed, config.stratify_by_day);

  std::vector<std::size_t> fold_of_row(usable.size());
  for (std::size_t r = 0; r < usable.size(); ++r) {
    fold_of_row[r] = report.folds.fold_of(kept[r].fruit_id);
  }

  struct Task {
    std::size_t row;  // index into report.rows
    std::size_t fold;
  };
  for (const Condition& c : conditions) {
    for (Target target : kAllTargets) {
      CvRow row;
      row.condition = c;
      row.target = target;
      row.hyperparams =
          c.regressor == RegressorKind::Svr ? svr_hyperparams(config.svr) : gbr_hyperparams(config.gbr);
      row.fold_maes.assign(config.k, 0.0);
      row.splits.resize(config.k);
      report.rows.push_back(std::move(row));
    }
  }
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    for (std::size_t f = 0; f < config.k; ++f) tasks.push_back({r, f});
  }

  // predictions_by_task[t][i] is the prediction for the i-th test row of task t.
  std::vector<std::vector<double>> predictions_by_task(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t t) {
    CvRow& row = report.rows[tasks[t].row];
    const std::size_t fold = tasks[t].fold;
    const Condition& c = row.condition;

    std::vector<std::size_t> train, test;
    std::set<int> train_fruits, test_fruits;
    for (std::size_t r = 0; r < usable.size(); ++r) {
      if (fold_of_row[r] == fold) {
        test.push_back(r);
        test_fruits.insert(kept[r].fruit_id);
      } else {
        train.push_back(r);
        train_fruits.insert(kept[r].fruit_id);
      }
    }
    for (int fruit : test_fruits) {
      require(!train_fruits.contains(fruit), ErrorCode::InvalidInput,
              "fruit " + std::to_string(fruit) + " appears in both train and test");
    }
    require(!train.empty() && !test.empty(), ErrorCode::InvalidInput, "empty fold");
    row.splits[fold] = {std::vector<int>(train_fruits.begin(), train_fruits.end()),
                        std::vector<int>(test_fruits.begin(), test_fruits.end())};

    auto feature_row = [&](std::size_t r) -> const std::vector<double>& {
      return table.features[usable[r]]->get(c.probe, c.feature).values;
    };
    const std::size_t dim = feature_row(train.front()).size();
    Matrix x(train.size(), dim);
    std::vector<double> y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto& v = feature_row(train[i]);
      std::copy(v.begin(), v.end(), x.row(i).begin());
      y[i] = target_value(kept[train[i]], row.target);
    }
    const Model model = train_model(c.regressor, x, y, config);

    std::vector<double> preds(test.size()), truths(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      preds[i] = predict(model, feature_row(test[i]));
      truths[i] = target_value(kept[test[i]], row.target);
    }
    row.fold_maes[fold] = mean_abs_error(preds, truths);
    predictions_by_task[t] = std::move(preds);
  });

  // Merge in fixed (row, fold, record) order.
  std::vector<double> abs_sum(report.rows.size(), 0.0);
  std::vector<std::size_t> count(report.rows.size(), 0);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const CvRow& row = report.rows[tasks[t].row];
    std::size_t i = 0;
    for (std::size_t r = 0; r < usable.size(); ++r) {
      if (fold_of_row[r] != tasks[t].fold) continue;
      PredictionRow p;
      p.condition = row.condition;
      p.target = row.target;
      p.record_id = kept[r].record_id;
      p.fold = tasks[t].fold;
      p.truth = target_value(kept[r], row.target);
      p.prediction = predictions_by_task[t][i++];
      abs_sum[tasks[t].row] += std::abs(p.prediction - p.truth);
      count[tasks[t].row] += 1;
      report.predictions.push_back(std::move(p));
    }
  }
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    report.rows[r].mae = abs_sum[r] / static_cast<double>(count[r]);
  }
  return report;
}

std::string report_csv(const CvReport& report) {
  std::string out = "regressor,probe,feature,target,mae,fold_maes,hyperparams,seed\n";
  for (const CvRow& row : report.rows) {
    std::string folds;
    for (std::size_t f = 0; f < row.fold_maes.size(); ++f) {
      if (f) folds += ';';
      folds += format_double(row.fold_maes[f]);
    }
    out += std::string(regressor_kind_name(row.condition.regressor)) + ',' +
           std::string(probe_kind_name(row.condition.probe)) + ',' +
           std::string(feature_kind_name(row.condition.feature)) + ',' +
           std::string(target_name(row.target)) + ',' + format_double(row.mae) + ',' + folds +
           ',' + row.hyperparams + ',' + std::to_string(report.seed) + '\n';
  }
  return out;
}

std::string report_table(const CvReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %-9s %-9s %14s %14s\n", "regressor", "probe", "feature",
                "storage_days", "firmness");
  out += line;
  std::set<std::size_t> done;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    if (done.contains(r)) continue;
    const Condition& c = report.rows[r].condition;
    const CvRow* storage = report.find(c, Target::StorageDays);
    const CvRow* firmness = report.find(c, Target::Firmness);
    for (std::size_t s = r; s < report.rows.size(); ++s) {
      if (report.rows[s].condition == c) done.insert(s);
    }
    std::snprintf(line, sizeof line, "%-9s %-9s %-9s %14.2f %14.2f\n",
                  std::string(regressor_kind_name(c.regressor)).c_str(),
                  std::string(probe_kind_name(c.probe)).c_str(),
                  std::string(feature_kind_name(c.feature)).c_str(),
                  storage ? storage->mae : std::nan(""), firmness ? firmness->mae : std::nan(""));
    out += line;
  }
  std::snprintf(line, sizeof line, "# k=%zu seed=%llu records=%zu skipped=%zu\n", report.k,
                static_cast<unsigned long long>(report.seed), report.records,
                report.skipped_records.size());
  out += line;
  return out;
}

std::string predictions_csv(const CvReport& report) {
  std::string out = "regressor,probe,feature,target,record_id,fold,truth,prediction\n";
  for (const PredictionRow& p : report.predictions) {
    out += std::string(regressor_kind_name(p.condition.regressor)) + ',' +
           std::string(probe_kind_name(p.condition.probe)) + ',' +
           std::string(feature_kind_name(p.condition.feature)) + ',' +
           std::string(target_name(p.target)) + ',' + p.record_id + ',' +
           std::to_string(p.fold) + ',' + format_double(p.truth) + ',' +
           format_double(p.prediction) + '\n';
  }
  return out;
}

}  // namespace acoustiprobe
