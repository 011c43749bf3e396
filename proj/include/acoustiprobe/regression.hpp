#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace acoustiprobe {

/// Dense row-major matrix of feature rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Per-dimension standardisation; zero spreads are replaced by 1.
struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;

  static Scaler fit(const Matrix& x);
  std::size_t dim() const noexcept { return means.size(); }
  void transform(std::span<const double> in, std::span<double> out) const;
  Matrix transform(const Matrix& x) const;
};

enum class KernelKind { Rbf, Linear };

std::string_view kernel_kind_name(KernelKind kind);
std::optional<KernelKind> parse_kernel_kind(std::string_view name);

struct SvrParams {
  double c = 10.0;
  double epsilon = 0.1;  // tube half-width in standardised target units
  double gamma = 0.0;    // 0 selects 1 / dim
  KernelKind kernel = KernelKind::Rbf;
  double tolerance = 1e-3;  // stop when the maximal KKT violation pair falls below this
  std::size_t max_iterations = 10'000'000;
};

struct SvrModel {
  SvrParams params;  // gamma is resolved
  Scaler scaler;
  double target_mean = 0.0;
  double target_std = 1.0;
  Matrix support_vectors;  // scaled feature space
  std::vector<double> dual_coeffs;  // alpha - alpha*
  double bias = 0.0;

  // Solver diagnostics.
  bool converged = true;
  double final_violation = 0.0;
  std::size_t iterations = 0;

  double kernel(std::span<const double> a, std::span<const double> b) const;
  /// f(x) in standardised target units, before un-scaling.
  double standardized_decision(std::span<const double> x) const;
  double standardize_target(double y) const { return (y - target_mean) / target_std; }
  double predict(std::span<const double> x) const;
};

struct GbrParams {
  std::size_t n_trees = 300;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_samples_leaf = 5;
  double subsample = 1.0;  // row fraction per tree; 1 disables sampling
  std::uint64_t seed = 0;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
  };

  std::vector<Node> nodes;
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;

  double predict(std::span<const double> x) const;
  std::size_t leaf_index(std::span<const double> x) const;
  std::size_t depth() const;
};

struct GbrModel {
  GbrParams params;
  Scaler scaler;
  double base_value = 0.0;
  std::vector<RegressionTree> trees;
  /// Training MSE after 0, 1, ..., n trees.
  std::vector<double> train_mse;

  double predict(std::span<const double> x) const { return predict(x, trees.size()); }
  /// Prediction using only the first tree_count trees.
  double predict(std::span<const double> x, std::size_t tree_count) const;
};

using Model = std::variant<SvrModel, GbrModel>;

enum class RegressorKind { Svr, Gbr };

std::string_view regressor_kind_name(RegressorKind kind);  // "svr" | "gbr"
std::optional<RegressorKind> parse_regressor_kind(std::string_view name);

/// epsilon-SVR dual solved by pairwise (SMO) updates with second-order
/// working-set selection. Rows are put in a canonical order first, so the
/// result does not depend on the order of the training rows.
SvrModel train_svr(const Matrix& x, std::span<const double> y, const SvrParams& params = {});

/// Squared-loss gradient boosting over least-squares trees.
GbrModel train_gbr(const Matrix& x, std::span<const double> y, const GbrParams& params = {});

double predict(const Model& model, std::span<const double> x);
std::size_t input_dim(const Model& model);

}  // namespace acoustiprobe
