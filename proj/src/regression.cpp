#include "acoustiprobe/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "acoustiprobe/error.hpp"

namespace acoustiprobe {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m.cols, ErrorCode::InvalidInput, "ragged feature rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Scaler Scaler::fit(const Matrix& x) {
  Scaler s;
  s.means.assign(x.cols, 0.0);
  s.stds.assign(x.cols, 0.0);
  if (x.rows == 0) return s;
  const double n = static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) s.means[c] += x.at(r, c);
  }
  for (double& m : s.means) m /= n;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x.at(r, c) - s.means[c];
      s.stds[c] += d * d;
    }
  }
  for (double& sd : s.stds) {
    sd = std::sqrt(sd / n);
    if (!(sd > 0.0)) sd = 1.0;
  }
  return s;
}

void Scaler::transform(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < means.size(); ++c) out[c] = (in[c] - means[c]) / stds[c];
}

Matrix Scaler::transform(const Matrix& x) const {
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) transform(x.row(r), out.row(r));
  return out;
}

std::string_view kernel_kind_name(KernelKind kind) {
  return kind == KernelKind::Rbf ? "rbf" : "linear";
}

std::optional<KernelKind> parse_kernel_kind(std::string_view name) {
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "linear") return KernelKind::Linear;
  return std::nullopt;
}

std::string_view regressor_kind_name(RegressorKind kind) {
  return kind == RegressorKind::Svr ? "svr" : "gbr";
}

std::optional<RegressorKind> parse_regressor_kind(std::string_view name) {
  if (name == "svr") return RegressorKind::Svr;
  if (name == "gbr") return RegressorKind::Gbr;
  return std::nullopt;
}

namespace {

void check_training_data(const Matrix& x, std::span<const double> y, std::size_t min_rows) {
  require(x.rows == y.size(), ErrorCode::InvalidInput,
          "feature rows (" + std::to_string(x.rows) + ") and targets (" +
              std::to_string(y.size()) + ") differ in count");
  require(x.rows >= min_rows, ErrorCode::InvalidInput,
          "need at least " + std::to_string(min_rows) + " training rows");
  require(x.cols >= 1, ErrorCode::InvalidInput, "feature rows are empty");
  for (double v : x.data) require(std::isfinite(v), ErrorCode::InvalidInput, "non-finite feature");
  for (double v : y) require(std::isfinite(v), ErrorCode::InvalidInput, "non-finite target");
}

void check_dim(std::size_t expected, std::size_t got) {
  require(expected == got, ErrorCode::InvalidInput,
          "feature row has dimension " + std::to_string(got) + ", model expects " +
              std::to_string(expected));
}

/// Rows sorted lexicographically by (features, target).
std::vector<std::size_t> canonical_order(const Matrix& x, std::span<const double> y) {
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a);
    const auto rb = x.row(b);
    for (std::size_t c = 0; c < x.cols; ++c) {
      if (ra[c] != rb[c]) return ra[c] < rb[c];
    }
    return y[a] < y[b];
  });
  return order;
}

void reorder(const Matrix& x, std::span<const double> y, const std::vector<std::size_t>& order,
             Matrix& x_out, std::vector<double>& y_out) {
  x_out = Matrix(x.rows, x.cols);
  y_out.resize(y.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = x.row(order[i]);
    std::copy(src.begin(), src.end(), x_out.row(i).begin());
    y_out[i] = y[order[i]];
  }
}

double kernel_value(KernelKind kind, double gamma, std::span<const double> a,
                    std::span<const double> b) {
  if (kind == KernelKind::Linear) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

constexpr double kTau = 1e-12;

}  // namespace

double SvrModel::kernel(std::span<const double> a, std::span<const double> b) const {
  return kernel_value(params.kernel, params.gamma, a, b);
}

double SvrModel::standardized_decision(std::span<const double> x) const {
  check_dim(scaler.dim(), x.size());
  std::vector<double> z(x.size());
  scaler.transform(x, z);
  double f = bias;
  for (std::size_t s = 0; s < dual_coeffs.size(); ++s) {
    f += dual_coeffs[s] * kernel(support_vectors.row(s), z);
  }
  return f;
}

double SvrModel::predict(std::span<const double> x) const {
  return standardized_decision(x) * target_std + target_mean;
}

SvrModel train_svr(const Matrix& x_in, std::span<const double> y_in, const SvrParams& params) {
  check_training_data(x_in, y_in, 2);
  require(params.c > 0.0, ErrorCode::InvalidSpec, "SVR C must be positive");
  require(params.epsilon >= 0.0, ErrorCode::InvalidSpec, "SVR epsilon must be non-negative");
  require(params.gamma >= 0.0, ErrorCode::InvalidSpec, "SVR gamma must be non-negative");
  require(params.tolerance > 0.0, ErrorCode::InvalidSpec, "SVR tolerance must be positive");

  Matrix x_raw;
  std::vector<double> y_raw;
  reorder(x_in, y_in, canonical_order(x_in, y_in), x_raw, y_raw);

  SvrModel model;
  model.params = params;
  if (model.params.gamma == 0.0) model.params.gamma = 1.0 / static_cast<double>(x_raw.cols);
  model.scaler = Scaler::fit(x_raw);
  const Matrix x = model.scaler.transform(x_raw);

  const std::size_t l = x.rows;
  const double n = static_cast<double>(l);
  model.target_mean = std::accumulate(y_raw.begin(), y_raw.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y_raw) var += (v - model.target_mean) * (v - model.target_mean);
  model.target_std = std::sqrt(var / n);
  if (!(model.target_std > 0.0)) model.target_std = 1.0;
  std::vector<double> y(l);
  for (std::size_t i = 0; i < l; ++i) y[i] = model.standardize_target(y_raw[i]);

  std::vector<double> k(l * l);
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = i; j < l; ++j) {
      const double v = model.kernel(x.row(i), x.row(j));
      k[i * l + j] = v;
      k[j * l + i] = v;
    }
  }

  // Variables t < l are alpha_t (sign +1), t >= l are alpha*_{t-l} (sign -1).
  const std::size_t m = 2 * l;
  const double c = params.c;
  std::vector<double> beta(m, 0.0);
  std::vector<double> grad(m);
  std::vector<int> sign(m);
  for (std::size_t i = 0; i < l; ++i) {
    sign[i] = 1;
    sign[i + l] = -1;
    grad[i] = params.epsilon - y[i];
    grad[i + l] = params.epsilon + y[i];
  }
  auto kk = [&](std::size_t s, std::size_t t) { return k[(s % l) * l + (t % l)]; };
  auto q = [&](std::size_t s, std::size_t t) { return sign[s] * sign[t] * kk(s, t); };
  auto at_upper = [&](std::size_t t) { return beta[t] >= c; };
  auto at_lower = [&](std::size_t t) { return beta[t] <= 0.0; };

  std::size_t iter = 0;
  double violation = 0.0;
  model.converged = false;
  for (; iter < params.max_iterations; ++iter) {
    // Maximal violating pair with second-order selection of the second index.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i_sel = m;
    for (std::size_t t = 0; t < m; ++t) {
      if (sign[t] == 1) {
        if (!at_upper(t) && -grad[t] >= g_max) {
          g_max = -grad[t];
          i_sel = t;
        }
      } else if (!at_lower(t) && grad[t] >= g_max) {
        g_max = grad[t];
        i_sel = t;
      }
    }
    double g_max2 = -std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::size_t j_sel = m;
    for (std::size_t t = 0; t < m; ++t) {
      const double qii = i_sel < m ? kk(i_sel, i_sel) : 0.0;
      if (sign[t] == 1) {
        if (at_lower(t)) continue;
        const double diff = g_max + grad[t];
        g_max2 = std::max(g_max2, grad[t]);
        if (diff > 0.0 && i_sel < m) {
          double quad = qii + kk(t, t) - 2.0 * sign[i_sel] * q(i_sel, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = t;
          }
        }
      } else {
        if (at_upper(t)) continue;
        const double diff = g_max - grad[t];
        g_max2 = std::max(g_max2, -grad[t]);
        if (diff > 0.0 && i_sel < m) {
          double quad = qii + kk(t, t) + 2.0 * sign[i_sel] * q(i_sel, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = t;
          }
        }
      }
    }
    violation = g_max + g_max2;
    if (violation < params.tolerance || i_sel == m || j_sel == m) {
      model.converged = true;
      break;
    }

    const std::size_t i = i_sel;
    const std::size_t j = j_sel;
    const double old_i = beta[i];
    const double old_j = beta[j];
    if (sign[i] != sign[j]) {
      double quad = kk(i, i) + kk(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = beta[i] - beta[j];
      beta[i] += delta;
      beta[j] += delta;
      if (diff > 0.0) {
        if (beta[j] < 0.0) {
          beta[j] = 0.0;
          beta[i] = diff;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = -diff;
      }
      if (diff > 0.0) {
        if (beta[i] > c) {
          beta[i] = c;
          beta[j] = c - diff;
        }
      } else if (beta[j] > c) {
        beta[j] = c;
        beta[i] = c + diff;
      }
    } else {
      double quad = kk(i, i) + kk(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = beta[i] + beta[j];
      beta[i] -= delta;
      beta[j] += delta;
      if (sum > c) {
        if (beta[i] > c) {
          beta[i] = c;
          beta[j] = sum - c;
        }
      } else if (beta[j] < 0.0) {
        beta[j] = 0.0;
        beta[i] = sum;
      }
      if (sum > c) {
        if (beta[j] > c) {
          beta[j] = c;
          beta[i] = sum - c;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = sum;
      }
    }

    const double d_i = beta[i] - old_i;
    const double d_j = beta[j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += q(t, i) * d_i + q(t, j) * d_j;
  }
  model.iterations = iter;
  model.final_violation = violation;

  // rho: mean of sign * grad over free variables, else midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign[t] * grad[t];
    if (at_upper(t)) {
      if (sign[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (sign[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  model.bias = -rho;

  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < l; ++i) {
    if (beta[i] - beta[i + l] != 0.0) support.push_back(i);
  }
  model.support_vectors = Matrix(support.size(), x.cols);
  model.dual_coeffs.resize(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto src = x.row(support[s]);
    std::copy(src.begin(), src.end(), model.support_vectors.row(s).begin());
    model.dual_coeffs[s] = beta[support[s]] - beta[support[s] + l];
  }
  return model;
}

double RegressionTree::predict(std::span<const double> x) const {
  return nodes[leaf_index(x)].value;
}

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
  std::size_t n = 0;
  while (!nodes[n].is_leaf()) {
    const Node& node = nodes[n];
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return n;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    deepest = std::max(deepest, d[n]);
    if (!nodes[n].is_leaf()) {
      d[static_cast<std::size_t>(nodes[n].left)] = d[n] + 1;
      d[static_cast<std::size_t>(nodes[n].right)] = d[n] + 1;
    }
  }
  return deepest;
}

double GbrModel::predict(std::span<const double> x, std::size_t tree_count) const {
  check_dim(scaler.dim(), x.size());
  std::vector<double> z(x.size());
  scaler.transform(x, z);
  double sum = 0.0;
  const std::size_t count = std::min(tree_count, trees.size());
  for (std::size_t t = 0; t < count; ++t) sum += trees[t].predict(z);
  return base_value + params.learning_rate * sum;
}

namespace {

/// Level-wise least-squares tree over presorted feature columns.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const GbrParams& params) : x_(x), params_(params) {
    sorted_.resize(x.cols * x.rows);
    sorted_values_.resize(x.cols * x.rows);
    inverse_.assign(x.rows + 1, 0.0);
    for (std::size_t k = 1; k <= x.rows; ++k) inverse_[k] = 1.0 / static_cast<double>(k);
    std::vector<std::uint32_t> idx(x.rows);
    for (std::size_t f = 0; f < x.cols; ++f) {
      std::iota(idx.begin(), idx.end(), 0u);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
      for (std::size_t k = 0; k < x.rows; ++k) {
        sorted_[f * x.rows + k] = idx[k];
        sorted_values_[f * x.rows + k] = x.at(idx[k], f);
      }
    }
  }

  /// in_sample[i] selects the rows this tree is fitted on.
  RegressionTree build(std::span<const double> residual, const std::vector<char>& in_sample) {
    RegressionTree tree;
    tree.max_depth = params_.max_depth;
    tree.min_samples_leaf = params_.min_samples_leaf;

    const std::size_t n = x_.rows;
    std::vector<int> node_of(n, -1);
    std::vector<Stats> stats(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_sample[i]) continue;
      node_of[i] = 0;
      stats[0].add(residual[i]);
    }
    tree.nodes.emplace_back();

    std::vector<int> level = {0};
    const std::size_t msl = std::max<std::size_t>(params_.min_samples_leaf, 1);
    for (std::size_t depth = 0; depth < params_.max_depth && !level.empty(); ++depth) {
      std::vector<Split> best(tree.nodes.size());
      std::vector<char> active(tree.nodes.size(), 0);
      bool any = false;
      for (int node : level) {
        if (stats[static_cast<std::size_t>(node)].count >= 2 * msl) {
          active[static_cast<std::size_t>(node)] = 1;
          any = true;
        }
      }
      if (!any) break;

      std::vector<double> parent_term(tree.nodes.size(), 0.0);
      for (int node : level) {
        const Stats& st = stats[static_cast<std::size_t>(node)];
        if (st.count > 0) parent_term[static_cast<std::size_t>(node)] = st.sum * st.sum * inverse_[st.count];
      }
      std::vector<Scan> scan(tree.nodes.size());
      for (std::size_t f = 0; f < x_.cols; ++f) {
        for (int node : level) scan[static_cast<std::size_t>(node)] = Scan{};
        const std::uint32_t* order = sorted_.data() + f * n;
        const double* values = sorted_values_.data() + f * n;
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = order[k];
          const int node = node_of[i];
          if (node < 0 || !active[static_cast<std::size_t>(node)]) continue;
          const auto nd = static_cast<std::size_t>(node);
          Scan& s = scan[nd];
          const double v = values[k];
          if (s.count > 0 && v > s.last) {
            const Stats& total = stats[nd];
            const std::size_t right = total.count - s.count;
            if (s.count >= msl && right >= msl) {
              const double rs = total.sum - s.sum;
              const double gain = s.sum * s.sum * inverse_[s.count] +
                                  rs * rs * inverse_[right] - parent_term[nd];
              if (gain > best[nd].gain) {
                double threshold = s.last + (v - s.last) / 2.0;
                if (!(threshold < v)) threshold = s.last;
                best[nd] = Split{gain, static_cast<int>(f), threshold};
              }
            }
          }
          s.sum += residual[i];
          s.count += 1;
          s.last = v;
        }
      }

      std::vector<int> next;
      for (int node : level) {
        const auto nd = static_cast<std::size_t>(node);
        if (!active[nd] || best[nd].feature < 0) continue;
        const double sse = stats[nd].sum_sq - stats[nd].sum * stats[nd].sum /
                                                  static_cast<double>(stats[nd].count);
        if (!(best[nd].gain > 1e-12 * std::max(sse, 0.0)) || !(sse > 0.0)) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stats.resize(tree.nodes.size());
        tree.nodes[nd].feature = best[nd].feature;
        tree.nodes[nd].threshold = best[nd].threshold;
        tree.nodes[nd].left = left;
        tree.nodes[nd].right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const int node = node_of[i];
        if (node < 0) continue;
        const auto& parent = tree.nodes[static_cast<std::size_t>(node)];
        if (parent.is_leaf()) continue;
        const int child = x_.at(i, static_cast<std::size_t>(parent.feature)) <= parent.threshold
                              ? parent.left
                              : parent.right;
        node_of[i] = child;
        stats[static_cast<std::size_t>(child)].add(residual[i]);
      }
      level = std::move(next);
    }

    for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
      if (tree.nodes[nd].is_leaf() && stats[nd].count > 0) {
        tree.nodes[nd].value = stats[nd].sum / static_cast<double>(stats[nd].count);
      }
    }
    return tree;
  }

 private:
  struct Stats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    void add(double r) {
      sum += r;
      sum_sq += r * r;
      ++count;
    }
  };
  struct Scan {
    double sum = 0.0;
    std::size_t count = 0;
    double last = 0.0;
  };
  struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
  };

  const Matrix& x_;
  GbrParams params_;
  std::vector<std::uint32_t> sorted_;
  std::vector<double> sorted_values_;
  std::vector<double> inverse_;  // 1/k for node sizes k
};

double mean_squared(std::span<const double> y, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - f[i]) * (y[i] - f[i]);
  return acc / static_cast<double>(y.size());
}

}  // namespace

GbrModel train_gbr(const Matrix& x_in, std::span<const double> y_in, const GbrParams& params) {
  check_training_data(x_in, y_in, 1);
  require(params.learning_rate > 0.0 && params.learning_rate <= 1.0, ErrorCode::InvalidSpec,
          "GBR learning rate must lie in (0, 1]");
  require(params.subsample > 0.0 && params.subsample <= 1.0, ErrorCode::InvalidSpec,
          "GBR subsample must lie in (0, 1]");

  Matrix x_raw;
  std::vector<double> y;
  reorder(x_in, y_in, canonical_order(x_in, y_in), x_raw, y);

  GbrModel model;
  model.params = params;
  model.scaler = Scaler::fit(x_raw);
  const Matrix x = model.scaler.transform(x_raw);
  const std::size_t n = x.rows;

  model.base_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> fitted(n, model.base_value);
  std::vector<double> residual(n);
  model.train_mse.push_back(mean_squared(y, fitted));

  TreeBuilder builder(x, params);
  std::mt19937_64 rng(params.seed);
  std::vector<char> in_sample(n, 1);
  std::vector<std::size_t> perm(n);
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));

  model.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
    if (sample_size < n) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t s = 0; s < sample_size; ++s) in_sample[perm[s]] = 1;
    }
    RegressionTree tree = builder.build(residual, in_sample);
    for (std::size_t i = 0; i < n; ++i) fitted[i] += params.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_mse.push_back(mean_squared(y, fitted));
  }
  return model;
}

double predict(const Model& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

std::size_t input_dim(const Model& model) {
  return std::visit([](const auto& m) { return m.scaler.dim(); }, model);
}

}  // namespace acoustiprobe
