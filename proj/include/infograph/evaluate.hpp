#pragma once

// Downstream evaluation: frozen-encoder embeddings, cross-validated linear
// classification, regression MAE, and text/NDJSON reports.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "infograph/encoder.hpp"
#include "infograph/graph.hpp"
#include "infograph/log.hpp"
#include "infograph/semisup.hpp"

namespace infograph {

struct EmbeddingMatrix {
  Matrix values;  // one row per graph, dataset order
  int dim = 0;
};

inline EmbeddingMatrix embed_dataset(const Encoder& encoder, const Dataset& data, int batch_size) {
  if (batch_size < 1) throw ArgumentError("embed_dataset: batch_size must be >= 1");
  if (data.feature_dim != encoder.input_dim()) {
    throw ShapeError("embed_dataset: dataset feature width " + std::to_string(data.feature_dim) +
                     " but encoder expects " + std::to_string(encoder.input_dim()));
  }
  NoGradGuard no_grad;
  EmbeddingMatrix out;
  out.dim = encoder.embedding_dim();
  out.values.resize(static_cast<Eigen::Index>(data.size()), out.dim);
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i) idx.push_back(i);
    Encoding enc = encode(encoder, make_batch(data, idx));
    out.values.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(idx.size())) = enc.global.value();
  }
  if (!out.values.allFinite()) throw NumericError("embed_dataset: non-finite embedding");
  return out;
}

// Header line "rows cols dim", then one space-separated row per line.
inline void write_embeddings(const EmbeddingMatrix& e, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << e.values.rows() << ' ' << e.values.cols() << ' ' << e.dim << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < e.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.values.cols(); ++j) out << (j ? " " : "") << e.values(i, j);
    out << '\n';
  }
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Eigen::Index rows = 0, cols = 0;
  EmbeddingMatrix e;
  if (!(in >> rows >> cols >> e.dim)) throw FormatError(path.string() + ": bad embedding header");
  e.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (!(in >> e.values.data()[i])) throw FormatError(path.string() + ": truncated embedding matrix");
  }
  return e;
}

inline Matrix targets_matrix(const Dataset& data) {
  Matrix t(static_cast<Eigen::Index>(data.size()), data.target_dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& g = data.graphs[i];
    if (static_cast<int>(g.targets.size()) != data.target_dim) throw ShapeError("targets_matrix: ragged targets");
    for (int d = 0; d < data.target_dim; ++d) t(static_cast<Eigen::Index>(i), d) = g.targets[static_cast<std::size_t>(d)];
  }
  return t;
}

inline Matrix predict_dataset(const SemiModel& model, const Dataset& data, int batch_size) {
  NoGradGuard no_grad;
  Matrix out(static_cast<Eigen::Index>(data.size()), model.head.out_features());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i) idx.push_back(i);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(idx.size())) =
        predict(model, make_batch(data, idx)).value();
  }
  return out;
}

// Mean absolute error per target dimension.
inline Eigen::VectorXd mae(const Matrix& predictions, const Matrix& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw ShapeError("mae: predictions " + shape_str(predictions.rows(), predictions.cols()) + " vs targets " +
                     shape_str(targets.rows(), targets.cols()));
  }
  if (predictions.rows() == 0) throw ShapeError("mae: no rows");
  return (predictions - targets).cwiseAbs().colwise().mean().transpose();
}

// Per-dimension MAE in original units, using the dataset's standardization.
inline Eigen::VectorXd destandardize_mae(const Eigen::VectorXd& standardized, const Dataset& data) {
  Eigen::VectorXd out = standardized;
  for (Eigen::Index d = 0; d < out.size() && d < static_cast<Eigen::Index>(data.target_std.size()); ++d) {
    out(d) *= data.target_std[static_cast<std::size_t>(d)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multinomial L2-regularized logistic regression

struct LogisticModel {
  Matrix weights;  // d x classes
  Matrix bias;     // 1 x classes

  Matrix logits(const Matrix& x) const { return (x * weights).rowwise() + bias.row(0); }

  std::vector<int> predict(const Matrix& x) const {
    Matrix z = logits(x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index best = 0;
      z.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }
};

namespace detail {

inline Matrix softmax_rows(const Matrix& z) {
  Matrix p = z.colwise() - z.rowwise().maxCoeff();
  p = p.array().exp();
  return p.array().colwise() / p.rowwise().sum().array();
}

}  // namespace detail

// Minimizes mean cross-entropy + ||W||^2 / (2 C n) with Nesterov-accelerated
// gradient descent at step 1/L, L the smoothness bound of the objective.
// The bias is not regularized.
inline LogisticModel fit_logistic(const Matrix& x, std::span<const int> labels, int classes, double c,
                                  int iterations) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (n == 0) throw ArgumentError("fit_logistic: no samples");
  if (!(c > 0)) throw ArgumentError("fit_logistic: C must be positive");
  Matrix y = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  Matrix aug(n, d + 1);
  aug.leftCols(d) = x;
  aug.col(d).setOnes();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(aug.transpose() * aug, Eigen::EigenvaluesOnly);
  const double reg = 1.0 / (c * static_cast<double>(n));
  const double lipschitz = 0.5 * eig.eigenvalues().maxCoeff() / static_cast<double>(n) + reg;
  const double step = 1.0 / lipschitz;

  Matrix theta = Matrix::Zero(d + 1, classes);  // last row is the bias
  Matrix prev = theta;
  for (int it = 0; it < iterations; ++it) {
    const double momentum = static_cast<double>(it) / static_cast<double>(it + 3);
    Matrix look = theta + momentum * (theta - prev);
    Matrix grad = aug.transpose() * (detail::softmax_rows(aug * look) - y) / static_cast<double>(n);
    grad.topRows(d) += reg * look.topRows(d);
    prev = theta;
    theta = look - step * grad;
  }
  LogisticModel m;
  m.weights = theta.topRows(d);
  m.bias = theta.bottomRows(1);
  return m;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ShapeError("accuracy: size mismatch or empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    Matrix centered = x.rowwise() - s.mean;
    s.scale = (centered.cwiseAbs2().colwise().sum() / static_cast<double>(x.rows())).cwiseSqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
      if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;  // constant column
    }
    return s;
  }

  Matrix apply(const Matrix& x) const { return (x.rowwise() - mean).array().rowwise() / scale.array(); }
};

struct CvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> fold_accuracies;  // evaluated folds only, fold order
  std::vector<double> chosen_c;
  std::vector<int> skipped_folds;
};

inline Matrix rows_of(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline std::vector<int> labels_of(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

// k-fold cross-validated accuracy. Per fold: standardize on the train split,
// pick C from the grid by accuracy on a seeded 10% holdout of the train
// split (first best in grid order), refit on the full train split, score the
// test fold. A fold whose train split misses a class is skipped.
inline CvResult logistic_cv(const Matrix& features, std::span<const int> labels, int k, std::uint64_t seed,
                            std::span<const double> c_grid, int iterations = 500) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw ShapeError("logistic_cv: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows()) + " rows");
  }
  if (c_grid.empty()) throw ArgumentError("logistic_cv: empty C grid");
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw ArgumentError("logistic_cv: labels must be 0-based");
    classes = std::max(classes, l + 1);
  }
  const std::set<int> present(labels.begin(), labels.end());
  const auto folds = kfold_split(labels.size(), static_cast<std::size_t>(k), seed);
  CvResult result;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const auto train_labels = labels_of(labels, fold.train);
    if (std::set<int>(train_labels.begin(), train_labels.end()) != present) {
      log_warning("logistic_cv: fold " + std::to_string(f) + " train split misses a class, skipped");
      result.skipped_folds.push_back(static_cast<int>(f));
      continue;
    }
    const Standardizer scaler = Standardizer::fit(rows_of(features, fold.train));
    const Matrix train_x = scaler.apply(rows_of(features, fold.train));
    const Matrix test_x = scaler.apply(rows_of(features, fold.test));

    std::vector<std::size_t> perm(fold.train.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng = Rng::substream(seed, "cv-holdout-" + std::to_string(f));
    rng.shuffle(std::span<std::size_t>(perm));
    const std::size_t hold = std::max<std::size_t>(1, (perm.size() + 5) / 10);
    std::vector<std::size_t> hold_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(hold));
    std::vector<std::size_t> fit_idx(perm.begin() + static_cast<std::ptrdiff_t>(hold), perm.end());
    const Matrix fit_x = rows_of(train_x, fit_idx);
    const Matrix hold_x = rows_of(train_x, hold_idx);
    const auto fit_y = labels_of(train_labels, fit_idx);
    const auto hold_y = labels_of(train_labels, hold_idx);

    double best_c = c_grid.front();
    double best_acc = -1.0;
    for (double c : c_grid) {
      const double acc = accuracy(fit_logistic(fit_x, fit_y, classes, c, iterations).predict(hold_x), hold_y);
      if (acc > best_acc) {
        best_acc = acc;
        best_c = c;
      }
    }
    const LogisticModel model = fit_logistic(train_x, train_labels, classes, best_c, iterations);
    result.fold_accuracies.push_back(accuracy(model.predict(test_x), labels_of(labels, fold.test)));
    result.chosen_c.push_back(best_c);
  }
  if (result.fold_accuracies.empty()) throw ArgumentError("logistic_cv: every fold was skipped");
  double sum = 0.0;
  for (double a : result.fold_accuracies) sum += a;
  result.mean_accuracy = sum / static_cast<double>(result.fold_accuracies.size());
  double var = 0.0;
  for (double a : result.fold_accuracies) var += (a - result.mean_accuracy) * (a - result.mean_accuracy);
  result.std_accuracy = std::sqrt(var / static_cast<double>(result.fold_accuracies.size()));
  return result;
}

inline double majority_rate(std::span<const int> labels) {
  if (labels.empty()) throw ArgumentError("majority_rate: no labels");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [l, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Accuracies are fractions; printed as percentages, "89.01 ± 1.13".
inline std::string format_mean_std(double mean, double stddev) {
  return format_fixed(100.0 * mean) + " ± " + format_fixed(100.0 * stddev);
}

// Ratios below 1 (better than the supervised baseline) are marked **bold**.
inline std::string format_ratio(double ratio) {
  const std::string s = format_fixed(ratio);
  return ratio < 1.0 ? "**" + s + "**" : s;
}

struct ClassificationRow {
  std::string method;
  std::string dataset;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int runs = 1;
};

struct RegressionRow {
  std::string method;
  std::string target;
  double mae = 0.0;
  std::optional<double> mae_original_units;
  std::optional<double> error_ratio;
};

struct Report {
  std::string text;
  std::vector<std::string> records;  // one JSON object per entry
};

namespace detail {

inline std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;  // count UTF-8 lead bytes
  return w;
}

inline std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = display_width(header[c]);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], display_width(r[c]));
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      s += cells[c] + std::string(width[c] - display_width(cells[c]), ' ');
      if (c + 1 < cells.size()) s += "  ";
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  out += line(rule);
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace detail

inline Report classification_report(const std::vector<ClassificationRow>& rows) {
  Report rep;
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.method, r.dataset, format_mean_std(r.mean_accuracy, r.std_accuracy), std::to_string(r.runs)});
    nlohmann::ordered_json j;
    j["kind"] = "classification";
    j["method"] = r.method;
    j["dataset"] = r.dataset;
    j["mean_accuracy"] = r.mean_accuracy;
    j["std_accuracy"] = r.std_accuracy;
    j["runs"] = r.runs;
    rep.records.push_back(j.dump());
  }
  rep.text = "# accuracy: mean ± std (%), L2 logistic regression on frozen embeddings\n" +
             detail::table({"method", "dataset", "accuracy", "runs"}, cells);
  return rep;
}

inline Report regression_report(const std::vector<RegressionRow>& rows) {
  Report rep;
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.method, r.target, format_fixed(r.mae, 4),
                     r.mae_original_units ? format_fixed(*r.mae_original_units, 4) : "-",
                     r.error_ratio ? format_ratio(*r.error_ratio) : "-"});
    nlohmann::ordered_json j;
    j["kind"] = "regression";
    j["method"] = r.method;
    j["target"] = r.target;
    j["mae"] = r.mae;
    if (r.mae_original_units) j["mae_original_units"] = *r.mae_original_units;
    if (r.error_ratio) j["error_ratio"] = *r.error_ratio;
    rep.records.push_back(j.dump());
  }
  rep.text = "# MAE in standardized units; error ratio relative to the supervised baseline\n" +
             detail::table({"method", "target", "mae", "mae (units)", "error ratio"}, cells);
  return rep;
}

inline void write_report(const Report& rep, const std::filesystem::path& text_path,
                         const std::filesystem::path& records_path) {
  std::ofstream t(text_path);
  if (!t) throw IoError("cannot write " + text_path.string());
  t << rep.text;
  std::ofstream r(records_path);
  if (!r) throw IoError("cannot write " + records_path.string());
  for (const auto& line : rep.records) r << line << '\n';
}

}  // namespace infograph
