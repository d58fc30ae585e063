#pragma once

// End-to-end pipelines shared by the CLI `repro` command and the acceptance
// suite: data splits, train-then-evaluate runs, and model restoration from
// checkpoints.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "infograph/checkpoint.hpp"
#include "infograph/config.hpp"
#include "infograph/evaluate.hpp"
#include "infograph/synth.hpp"
#include "infograph/train.hpp"

namespace infograph {

struct SemiSplit {
  Dataset labeled;
  Dataset valid;
  Dataset test;
  Dataset unlabeled;
};

// Seeded shuffle, then labeled | valid | test | unlabeled in that order.
inline SemiSplit split_semi(const Dataset& data, const EvalOptions& opts) {
  opts.validate();
  const std::size_t n = data.size();
  auto count = [n](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n))); };
  const std::size_t nl = count(opts.labeled_fraction), nv = count(opts.valid_fraction), nt = count(opts.test_fraction);
  if (nl == 0 || nv == 0 || nt == 0) {
    throw ConfigError("dataset of " + std::to_string(n) + " graphs is too small for the requested split fractions");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::substream(opts.split_seed, "split");
  rng.shuffle(std::span<std::size_t>(order));
  auto take = [&](std::size_t from, std::size_t to) {
    return data.subset(std::span<const std::size_t>(order.data() + from, to - from));
  };
  return {take(0, nl), take(nl, nl + nv), take(nl + nv, nl + nv + nt), take(nl + nv + nt, n)};
}

// Copies checkpoint values into `params` by name.
inline void assign_by_name(std::vector<Tensor>& params, const std::vector<std::string>& names,
                           const std::vector<Matrix>& values) {
  for (auto& p : params) {
    const auto it = std::find(names.begin(), names.end(), p.name());
    if (it == names.end()) throw FormatError("checkpoint has no parameter '" + p.name() + "'");
    const Matrix& v = values[static_cast<std::size_t>(it - names.begin())];
    if (v.rows() != p.rows() || v.cols() != p.cols()) throw FormatError("checkpoint shape mismatch for '" + p.name() + "'");
    p.mutable_value() = v;
  }
}

// The encoder stored in a checkpoint: the unsupervised encoder, or the
// student encoder of the best validation epoch for semi-supervised runs.
inline Encoder encoder_from_checkpoint(const Checkpoint& c) {
  Rng scratch(0);
  const bool semi = c.kind == "semi";
  if (!semi && c.kind != "unsup") throw FormatError("unknown checkpoint kind '" + c.kind + "'");
  Encoder enc(c.arch.input_dim, c.arch.num_layers, c.arch.hidden, scratch, semi ? "student" : "encoder");
  auto params = enc.parameters();
  assign_by_name(params, c.names, semi && !c.best_params.empty() ? c.best_params : c.params);
  return enc;
}

inline SemiModel semi_model_from_checkpoint(const Checkpoint& c, const TrainConfig& config) {
  if (c.kind != "semi") throw FormatError("checkpoint holds a '" + c.kind + "' run, expected 'semi'");
  Rng scratch(0);
  SemiModel model(c.arch.input_dim, c.arch.num_layers, c.arch.hidden, c.arch.target_dim, config.semi_options(), scratch);
  auto params = model.parameters();
  assign_by_name(params, c.names, c.best_params.empty() ? c.params : c.best_params);
  return model;
}

// ---------------------------------------------------------------------------
// Unsupervised representation learning followed by k-fold classification.

struct UnsupRun {
  CvResult trained;
  CvResult random;  // the same encoder at its initialization
  std::vector<MetricsRecord> metrics;
  EmbeddingMatrix embeddings;
  EmbeddingMatrix random_embeddings;
};

inline UnsupRun run_unsupervised_eval(const Dataset& data, const TrainConfig& config, const EvalOptions& eval) {
  eval.validate();
  if (data.num_classes < 2) throw ArgumentError("classification evaluation needs at least 2 classes");
  UnsupRun run;
  {
    const UnsupervisedTrainer untrained(data, config);
    run.random_embeddings = embed_dataset(untrained.encoder(), data, eval.embed_batch_size);
  }
  auto result = train_unsupervised(data, config);
  run.metrics = std::move(result.metrics);
  run.embeddings = embed_dataset(result.encoder, data, eval.embed_batch_size);
  const auto labels = data.labels();
  run.trained = logistic_cv(run.embeddings.values, labels, eval.folds, config.seed, eval.c_grid, eval.classifier_iterations);
  run.random = logistic_cv(run.random_embeddings.values, labels, eval.folds, config.seed, eval.c_grid,
                           eval.classifier_iterations);
  return run;
}

// ---------------------------------------------------------------------------
// Semi-supervised regression arm: train, keep the best validation epoch,
// report test MAE in standardized units.

struct SemiArm {
  TrainMode mode = TrainMode::Supervised;
  double test_mae = 0.0;
  double best_valid_mae = 0.0;
  int best_epoch = -1;
  std::vector<MetricsRecord> metrics;
};

inline SemiArm run_semi_arm(const SemiSplit& split, const TrainConfig& config, const EvalOptions& eval) {
  SemiArm arm;
  arm.mode = config.mode;
  auto result = train_semisupervised(split.labeled, split.unlabeled, split.valid, config);
  arm.metrics = std::move(result.metrics);
  arm.best_valid_mae = result.best_valid_mae;
  arm.best_epoch = result.best_epoch;
  arm.test_mae = mae(predict_dataset(result.model, split.test, eval.embed_batch_size), targets_matrix(split.test)).mean();
  return arm;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("mean of an empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
inline double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Named recipes: dataset source plus configuration defaults. Command-line
// overrides are applied on top of these.

struct Recipe {
  std::string name;
  TrainConfig train;
  EvalOptions eval;
};

inline Recipe recipe_defaults(const std::string& name) {
  Recipe r{name, {}, {}};
  if (name == "mutag-unsup") {
    r.train.mode = TrainMode::Unsupervised;
  } else if (name == "synth-cls-unsup") {
    r.train.mode = TrainMode::Unsupervised;
    r.train.featurization = Featurization::Attributes;
    r.train.epochs = 30;
  } else if (name == "synth-semi-star") {
    r.train.mode = TrainMode::SemiStar;
    r.train.featurization = Featurization::Attributes;
    r.train.epochs = 200;
    r.train.lr = 1e-2;
    r.train.batch_size = 20;
    r.eval.split_seed = 2024;
  } else {
    throw ConfigError("unknown recipe '" + name + "' (expected mutag-unsup, synth-cls-unsup or synth-semi-star)");
  }
  return r;
}

// Synthetic sources used by the synthetic recipes.
inline Dataset synth_cls_recipe_data() { return synth_classification(50, {5, 9}, 7); }
inline Dataset synth_semi_recipe_data() { return synth_regression(600, {6, 14}, 2024); }

}  // namespace infograph
