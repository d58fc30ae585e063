#pragma once

// Training loops. All randomness comes from named substreams of the run seed
// ("init", "shuffle", "shuffle-labeled", "shuffle-unlabeled", "layer"), and
// every stream, parameter and optimizer moment is captured by checkpoints so
// a resumed run continues bit-identically.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "infograph/checkpoint.hpp"
#include "infograph/config.hpp"
#include "infograph/encoder.hpp"
#include "infograph/evaluate.hpp"
#include "infograph/graph.hpp"
#include "infograph/infomax.hpp"
#include "infograph/log.hpp"
#include "infograph/semisup.hpp"

namespace infograph {

struct MetricsRecord {
  int epoch = 0;
  int steps = 0;
  double total = 0.0;
  double supervised = 0.0;
  double unsupervised = 0.0;
  double transfer = 0.0;
  std::optional<double> valid_mae;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_seconds = 0.0;  // kept out of the metrics file, see write_metrics_line
};

// One JSON object per line. Wall time goes to a separate timing file so the
// metrics file itself is a pure function of (dataset, config).
inline std::string metrics_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["steps"] = r.steps;
  j["loss_total"] = r.total;
  j["loss_supervised"] = r.supervised;
  j["loss_unsupervised"] = r.unsupervised;
  j["loss_transfer"] = r.transfer;
  if (r.valid_mae) j["valid_mae"] = *r.valid_mae;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  return j.dump();
}

inline MetricsRecord parse_metrics_json(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  MetricsRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.steps = j.at("steps").get<int>();
  r.total = j.at("loss_total").get<double>();
  r.supervised = j.at("loss_supervised").get<double>();
  r.unsupervised = j.at("loss_unsupervised").get<double>();
  r.transfer = j.at("loss_transfer").get<double>();
  if (j.contains("valid_mae")) r.valid_mae = j.at("valid_mae").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  return r;
}

inline void write_metrics_line(const std::string& path, const MetricsRecord& r) {
  if (path.empty()) return;
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::app);
  if (!out) throw IoError("cannot append metrics to " + path);
  out << metrics_json(r) << '\n';
  std::ofstream timing(path + ".timing", std::ios::app);
  nlohmann::ordered_json t;
  t["epoch"] = r.epoch;
  t["wall_seconds"] = r.wall_seconds;
  timing << t.dump() << '\n';
}

inline std::vector<MetricsRecord> read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_metrics_json(line));
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  }
  return out;
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline void check_finite(double loss, int epoch, int step) {
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

inline std::vector<std::string> names_of(const std::vector<Tensor>& params) {
  std::vector<std::string> out;
  for (const auto& p : params) out.push_back(p.name());
  return out;
}

inline void check_resume(const Checkpoint& c, const std::string& kind, const TrainConfig& config,
                         const Architecture& arch, const std::vector<Tensor>& params) {
  if (c.kind != kind) throw ConfigError("checkpoint holds a '" + c.kind + "' run, expected '" + kind + "'");
  if (c.config_hash != config_hash(config)) {
    throw ConfigError("checkpoint config hash " + hex_hash(c.config_hash) + " does not match current config " +
                      hex_hash(config_hash(config)));
  }
  if (!(c.arch == arch)) throw ConfigError("checkpoint architecture does not match the current model");
  if (c.params.size() != params.size() || c.names != names_of(params)) {
    throw ConfigError("checkpoint parameter list does not match the current model");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Unsupervised

class UnsupervisedTrainer {
 public:
  UnsupervisedTrainer(const Dataset& data, TrainConfig config)
      : data_(&data), config_(std::move(config)),
        shuffle_(Rng::substream(config_.seed, "shuffle")) {
    config_.validate();
    if (config_.mode != TrainMode::Unsupervised) throw ConfigError("unsupervised trainer needs mode=unsup");
    if (data.size() == 0) throw ArgumentError("train_unsupervised: empty dataset");
    if (data.size() < 2 || config_.batch_size < 2) {
      throw ConfigError("every batch would hold fewer than 2 graphs; the infomax loss needs negatives");
    }
    Rng init = Rng::substream(config_.seed, "init");
    encoder_ = Encoder(data.feature_dim, config_.num_layers, config_.hidden, init, "encoder");
    disc_ = Discriminator(encoder_.embedding_dim(), init, "disc");
    params_ = encoder_.parameters();
    for (const auto& p : disc_.parameters()) params_.push_back(p);
  }

  int epoch() const { return epoch_; }
  const Encoder& encoder() const { return encoder_; }
  const Discriminator& discriminator() const { return disc_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const TrainConfig& config() const { return config_; }

  MetricsRecord run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    auto order = detail::iota_indices(data_->size());
    shuffle_.shuffle(std::span<std::size_t>(order));
    auto batches = detail::chunk(order, static_cast<std::size_t>(config_.batch_size));
    if (batches.back().size() < 2) {
      log_info("epoch " + std::to_string(epoch_ + 1) + ": dropping final batch of 1 graph");
      batches.pop_back();
    }
    MetricsRecord rec;
    rec.epoch = epoch_ + 1;
    for (const auto& idx : batches) {
      GraphBatch batch = make_batch(*data_, idx);
      zero_grads(params_);
      Tensor loss = unsup_loss(encoder_, disc_, batch);
      detail::check_finite(loss.item(), rec.epoch, rec.steps);
      loss.backward();
      adam_step(params_, adam_, config_.lr);
      rec.unsupervised += loss.item();
      ++rec.steps;
    }
    rec.unsupervised /= rec.steps;
    rec.total = rec.unsupervised;
    rec.seed = config_.seed;
    rec.config_hash = hex_hash(config_hash(config_));
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++epoch_;
    write_metrics_line(config_.metrics_path, rec);
    return rec;
  }

  Architecture architecture() const { return {data_->feature_dim, config_.num_layers, config_.hidden, 0}; }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.kind = "unsup";
    c.config_hash = config_hash(config_);
    c.arch = architecture();
    c.epoch = epoch_;
    c.rng_states["shuffle"] = shuffle_.state();
    c.names = detail::names_of(params_);
    c.params = snapshot(params_);
    c.adam = adam_;
    return c;
  }

  void save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(checkpoint(), path); }

  void load_checkpoint(const std::filesystem::path& path) {
    const Checkpoint c = read_checkpoint(path);
    detail::check_resume(c, "unsup", config_, architecture(), params_);
    restore(params_, c.params);
    adam_ = c.adam;
    shuffle_.restore(c.rng_states.at("shuffle"));
    epoch_ = c.epoch;
  }

 private:
  const Dataset* data_;
  TrainConfig config_;
  Rng shuffle_;
  Encoder encoder_;
  Discriminator disc_;
  std::vector<Tensor> params_;
  AdamState adam_;
  int epoch_ = 0;
};

struct UnsupervisedResult {
  Encoder encoder;
  Discriminator discriminator;
  std::vector<MetricsRecord> metrics;
};

// Runs config.epochs epochs (continuing from the checkpoint when one exists
// at `resume_from`) and saves config.checkpoint_path at the end if set.
inline UnsupervisedResult train_unsupervised(const Dataset& data, const TrainConfig& config,
                                             const std::filesystem::path& resume_from = {}) {
  UnsupervisedTrainer trainer(data, config);
  if (!resume_from.empty()) trainer.load_checkpoint(resume_from);
  UnsupervisedResult result;
  while (trainer.epoch() < config.epochs) result.metrics.push_back(trainer.run_epoch());
  if (!config.checkpoint_path.empty()) trainer.save_checkpoint(config.checkpoint_path);
  result.encoder = trainer.encoder();
  result.discriminator = trainer.discriminator();
  return result;
}

// ---------------------------------------------------------------------------
// Semi-supervised (and the plain supervised baseline)

// Mean absolute error of the student's predictions on `data`, averaged over
// target dimensions, in standardized units.
inline double validation_mae(const SemiModel& model, const Dataset& data, int batch_size) {
  Matrix pred = predict_dataset(model, data, batch_size);
  return mae(pred, targets_matrix(data)).mean();
}

// An epoch is one pass over the larger of the labeled and unlabeled pools
// with batch_size graphs from each per step; the smaller pool cycles.
class SemiTrainer {
 public:
  SemiTrainer(const Dataset& labeled, const Dataset& unlabeled, const Dataset& valid, TrainConfig config)
      : labeled_(&labeled), unlabeled_(&unlabeled), valid_(&valid), config_(std::move(config)),
        shuffle_labeled_(Rng::substream(config_.seed, "shuffle-labeled")),
        shuffle_unlabeled_(Rng::substream(config_.seed, "shuffle-unlabeled")),
        layer_rng_(Rng::substream(config_.seed, "layer")) {
    config_.validate();
    if (!is_semi(config_.mode) && config_.mode != TrainMode::Supervised) {
      throw ConfigError("semi-supervised trainer needs mode semi-combined, semi-star or supervised");
    }
    if (labeled.size() == 0) throw ArgumentError("train_semisupervised: empty labeled set");
    if (labeled.target_dim < 1) throw ArgumentError("train_semisupervised: labeled set has no regression targets");
    Rng init = Rng::substream(config_.seed, "init");
    model_ = SemiModel(labeled.feature_dim, config_.num_layers, config_.hidden, labeled.target_dim,
                       config_.semi_options(), init);
    params_ = config_.mode == TrainMode::Supervised ? model_.student_parameters() : model_.parameters();
    all_params_ = model_.parameters();
  }

  int epoch() const { return epoch_; }
  const SemiModel& model() const { return model_; }
  double best_valid_mae() const { return best_mae_; }
  int best_epoch() const { return best_epoch_; }
  const TrainConfig& config() const { return config_; }

  int steps_per_epoch() const {
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    const std::size_t pool = std::max(labeled_->size(), unlabeled_->size());
    return static_cast<int>((pool + bs - 1) / bs);
  }

  MetricsRecord run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    auto lab_order = detail::iota_indices(labeled_->size());
    shuffle_labeled_.shuffle(std::span<std::size_t>(lab_order));
    auto unl_order = detail::iota_indices(unlabeled_->size());
    shuffle_unlabeled_.shuffle(std::span<std::size_t>(unl_order));
    const auto lab_batches = detail::chunk(lab_order, bs);
    const auto unl_batches = detail::chunk(unl_order, bs);

    MetricsRecord rec;
    rec.epoch = epoch_ + 1;
    const int steps = steps_per_epoch();
    for (int s = 0; s < steps; ++s) {
      const GraphBatch lab = make_batch(*labeled_, lab_batches[static_cast<std::size_t>(s) % lab_batches.size()]);
      std::optional<GraphBatch> unl;
      if (!unl_batches.empty()) {
        unl = make_batch(*unlabeled_, unl_batches[static_cast<std::size_t>(s) % unl_batches.size()]);
      }
      zero_grads(params_);
      LossTerms terms = step_loss(lab, unl ? &*unl : nullptr);
      detail::check_finite(terms.total.item(), rec.epoch, s);
      terms.total.backward();
      adam_step(params_, adam_, config_.lr);
      rec.total += terms.total.item();
      rec.supervised += terms.supervised;
      rec.unsupervised += terms.unsupervised;
      rec.transfer += terms.transfer;
      ++rec.steps;
    }
    rec.total /= steps;
    rec.supervised /= steps;
    rec.unsupervised /= steps;
    rec.transfer /= steps;

    const double v = valid_->size() > 0 ? validation_mae(model_, *valid_, config_.batch_size)
                                        : std::numeric_limits<double>::quiet_NaN();
    rec.valid_mae = v;
    ++epoch_;
    // Without a validation set the latest epoch is kept.
    if (valid_->size() == 0 || v < best_mae_) {
      best_mae_ = valid_->size() == 0 ? best_mae_ : v;
      best_epoch_ = epoch_;
      best_ = snapshot(all_params_);
    }
    rec.seed = config_.seed;
    rec.config_hash = hex_hash(config_hash(config_));
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_metrics_line(config_.metrics_path, rec);
    return rec;
  }

  // Model carrying the parameters of the best validation epoch (the current
  // parameters when no epoch has run).
  SemiModel best_model() const {
    Rng scratch(0);
    SemiModel copy(labeled_->feature_dim, config_.num_layers, config_.hidden, labeled_->target_dim,
                   config_.semi_options(), scratch);
    auto dst = copy.parameters();
    restore(dst, best_.empty() ? snapshot(all_params_) : best_);
    return copy;
  }

  Architecture architecture() const {
    return {labeled_->feature_dim, config_.num_layers, config_.hidden, labeled_->target_dim};
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.kind = "semi";
    c.config_hash = config_hash(config_);
    c.arch = architecture();
    c.epoch = epoch_;
    c.rng_states["shuffle-labeled"] = shuffle_labeled_.state();
    c.rng_states["shuffle-unlabeled"] = shuffle_unlabeled_.state();
    c.rng_states["layer"] = layer_rng_.state();
    c.names = detail::names_of(all_params_);
    c.params = snapshot(all_params_);
    c.adam = adam_;
    c.best_params = best_;
    c.best_metric = best_mae_;
    c.best_epoch = best_epoch_;
    return c;
  }

  void save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(checkpoint(), path); }

  void load_checkpoint(const std::filesystem::path& path) {
    const Checkpoint c = read_checkpoint(path);
    detail::check_resume(c, "semi", config_, architecture(), all_params_);
    restore(all_params_, c.params);
    adam_ = c.adam;
    shuffle_labeled_.restore(c.rng_states.at("shuffle-labeled"));
    shuffle_unlabeled_.restore(c.rng_states.at("shuffle-unlabeled"));
    layer_rng_.restore(c.rng_states.at("layer"));
    best_ = c.best_params;
    best_mae_ = c.best_metric;
    best_epoch_ = c.best_epoch;
    epoch_ = c.epoch;
  }

 private:
  LossTerms step_loss(const GraphBatch& lab, const GraphBatch* unl) {
    switch (config_.mode) {
      case TrainMode::Supervised: {
        LossTerms t;
        t.total = supervised_loss(model_, lab);
        t.supervised = t.total.item();
        return t;
      }
      case TrainMode::SemiCombined: return combined_loss(model_, &lab, unl);
      case TrainMode::SemiStar: return infograph_star_loss(model_, &lab, unl, layer_rng_);
      case TrainMode::Unsupervised: break;
    }
    throw ConfigError("unsupported mode for semi-supervised training");
  }

  const Dataset* labeled_;
  const Dataset* unlabeled_;
  const Dataset* valid_;
  TrainConfig config_;
  Rng shuffle_labeled_;
  Rng shuffle_unlabeled_;
  Rng layer_rng_;
  SemiModel model_;
  std::vector<Tensor> params_;      // optimized
  std::vector<Tensor> all_params_;  // checkpointed
  AdamState adam_;
  std::vector<Matrix> best_;
  double best_mae_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int epoch_ = 0;
};

struct SemiResult {
  SemiModel model;  // parameters of the best validation epoch
  std::vector<MetricsRecord> metrics;
  double best_valid_mae = 0.0;
  int best_epoch = 0;
};

inline SemiResult train_semisupervised(const Dataset& labeled, const Dataset& unlabeled, const Dataset& valid,
                                       const TrainConfig& config, const std::filesystem::path& resume_from = {}) {
  SemiTrainer trainer(labeled, unlabeled, valid, config);
  if (!resume_from.empty()) trainer.load_checkpoint(resume_from);
  SemiResult result;
  while (trainer.epoch() < config.epochs) result.metrics.push_back(trainer.run_epoch());
  if (!config.checkpoint_path.empty()) trainer.save_checkpoint(config.checkpoint_path);
  result.model = trainer.best_model();
  result.best_valid_mae = trainer.best_valid_mae();
  result.best_epoch = trainer.best_epoch();
  return result;
}

}  // namespace infograph
