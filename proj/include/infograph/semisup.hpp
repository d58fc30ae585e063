#pragma once

// Semi-supervised objectives: a single encoder regularized by the infomax
// loss, and the dual-encoder variant where a supervised student and an
// unsupervised teacher are tied by global-global mutual information at one
// randomly drawn layer per update.

#include <optional>
#include <string>
#include <vector>

#include "infograph/encoder.hpp"
#include "infograph/infomax.hpp"
#include "infograph/log.hpp"
#include "infograph/nn.hpp"

namespace infograph {

enum class TransferLayers { Random, All };

struct SemiOptions {
  double lambda = 1e-3;
  // Weight graph j's transfer term by 1 / |G_j|, as the objective is written.
  bool size_weighted_transfer = true;
  TransferLayers transfer_layers = TransferLayers::Random;
};

class SemiModel {
 public:
  SemiModel() = default;

  // Initialization order is part of the reproducibility contract: student
  // encoder, head, teacher encoder, patch discriminator, layer discriminators.
  SemiModel(int input_dim, int num_layers, int hidden, int target_dim, SemiOptions options, Rng& rng)
      : sup_encoder(input_dim, num_layers, hidden, rng, "student"),
        head(num_layers * hidden, target_dim, rng, "head"),
        unsup_encoder(input_dim, num_layers, hidden, rng, "teacher"),
        patch_disc(num_layers * hidden, rng, "patch_disc"),
        options(options) {
    if (options.lambda < 0) throw ArgumentError("semi model: lambda must be >= 0");
    for (int k = 0; k < num_layers; ++k) {
      layer_discs.emplace_back(hidden, rng, "layer_disc" + std::to_string(k));
    }
  }

  Encoder sup_encoder;
  Linear head;
  Encoder unsup_encoder;
  Discriminator patch_disc;
  std::vector<Discriminator> layer_discs;
  SemiOptions options;

  int num_layers() const { return sup_encoder.num_layers(); }

  std::vector<Tensor> student_parameters() const {
    auto out = sup_encoder.parameters();
    head.collect(out);
    return out;
  }

  std::vector<Tensor> teacher_parameters() const {
    auto out = unsup_encoder.parameters();
    for (const auto& p : patch_disc.parameters()) out.push_back(p);
    return out;
  }

  std::vector<Tensor> transfer_parameters() const {
    std::vector<Tensor> out;
    for (const auto& d : layer_discs) {
      for (const auto& p : d.parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Tensor> parameters() const {
    auto out = student_parameters();
    for (const auto& p : teacher_parameters()) out.push_back(p);
    for (const auto& p : transfer_parameters()) out.push_back(p);
    return out;
  }
};

// Loss tensor plus the unweighted value of each term, for bookkeeping.
struct LossTerms {
  Tensor total;
  double supervised = 0.0;
  double unsupervised = 0.0;
  double transfer = 0.0;
};

inline Tensor predict(const SemiModel& model, const GraphBatch& batch) {
  return model.head(encode(model.sup_encoder, batch).global);
}

// Mean over graphs and target dimensions of the squared prediction error.
inline Tensor supervised_loss(const SemiModel& model, const GraphBatch& batch) {
  if (!batch.has_targets()) throw ArgumentError("supervised_loss: batch carries no regression targets");
  Tensor pred = predict(model, batch);
  if (pred.cols() != batch.targets.cols()) {
    throw ShapeError("supervised_loss: head emits " + pred.shape() + " but targets are " +
                     shape_str(batch.targets.rows(), batch.targets.cols()));
  }
  return mean(square(sub(pred, Tensor::constant(batch.targets))));
}

namespace detail {

inline std::optional<GraphBatch> union_of(const GraphBatch* labeled, const GraphBatch* unlabeled) {
  if (labeled && unlabeled) return merge_batches(*labeled, *unlabeled);
  if (labeled) return *labeled;
  if (unlabeled) return *unlabeled;
  return std::nullopt;
}

}  // namespace detail

// supervised(labeled) + lambda * infomax(labeled u unlabeled), one shared
// encoder. Either batch may be null; a missing labeled batch contributes 0.
inline LossTerms combined_loss(const SemiModel& model, const GraphBatch* labeled, const GraphBatch* unlabeled) {
  LossTerms terms;
  Tensor total = Tensor::scalar(0.0);
  if (labeled) {
    Tensor sup = supervised_loss(model, *labeled);
    terms.supervised = sup.item();
    total = sup;
  }
  if (auto all = detail::union_of(labeled, unlabeled)) {
    Tensor unsup = unsup_loss(model.sup_encoder, model.patch_disc, *all);
    terms.unsupervised = unsup.item();
    total = labeled ? add(total, scale(unsup, model.options.lambda)) : scale(unsup, model.options.lambda);
  }
  terms.total = total;
  return terms;
}

// Global-global JSD loss between student and teacher globals at one layer.
// Matched graphs are positives, every cross-graph pair a negative.
inline Tensor transfer_loss(const SemiModel& model, int layer, const Encoding& student, const Encoding& teacher,
                            const GraphBatch& batch) {
  if (layer < 0 || layer >= model.num_layers()) throw IndexError("transfer_loss: layer out of range");
  const auto k = static_cast<std::size_t>(layer);
  Tensor scores = score_pairs(model.layer_discs[k], student.layer_globals[k], teacher.layer_globals[k]);
  std::vector<int> identity(static_cast<std::size_t>(batch.num_graphs));
  for (int g = 0; g < batch.num_graphs; ++g) identity[static_cast<std::size_t>(g)] = g;
  std::vector<int> ones(identity.size(), 1);
  std::vector<double> weights;
  if (model.options.size_weighted_transfer) {
    for (int s : batch.graph_sizes) weights.push_back(s > 0 ? 1.0 / static_cast<double>(s) : 0.0);
  }
  return jsd_mi_loss(scores, identity, ones, weights);
}

// supervised(student) + infomax(teacher) + lambda * transfer. `layer` pins
// the transfer layer; otherwise it is drawn uniformly from rng (or all
// layers are summed when the model is configured that way).
inline LossTerms infograph_star_loss(const SemiModel& model, const GraphBatch* labeled, const GraphBatch* unlabeled,
                                     Rng& rng, std::optional<int> layer = std::nullopt) {
  LossTerms terms;
  Tensor total = Tensor::scalar(0.0);
  if (labeled) {
    Tensor sup = supervised_loss(model, *labeled);
    terms.supervised = sup.item();
    total = sup;
  }
  auto all = detail::union_of(labeled, unlabeled);
  if (!all) {
    terms.total = total;
    return terms;
  }
  Encoding teacher = encode(model.unsup_encoder, *all);
  Tensor unsup = unsup_loss(model.patch_disc, teacher, *all);
  terms.unsupervised = unsup.item();
  total = labeled ? add(total, unsup) : unsup;

  Encoding student = encode(model.sup_encoder, *all);
  std::vector<int> layers;
  if (layer) {
    layers.push_back(*layer);
  } else if (model.options.transfer_layers == TransferLayers::All) {
    for (int k = 0; k < model.num_layers(); ++k) layers.push_back(k);
  } else {
    layers.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(model.num_layers()))));
  }
  Tensor transfer;
  for (int k : layers) {
    Tensor t = transfer_loss(model, k, student, teacher, *all);
    transfer = transfer.defined() ? add(transfer, t) : t;
  }
  terms.transfer = transfer.item();
  terms.total = add(total, scale(transfer, model.options.lambda));
  return terms;
}

// Model MAE relative to the supervised baseline; below 1 is an improvement.
inline double error_ratio(double model_mae, double supervised_mae) {
  if (!(supervised_mae > 0)) throw ArgumentError("error_ratio: supervised MAE must be positive");
  return model_mae / supervised_mae;
}

}  // namespace infograph
