#pragma once

#include <span>
#include <string>
#include <vector>

#include "infograph/encoder.hpp"
#include "infograph/graph.hpp"
#include "infograph/log.hpp"
#include "infograph/nn.hpp"
#include "infograph/tensor.hpp"

namespace infograph {

// Three Linear+ReLU layers plus a linear shortcut from input to output.
struct Projection {
  Linear l1, l2, l3, shortcut;

  Projection() = default;
  Projection(Eigen::Index width, Rng& rng, const std::string& name)
      : l1(width, width, rng, name + ".l1"),
        l2(width, width, rng, name + ".l2"),
        l3(width, width, rng, name + ".l3"),
        shortcut(width, width, rng, name + ".shortcut") {}

  Eigen::Index width() const { return l1.in_features(); }

  Tensor operator()(const Tensor& x) const {
    Tensor h = relu(l3(relu(l2(relu(l1(x))))));
    return add(h, shortcut(x));
  }

  void collect(std::vector<Tensor>& out) const {
    l1.collect(out);
    l2.collect(out);
    l3.collect(out);
    shortcut.collect(out);
  }
};

// T(local, global) = <local_proj(local), global_proj(global)>.
struct Discriminator {
  Projection local_proj;
  Projection global_proj;

  Discriminator() = default;
  Discriminator(Eigen::Index width, Rng& rng, const std::string& name = "disc")
      : local_proj(width, rng, name + ".local"), global_proj(width, rng, name + ".global") {}

  Eigen::Index width() const { return local_proj.width(); }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    local_proj.collect(out);
    global_proj.collect(out);
    return out;
  }
};

// S[i, g] = T(patch[i], global[g]) for every patch row and every graph, as a
// single product of the two projected matrices.
inline Tensor score_pairs(const Discriminator& disc, const Tensor& patch, const Tensor& global) {
  if (patch.cols() != disc.width() || global.cols() != disc.width()) {
    throw ShapeError("score_pairs: patch " + patch.shape() + " and global " + global.shape() +
                     " must both have width " + std::to_string(disc.width()));
  }
  return matmul(disc.local_proj(patch), transpose(disc.global_proj(global)));
}

// Per-pair weights of the Jensen-Shannon estimator. Column g holds the
// positive weight w_g / |G_g| on rows of graph g and the negative weight
// w_g / (N - |G_g|) on every other row.
struct PairWeights {
  Matrix positive;
  Matrix negative;
  std::size_t positive_pairs = 0;
  std::size_t negative_pairs = 0;
};

inline PairWeights jsd_pair_weights(std::span<const int> node2graph, std::span<const int> sizes,
                                    std::span<const double> graph_weights = {}) {
  const auto n = static_cast<Eigen::Index>(node2graph.size());
  const auto b = static_cast<Eigen::Index>(sizes.size());
  if (!graph_weights.empty() && static_cast<Eigen::Index>(graph_weights.size()) != b) {
    throw ShapeError("jsd weights: " + std::to_string(graph_weights.size()) + " graph weights for " +
                     std::to_string(b) + " graphs");
  }
  PairWeights w;
  w.positive = Matrix::Zero(n, b);
  w.negative = Matrix::Zero(n, b);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = node2graph[static_cast<std::size_t>(i)];
    if (own < 0 || own >= b) throw IndexError("jsd weights: node graph id " + std::to_string(own) + " out of range");
    for (Eigen::Index g = 0; g < b; ++g) {
      const double wg = graph_weights.empty() ? 1.0 : graph_weights[static_cast<std::size_t>(g)];
      const auto size = sizes[static_cast<std::size_t>(g)];
      if (own == g) {
        w.positive(i, g) = wg / static_cast<double>(size);
        ++w.positive_pairs;
      } else {
        w.negative(i, g) = wg / static_cast<double>(n - size);
        ++w.negative_pairs;
      }
    }
  }
  return w;
}

// Negated Jensen-Shannon MI estimate, averaged over the B graphs:
//   L = (1/B) sum_g [ mean_{i in g} sp(-S[i,g]) + mean_{i not in g} sp(S[i,g]) ]
// With B = 1 there are no negatives and that part is 0.
inline Tensor jsd_mi_loss(const Tensor& scores, std::span<const int> node2graph, std::span<const int> sizes,
                          std::span<const double> graph_weights = {}) {
  if (scores.rows() != static_cast<Eigen::Index>(node2graph.size()) ||
      scores.cols() != static_cast<Eigen::Index>(sizes.size())) {
    throw ShapeError("jsd_mi_loss: scores " + scores.shape() + " for " + std::to_string(node2graph.size()) +
                     " nodes and " + std::to_string(sizes.size()) + " graphs");
  }
  if (sizes.empty()) throw ShapeError("jsd_mi_loss: no graphs");
  if (sizes.size() == 1) log_warning("jsd_mi_loss: batch holds a single graph, no negative pairs");
  PairWeights w = jsd_pair_weights(node2graph, sizes, graph_weights);
  Tensor pos = mul(softplus(negate(scores)), Tensor::constant(std::move(w.positive)));
  Tensor neg = mul(softplus(scores), Tensor::constant(std::move(w.negative)));
  return scale(sum(add(pos, neg)), 1.0 / static_cast<double>(sizes.size()));
}

inline Tensor unsup_loss(const Discriminator& disc, const Encoding& enc, const GraphBatch& batch) {
  Tensor scores = score_pairs(disc, enc.patch, enc.global);
  return jsd_mi_loss(scores, batch.node2graph, batch.graph_sizes);
}

inline Tensor unsup_loss(const Encoder& encoder, const Discriminator& disc, const GraphBatch& batch) {
  return unsup_loss(disc, encode(encoder, batch), batch);
}

}  // namespace infograph
