#pragma once

#include <string>
#include <vector>

#include "infograph/graph.hpp"
#include "infograph/nn.hpp"
#include "infograph/tensor.hpp"

namespace infograph {

// GIN layer: MLP((1 + eps) * h_v + sum_{u in N(v)} h_u), MLP = Linear-ReLU-Linear.
struct GinLayer {
  Linear lin1;
  Linear lin2;
  double eps = 0.0;

  GinLayer() = default;
  GinLayer(Eigen::Index in, Eigen::Index hidden, Rng& rng, const std::string& name)
      : lin1(in, hidden, rng, name + ".lin1"), lin2(hidden, hidden, rng, name + ".lin2") {}

  Eigen::Index in_features() const { return lin1.in_features(); }
  Eigen::Index out_features() const { return lin2.out_features(); }

  void collect(std::vector<Tensor>& out) const {
    lin1.collect(out);
    lin2.collect(out);
  }
};

inline Tensor gin_layer_forward(const GinLayer& layer, const GraphBatch& batch, const Tensor& h) {
  if (h.cols() != layer.in_features()) {
    throw ShapeError("gin layer: input " + h.shape() + " but layer expects width " +
                     std::to_string(layer.in_features()));
  }
  if (h.rows() != batch.num_nodes) {
    throw ShapeError("gin layer: input " + h.shape() + " for batch of " + std::to_string(batch.num_nodes) + " nodes");
  }
  Tensor neighbors = segment_sum(gather_rows(h, batch.src), batch.dst, std::max(batch.num_nodes, 1));
  if (batch.num_nodes == 0) neighbors = Tensor::zeros(0, h.cols());
  Tensor self = layer.eps == 0.0 ? h : scale(h, 1.0 + layer.eps);
  return layer.lin2(relu(layer.lin1(add(self, neighbors))));
}

// Outputs of one encoder pass. patch is the column concatenation of the
// per-layer node features; the globals are their per-graph sums.
struct Encoding {
  std::vector<Tensor> layer_patches;  // K x [N x hidden]
  Tensor patch;                       // N x (K * hidden)
  std::vector<Tensor> layer_globals;  // K x [B x hidden]
  Tensor global;                      // B x (K * hidden)
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(int input_dim, int num_layers, int hidden, Rng& rng, const std::string& name = "encoder")
      : input_dim_(input_dim), hidden_(hidden) {
    if (input_dim < 1 || num_layers < 1 || hidden < 1) {
      throw ArgumentError("encoder: input_dim, num_layers and hidden must be positive");
    }
    for (int k = 0; k < num_layers; ++k) {
      layers_.emplace_back(k == 0 ? input_dim : hidden, hidden, rng, name + ".layer" + std::to_string(k));
    }
  }

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  int embedding_dim() const { return num_layers() * hidden_; }
  const std::vector<GinLayer>& layers() const { return layers_; }
  std::vector<GinLayer>& layers() { return layers_; }

  // Stable order: layer by layer, lin1 then lin2, weight then bias.
  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_) l.collect(out);
    return out;
  }

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  std::vector<GinLayer> layers_;
};

inline Encoding encode(const Encoder& encoder, const GraphBatch& batch) {
  if (batch.node_features.cols() != encoder.input_dim()) {
    throw ShapeError("encode: batch feature width " + std::to_string(batch.node_features.cols()) +
                     " but encoder expects " + std::to_string(encoder.input_dim()));
  }
  Encoding enc;
  Tensor h = Tensor::constant(batch.node_features);
  for (const auto& layer : encoder.layers()) {
    h = gin_layer_forward(layer, batch, h);
    enc.layer_patches.push_back(h);
    enc.layer_globals.push_back(segment_sum(h, batch.node2graph, batch.num_graphs));
  }
  enc.patch = concat_cols(std::span<const Tensor>(enc.layer_patches));
  enc.global = concat_cols(std::span<const Tensor>(enc.layer_globals));
  return enc;
}

}  // namespace infograph
