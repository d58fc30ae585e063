#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infograph/error.hpp"
#include "infograph/rng.hpp"
#include "infograph/tensor.hpp"

namespace infograph {

inline bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

// Undirected attributed graph. Edges are stored once, 0-indexed, with u <= v.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  Matrix node_features;                            // num_nodes x d
  std::vector<int> node_labels;                    // raw categorical labels, may be empty
  std::optional<int> label;                        // class, 0-based
  std::vector<double> targets;                     // regression targets, may be empty
  std::vector<std::vector<double>> edge_features;  // parallel to edges, may be empty

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
    for (auto [u, v] : edges) {
      ++deg[static_cast<std::size_t>(u)];
      if (u != v) ++deg[static_cast<std::size_t>(v)];
    }
    return deg;
  }

  void validate() const {
    if (node_features.rows() != num_nodes) {
      throw ShapeError("graph: " + std::to_string(node_features.rows()) + " feature rows for " +
                       std::to_string(num_nodes) + " nodes");
    }
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) {
        throw IndexError("graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                         ") outside node range " + std::to_string(num_nodes));
      }
      if (!seen.insert({std::min(u, v), std::max(u, v)}).second) {
        throw FormatError("graph: duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
      }
    }
    if (!node_labels.empty() && static_cast<int>(node_labels.size()) != num_nodes) {
      throw ShapeError("graph: node label count differs from node count");
    }
    if (!edge_features.empty() && edge_features.size() != edges.size()) {
      throw ShapeError("graph: edge feature count differs from edge count");
    }
  }

  bool operator==(const Graph& o) const {
    return num_nodes == o.num_nodes && edges == o.edges && same_matrix(node_features, o.node_features) &&
           node_labels == o.node_labels && label == o.label && targets == o.targets &&
           edge_features == o.edge_features;
  }
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int feature_dim = 0;
  int num_classes = 0;  // 0 when unlabeled
  int target_dim = 0;   // 0 when no regression targets
  // Standardization constants applied to targets, one per target dimension.
  std::vector<double> target_mean;
  std::vector<double> target_std;

  std::size_t size() const { return graphs.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(g.label.value_or(-1));
    return out;
  }

  double average_nodes() const {
    if (graphs.empty()) return 0.0;
    double total = 0;
    for (const auto& g : graphs) total += g.num_nodes;
    return total / static_cast<double>(graphs.size());
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out = *this;
    out.graphs.clear();
    out.graphs.reserve(indices.size());
    for (auto i : indices) {
      if (i >= graphs.size()) throw IndexError("dataset subset: index " + std::to_string(i) + " out of range");
      out.graphs.push_back(graphs[i]);
    }
    return out;
  }

  void validate() const {
    for (const auto& g : graphs) {
      g.validate();
      if (g.node_features.cols() != feature_dim) {
        throw ShapeError("dataset '" + name + "': graph feature width " +
                         std::to_string(g.node_features.cols()) + " differs from " +
                         std::to_string(feature_dim));
      }
      if (g.label && (*g.label < 0 || *g.label >= num_classes)) {
        throw FormatError("dataset '" + name + "': label outside [0, num_classes)");
      }
      if (static_cast<int>(g.targets.size()) != target_dim) {
        throw ShapeError("dataset '" + name + "': target width mismatch");
      }
    }
  }

  bool operator==(const Dataset& o) const {
    return name == o.name && graphs == o.graphs && feature_dim == o.feature_dim &&
           num_classes == o.num_classes && target_dim == o.target_dim && target_mean == o.target_mean &&
           target_std == o.target_std;
  }
};

// Disjoint union of graphs. Each undirected edge appears as two directed
// pairs (one for a self-loop) so neighbor aggregation is a single
// segment_sum over pairs keyed by destination.
struct GraphBatch {
  int num_nodes = 0;
  int num_graphs = 0;
  Matrix node_features;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> node2graph;
  std::vector<int> graph_sizes;
  std::vector<int> labels;  // empty unless every graph is labeled
  Matrix targets;           // num_graphs x target_dim, empty unless every graph has targets

  bool has_labels() const { return !labels.empty(); }
  bool has_targets() const { return targets.rows() == num_graphs && targets.cols() > 0; }
  std::size_t directed_pairs() const { return src.size(); }
};

inline GraphBatch make_batch(std::span<const Graph* const> graphs) {
  if (graphs.empty()) throw ArgumentError("make_batch: empty graph subset");
  const auto width = graphs.front()->node_features.cols();
  GraphBatch b;
  b.num_graphs = static_cast<int>(graphs.size());
  bool labeled = true;
  bool regress = !graphs.front()->targets.empty();
  const auto tdim = graphs.front()->targets.size();
  for (const Graph* g : graphs) {
    if (g->node_features.cols() != width) {
      throw ShapeError("make_batch: feature width " + std::to_string(g->node_features.cols()) +
                       " differs from " + std::to_string(width));
    }
    b.num_nodes += g->num_nodes;
    labeled = labeled && g->label.has_value();
    regress = regress && g->targets.size() == tdim;
  }
  b.node_features.resize(b.num_nodes, width);
  b.node2graph.reserve(static_cast<std::size_t>(b.num_nodes));
  if (regress) b.targets.resize(b.num_graphs, static_cast<Eigen::Index>(tdim));
  int offset = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const Graph& g = *graphs[static_cast<std::size_t>(gi)];
    if (g.num_nodes > 0) b.node_features.middleRows(offset, g.num_nodes) = g.node_features;
    for (int v = 0; v < g.num_nodes; ++v) b.node2graph.push_back(gi);
    for (auto [u, v] : g.edges) {
      b.src.push_back(offset + u);
      b.dst.push_back(offset + v);
      if (u != v) {
        b.src.push_back(offset + v);
        b.dst.push_back(offset + u);
      }
    }
    b.graph_sizes.push_back(g.num_nodes);
    if (labeled) b.labels.push_back(*g.label);
    if (regress) {
      for (std::size_t t = 0; t < tdim; ++t) b.targets(gi, static_cast<Eigen::Index>(t)) = g.targets[t];
    }
    offset += g.num_nodes;
  }
  return b;
}

inline GraphBatch make_batch(std::span<const Graph> graphs) {
  std::vector<const Graph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  return make_batch(std::span<const Graph* const>(ptrs));
}

inline GraphBatch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<const Graph*> ptrs;
  for (auto i : indices) {
    if (i >= data.size()) throw IndexError("make_batch: graph index " + std::to_string(i) + " out of range");
    ptrs.push_back(&data.graphs[i]);
  }
  return make_batch(std::span<const Graph* const>(ptrs));
}

// Disjoint union of two batches, graphs of `first` before those of `second`.
inline GraphBatch merge_batches(const GraphBatch& first, const GraphBatch& second) {
  if (first.node_features.cols() != second.node_features.cols()) {
    throw ShapeError("merge_batches: feature widths differ");
  }
  GraphBatch b;
  b.num_nodes = first.num_nodes + second.num_nodes;
  b.num_graphs = first.num_graphs + second.num_graphs;
  b.node_features.resize(b.num_nodes, first.node_features.cols());
  b.node_features.topRows(first.num_nodes) = first.node_features;
  b.node_features.bottomRows(second.num_nodes) = second.node_features;
  b.src = first.src;
  b.dst = first.dst;
  for (std::size_t i = 0; i < second.src.size(); ++i) {
    b.src.push_back(second.src[i] + first.num_nodes);
    b.dst.push_back(second.dst[i] + first.num_nodes);
  }
  b.node2graph = first.node2graph;
  for (int g : second.node2graph) b.node2graph.push_back(g + first.num_graphs);
  b.graph_sizes = first.graph_sizes;
  b.graph_sizes.insert(b.graph_sizes.end(), second.graph_sizes.begin(), second.graph_sizes.end());
  if (first.has_labels() && second.has_labels()) {
    b.labels = first.labels;
    b.labels.insert(b.labels.end(), second.labels.begin(), second.labels.end());
  }
  if (first.has_targets() && second.has_targets() && first.targets.cols() == second.targets.cols()) {
    b.targets.resize(b.num_graphs, first.targets.cols());
    b.targets.topRows(first.num_graphs) = first.targets;
    b.targets.bottomRows(second.num_graphs) = second.targets;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Input featurization

enum class Featurization { NodeLabels, Degree, Attributes };

inline std::string to_string(Featurization f) {
  switch (f) {
    case Featurization::NodeLabels: return "node-labels";
    case Featurization::Degree: return "degree";
    case Featurization::Attributes: return "attributes";
  }
  return "?";
}

inline Featurization parse_featurization(const std::string& s) {
  if (s == "node-labels") return Featurization::NodeLabels;
  if (s == "degree") return Featurization::Degree;
  if (s == "attributes") return Featurization::Attributes;
  throw ConfigError("unknown featurization '" + s + "' (expected node-labels, degree or attributes)");
}

// node-labels: one-hot over the dataset-wide label alphabet.
// degree: one-hot of min(degree, max_degree), width max_degree + 1.
// attributes: keep the parsed node attribute matrix.
inline Dataset build_features(Dataset data, Featurization mode, int max_degree = 10) {
  switch (mode) {
    case Featurization::NodeLabels: {
      std::set<int> alphabet;
      for (const auto& g : data.graphs) {
        if (static_cast<int>(g.node_labels.size()) != g.num_nodes) {
          throw ConfigError("node-labels featurization requested but dataset '" + data.name +
                            "' has no node labels");
        }
        alphabet.insert(g.node_labels.begin(), g.node_labels.end());
      }
      std::map<int, int> column;
      for (int l : alphabet) column.emplace(l, static_cast<int>(column.size()));
      data.feature_dim = static_cast<int>(column.size());
      for (auto& g : data.graphs) {
        g.node_features = Matrix::Zero(g.num_nodes, data.feature_dim);
        for (int v = 0; v < g.num_nodes; ++v) g.node_features(v, column.at(g.node_labels[static_cast<std::size_t>(v)])) = 1.0;
      }
      break;
    }
    case Featurization::Degree: {
      if (max_degree < 0) throw ConfigError("degree featurization: cap must be >= 0");
      data.feature_dim = max_degree + 1;
      for (auto& g : data.graphs) {
        g.node_features = Matrix::Zero(g.num_nodes, data.feature_dim);
        const auto deg = g.degrees();
        for (int v = 0; v < g.num_nodes; ++v) g.node_features(v, std::min(deg[static_cast<std::size_t>(v)], max_degree)) = 1.0;
      }
      break;
    }
    case Featurization::Attributes:
      if (data.feature_dim == 0) {
        throw ConfigError("attributes featurization requested but dataset '" + data.name +
                          "' has no node attributes");
      }
      break;
  }
  return data;
}

// ---------------------------------------------------------------------------
// Cross-validation folds

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, then k contiguous folds whose sizes differ by at most one
// (the first n % k folds take the extra element).
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("kfold_split: k must be >= 2");
  if (n < k) throw ArgumentError("kfold_split: n=" + std::to_string(n) + " is smaller than k=" + std::to_string(k));
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = Rng::substream(seed, "kfold");
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<Fold> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= start && i < start + len) {
        folds[f].test.push_back(perm[i]);
      } else {
        folds[f].train.push_back(perm[i]);
      }
    }
    start += len;
  }
  return folds;
}

}  // namespace infograph
