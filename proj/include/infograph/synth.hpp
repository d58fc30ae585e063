#pragma once

// Deterministic synthetic corpora: pure functions of (parameters, seed).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "infograph/graph.hpp"
#include "infograph/rng.hpp"

namespace infograph {

struct SizeRange {
  int min_nodes = 5;
  int max_nodes = 9;
};

inline Graph cycle_graph(int n) {
  Graph g;
  g.num_nodes = n;
  for (int v = 0; v < n; ++v) {
    int a = v, b = (v + 1) % n;
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  return g;
}

inline Graph star_graph(int n) {
  Graph g;
  g.num_nodes = n;
  for (int v = 1; v < n; ++v) g.edges.emplace_back(0, v);
  return g;
}

// Number of triangles, counted once each, via common-neighbor intersection on
// each edge (u < v < w ordering).
inline long count_triangles(const Graph& g) {
  std::vector<std::vector<char>> adj(static_cast<std::size_t>(g.num_nodes),
                                     std::vector<char>(static_cast<std::size_t>(g.num_nodes), 0));
  for (auto [u, v] : g.edges) {
    if (u == v) continue;
    adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
    adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
  }
  long count = 0;
  for (auto [u, v] : g.edges) {
    if (u == v) continue;
    const int hi = std::max(u, v);
    for (int w = hi + 1; w < g.num_nodes; ++w) {
      if (adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(w)] &&
          adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)]) {
        ++count;
      }
    }
  }
  return count;
}

inline constexpr int kSynthDegreeCap = 6;

// Class 0: cycles, class 1: stars. Sizes uniform in the range, degree one-hot
// features capped at 6.
inline Dataset synth_classification(int n_per_class, SizeRange sizes, std::uint64_t seed) {
  if (sizes.min_nodes < 3 || sizes.max_nodes < sizes.min_nodes) {
    throw ArgumentError("synth_classification: size range must satisfy 3 <= min <= max");
  }
  if (n_per_class < 1) throw ArgumentError("synth_classification: n_per_class must be >= 1");
  Rng rng = Rng::substream(seed, "synth-classification");
  Dataset data;
  data.name = "synth-cls";
  data.num_classes = 2;
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < n_per_class; ++i) {
      const int n = rng.between(sizes.min_nodes, sizes.max_nodes);
      Graph g = cls == 0 ? cycle_graph(n) : star_graph(n);
      g.label = cls;
      data.graphs.push_back(std::move(g));
    }
  }
  return build_features(std::move(data), Featurization::Degree, kSynthDegreeCap);
}

inline constexpr double kSynthEdgeProbability = 0.3;
inline constexpr int kSynthRegressionDegreeCap = 10;

// Erdos-Renyi graphs (p = 0.3) with the triangle count as target,
// standardized to mean 0 and unit (population) variance over the dataset.
// Every graph carries class 0 so the set is TU-writable.
inline Dataset synth_regression(int n, SizeRange sizes, std::uint64_t seed) {
  if (sizes.min_nodes < 3 || sizes.max_nodes < sizes.min_nodes) {
    throw ArgumentError("synth_regression: size range must satisfy 3 <= min <= max");
  }
  if (n < 2) throw ArgumentError("synth_regression: need at least 2 graphs for a defined variance");
  Rng rng = Rng::substream(seed, "synth-regression");
  Dataset data;
  data.name = "synth-reg";
  data.num_classes = 1;
  data.target_dim = 1;
  std::vector<double> raw;
  for (int i = 0; i < n; ++i) {
    Graph g;
    g.num_nodes = rng.between(sizes.min_nodes, sizes.max_nodes);
    for (int u = 0; u < g.num_nodes; ++u) {
      for (int v = u + 1; v < g.num_nodes; ++v) {
        if (rng.uniform() < kSynthEdgeProbability) g.edges.emplace_back(u, v);
      }
    }
    g.label = 0;
    raw.push_back(static_cast<double>(count_triangles(g)));
    data.graphs.push_back(std::move(g));
  }
  double mu = 0;
  for (double r : raw) mu += r;
  mu /= static_cast<double>(n);
  double var = 0;
  for (double r : raw) var += (r - mu) * (r - mu);
  var /= static_cast<double>(n);
  if (var <= 0) throw ArgumentError("synth_regression: all targets identical, cannot standardize");
  const double sd = std::sqrt(var);
  for (int i = 0; i < n; ++i) data.graphs[static_cast<std::size_t>(i)].targets = {(raw[static_cast<std::size_t>(i)] - mu) / sd};
  data.target_mean = {mu};
  data.target_std = {sd};
  return build_features(std::move(data), Featurization::Degree, kSynthRegressionDegreeCap);
}

}  // namespace infograph
