#pragma once

#include <string>
#include <vector>

#include "infograph/tensor.hpp"

namespace infograph {

// Affine map x*W + b with W stored as [in x out]; Glorot weights, zero bias.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng, const std::string& name)
      : weight(Tensor::parameter(glorot_uniform(in, out, rng), name + ".weight")),
        bias(Tensor::parameter(Matrix::Zero(1, out), name + ".bias")) {}

  Eigen::Index in_features() const { return weight.rows(); }
  Eigen::Index out_features() const { return weight.cols(); }

  Tensor operator()(const Tensor& x) const {
    if (x.cols() != in_features()) {
      throw ShapeError("linear '" + weight.name() + "': input " + x.shape() + " but expects width " +
                       std::to_string(in_features()));
    }
    return add_row(matmul(x, weight), bias);
  }

  void collect(std::vector<Tensor>& out) const {
    out.push_back(weight);
    out.push_back(bias);
  }
};

// Detached copies of parameter values, for best-model snapshots.
inline std::vector<Matrix> snapshot(std::span<const Tensor> params) {
  std::vector<Matrix> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.value());
  return values;
}

inline void restore(std::span<Tensor> params, const std::vector<Matrix>& values) {
  if (values.size() != params.size()) {
    throw ShapeError("restore: " + std::to_string(values.size()) + " values for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].rows() != params[i].rows() || values[i].cols() != params[i].cols()) {
      throw ShapeError("restore: shape mismatch for '" + params[i].name() + "'");
    }
    params[i].mutable_value() = values[i];
  }
}

}  // namespace infograph
