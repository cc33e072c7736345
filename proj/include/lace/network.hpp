#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lace/matrix.hpp"
#include "lace/rng.hpp"

namespace lace {

/// Mutable view over one parameter tensor's storage, the currency between
/// model and optimizer. is_bias lets the optimizer treat bias vectors
/// differently when configured to.
struct ParamView {
  double* data = nullptr;
  std::size_t size = 0;
  bool is_bias = false;
};

/// Fully connected layer, weights stored (in_dim x out_dim) so a batch row
/// multiplies from the left.
struct AffineLayer {
  Matrix weights;
  std::vector<double> bias;
};

/// Gradients for every weight matrix and bias vector of an MlpModel,
/// mean-reduced over the batch.
struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::vector<ParamView> views() {
    std::vector<ParamView> out;
    out.reserve(2 * weights.size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({weights[l].data(), weights[l].size(), false});
      out.push_back({biases[l].data(), biases[l].size(), true});
    }
    return out;
  }
};

/// Feed-forward classifier: affine layers with ReLU between them, the last
/// layer emitting raw logits. Forward caches what backward needs; each
/// forward pairs with at most one backward. A model is single-owner state
/// while training; give every trial its own instance.
class MlpModel {
 public:
  MlpModel() = default;

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  AffineLayer& layer(std::size_t l) { return layers_[l]; }
  const AffineLayer& layer(std::size_t l) const { return layers_[l]; }

  std::vector<ParamView> param_views() {
    std::vector<ParamView> out;
    out.reserve(2 * layers_.size());
    for (auto& layer : layers_) {
      out.push_back({layer.weights.data(), layer.weights.size(), false});
      out.push_back({layer.bias.data(), layer.bias.size(), true});
    }
    return out;
  }

  Matrix forward(const Matrix& batch) {
    if (batch.cols() != input_dim()) {
      throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                  " features, model expects " +
                                  std::to_string(input_dim()));
    }
    inputs_.clear();
    preacts_.clear();
    Matrix activation = batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      inputs_.push_back(activation);
      Matrix z = matmul(activation, layers_[l].weights);
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += layers_[l].bias[j];
      }
      if (l + 1 < layers_.size()) {
        preacts_.push_back(z);
        for (std::size_t i = 0; i < z.size(); ++i) {
          if (z.data()[i] < 0.0) z.data()[i] = 0.0;
        }
      }
      activation = std::move(z);
    }
    has_cache_ = true;
    return activation;
  }

  /// grad_logits holds one un-scaled per-sample gradient row; the mean
  /// reduction over the batch happens here, so the last layer's bias
  /// gradient is the column mean of grad_logits.
  ParamGrads backward(const Matrix& grad_logits) {
    if (!has_cache_) {
      throw std::runtime_error("backward: no cached forward pass for this batch");
    }
    const Matrix& last_input = inputs_.back();
    if (grad_logits.rows() != last_input.rows() ||
        grad_logits.cols() != output_dim()) {
      throw std::invalid_argument("backward: grad shape " + grad_logits.shape_string() +
                                  " does not match logits (" +
                                  std::to_string(last_input.rows()) + "x" +
                                  std::to_string(output_dim()) + ")");
    }

    ParamGrads grads;
    grads.weights.resize(layers_.size());
    grads.biases.resize(layers_.size());

    const double inv_batch = 1.0 / static_cast<double>(grad_logits.rows());
    Matrix grad = grad_logits;
    for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] *= inv_batch;

    for (std::size_t l = layers_.size(); l-- > 0;) {
      grads.weights[l] = matmul_transpose_a(inputs_[l], grad);
      grads.biases[l].assign(grad.cols(), 0.0);
      for (std::size_t r = 0; r < grad.rows(); ++r) {
        auto row = grad.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) grads.biases[l][j] += row[j];
      }
      if (l > 0) {
        grad = matmul_transpose_b(grad, layers_[l].weights);
        const Matrix& z = preacts_[l - 1];
        for (std::size_t i = 0; i < grad.size(); ++i) {
          if (z.data()[i] <= 0.0) grad.data()[i] = 0.0;
        }
      }
    }
    has_cache_ = false;
    return grads;
  }

  friend MlpModel init_model(std::span<const std::size_t> layer_dims, Rng& rng);

 private:
  std::vector<std::size_t> dims_;
  std::vector<AffineLayer> layers_;
  std::vector<Matrix> inputs_;   // input to each affine layer
  std::vector<Matrix> preacts_;  // pre-activation of each hidden layer
  bool has_cache_ = false;
};

/// He-initialized MLP: weights ~ N(0, sqrt(2/in_dim)), biases zero.
/// Draw order is fixed (row-major per layer), so one seed pins every
/// parameter.
inline MlpModel init_model(std::span<const std::size_t> layer_dims, Rng& rng) {
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("init_model: need at least 2 dims (input, output), got " +
                                std::to_string(layer_dims.size()));
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("init_model: all dims must be positive");
  }
  MlpModel model;
  model.dims_.assign(layer_dims.begin(), layer_dims.end());
  model.layers_.resize(layer_dims.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in_dim = layer_dims[l];
    const std::size_t out_dim = layer_dims[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
    AffineLayer& layer = model.layers_[l];
    layer.weights = Matrix(in_dim, out_dim);
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = rng.normal(0.0, stddev);
    }
    layer.bias.assign(out_dim, 0.0);
  }
  return model;
}

}  // namespace lace
