#pragma once

// Dense feed-forward networks in double precision: forward pass, reverse-mode
// gradients, Smooth-L1 loss and bias-corrected Adam. Batches are row-major in
// the sense that each row of a Matrix is one sample.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bdqn/errors.hpp"
#include "bdqn/rng.hpp"

namespace bdqn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

struct DenseNet {
  std::vector<Layer> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

struct LayerSpec {
  std::size_t out = 0;
  Activation activation = Activation::relu;
};

/// All-zero network with the given shape; throws ShapeError on a zero dimension.
inline DenseNet make_dense(std::size_t in, const std::vector<LayerSpec>& specs) {
  if (in == 0 || specs.empty()) throw ShapeError("make_dense: empty network");
  DenseNet net;
  std::size_t prev = in;
  for (const auto& s : specs) {
    if (s.out == 0) throw ShapeError("make_dense: zero-width layer");
    Layer l;
    l.weight = Matrix::Zero(static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(prev));
    l.bias = Vector::Zero(static_cast<Eigen::Index>(s.out));
    l.activation = s.activation;
    net.layers.push_back(std::move(l));
    prev = s.out;
  }
  return net;
}

/// He-uniform (relu layers) / LeCun-uniform (linear layers) fan-in init, zero
/// bias. Linear-layer limits are multiplied by `linear_scale`.
inline void init_uniform_fan_in(DenseNet& net, RngStream& rng, double linear_scale = 1.0) {
  for (auto& l : net.layers) {
    const double fan_in = static_cast<double>(l.in_dim());
    const double limit = l.activation == Activation::relu ? std::sqrt(6.0 / fan_in)
                                                          : linear_scale * std::sqrt(3.0 / fan_in);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    }
    l.bias.setZero();
  }
}

inline void check_chain(const DenseNet& net) {
  for (std::size_t i = 1; i < net.layers.size(); ++i) {
    if (net.layers[i].in_dim() != net.layers[i - 1].out_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " does not chain with its predecessor");
    }
  }
}

inline bool all_finite(const DenseNet& net) {
  for (const auto& l : net.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

/// Post-activation outputs of every layer; activations[0] is the input batch.
struct ForwardTrace {
  std::vector<Matrix> activations;

  const Matrix& output() const { return activations.back(); }
};

namespace detail {

inline void apply_activation(Matrix& m, Activation a) {
  if (a == Activation::relu) m = m.cwiseMax(0.0);
}

inline void require_input(const DenseNet& net, Eigen::Index cols) {
  if (net.layers.empty()) throw ShapeError("forward: empty network");
  if (static_cast<std::size_t>(cols) != net.in_dim()) {
    throw ShapeError("forward: input width " + std::to_string(cols) + " != network input " +
                     std::to_string(net.in_dim()));
  }
}

}  // namespace detail

inline ForwardTrace forward_trace(const DenseNet& net, const Matrix& batch) {
  detail::require_input(net, batch.cols());
  ForwardTrace trace;
  trace.activations.reserve(net.layers.size() + 1);
  trace.activations.push_back(batch);
  for (const auto& l : net.layers) {
    Matrix z = trace.activations.back() * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    detail::apply_activation(z, l.activation);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

inline Matrix forward(const DenseNet& net, const Matrix& batch) {
  detail::require_input(net, batch.cols());
  Matrix x = batch;
  for (const auto& l : net.layers) {
    Matrix z = x * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    detail::apply_activation(z, l.activation);
    x = std::move(z);
  }
  return x;
}

inline Vector forward(const DenseNet& net, const Vector& input) {
  Matrix row = input.transpose();
  return forward(net, row).row(0).transpose();
}

struct LayerGrad {
  Matrix weight;
  Vector bias;
};

struct GradientSet {
  std::vector<LayerGrad> layers;

  static GradientSet zeros_like(const DenseNet& net) {
    GradientSet g;
    for (const auto& l : net.layers) {
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    return g;
  }

  bool is_zero() const {
    for (const auto& l : layers) {
      if (!l.weight.isZero(0.0) || !l.bias.isZero(0.0)) return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  GradientSet& operator+=(const GradientSet& o) {
    if (o.layers.size() != layers.size()) throw ShapeError("GradientSet +=: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }
};

struct Backprop {
  GradientSet grads;
  Matrix input_grad;  // dLoss/dInput, same shape as the input batch
};

/// Reverse pass over a recorded trace. `output_grad` is dLoss/dOutput per sample.
inline Backprop backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& output_grad) {
  if (trace.activations.size() != net.layers.size() + 1) throw ShapeError("backward: trace/net mismatch");
  const Matrix& out = trace.output();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw ShapeError("backward: loss gradient shape does not match forward output");
  }
  Backprop bp;
  bp.grads.layers.resize(net.layers.size());
  Matrix delta = output_grad;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Layer& l = net.layers[i];
    if (l.activation == Activation::relu) {
      // Subgradient at exactly 0 is 0: post-activation > 0 iff pre-activation > 0.
      delta = delta.cwiseProduct((trace.activations[i + 1].array() > 0.0).cast<double>().matrix());
    }
    bp.grads.layers[i].weight = delta.transpose() * trace.activations[i];
    bp.grads.layers[i].bias = delta.colwise().sum().transpose();
    delta = delta * l.weight;
  }
  bp.input_grad = std::move(delta);
  return bp;
}

inline GradientSet backward(const DenseNet& net, const Matrix& batch, const Matrix& output_grad) {
  return backward(net, forward_trace(net, batch), output_grad).grads;
}

/// Huber loss with transition point 1.
inline double smooth_l1(double prediction, double target) {
  if (!std::isfinite(prediction) || !std::isfinite(target)) throw NumericError("smooth_l1: non-finite input");
  const double d = prediction - target;
  const double ad = std::abs(d);
  return ad <= 1.0 ? 0.5 * d * d : ad - 0.5;
}

/// d smooth_l1 / d prediction.
inline double smooth_l1_grad(double prediction, double target) {
  const double d = prediction - target;
  if (d > 1.0) return 1.0;
  if (d < -1.0) return -1.0;
  return d;
}

struct AdamHyper {
  double learning_rate = 6.25e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<LayerGrad> m;
  std::vector<LayerGrad> v;

  static AdamState for_net(const DenseNet& net, AdamHyper hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    s.m = GradientSet::zeros_like(net).layers;
    s.v = s.m;
    return s;
  }
};

/// One bias-corrected Adam step, in place.
inline void adam_step(DenseNet& net, const GradientSet& grads, AdamState& state) {
  if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size() ||
      state.v.size() != net.layers.size()) {
    throw ShapeError("adam_step: layer count mismatch");
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const auto& g = grads.layers[i];
    if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() ||
        g.bias.size() != l.bias.size() || state.m[i].weight.rows() != l.weight.rows() ||
        state.m[i].weight.cols() != l.weight.cols() || state.m[i].bias.size() != l.bias.size()) {
      throw ShapeError("adam_step: layer " + std::to_string(i) + " shape mismatch");
    }
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = h.beta1 * m + (1.0 - h.beta1) * grad;
    v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
    param.array() -= h.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    update(net.layers[i].weight, grads.layers[i].weight, state.m[i].weight, state.v[i].weight);
    update(net.layers[i].bias, grads.layers[i].bias, state.m[i].bias, state.v[i].bias);
  }
}

}  // namespace bdqn
