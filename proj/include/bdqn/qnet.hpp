#pragma once

// Shared-body, K-head Q-network and the policy/target pair.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <vector>

#include "bdqn/nn.hpp"

namespace bdqn {

struct QNetShape {
  std::size_t obs_dim = 0;
  std::size_t action_count = 0;
  std::size_t heads = 9;
  std::vector<std::size_t> body_hidden = {64};
  std::vector<std::size_t> head_hidden = {32};
  double output_init_scale = 1.0;  // multiplies the init range of each head's linear output layer
};

struct MultiHeadNet {
  DenseNet body;
  std::vector<DenseNet> heads;

  std::size_t head_count() const { return heads.size(); }
  std::size_t obs_dim() const { return body.in_dim(); }
  std::size_t action_count() const { return heads.empty() ? 0 : heads.front().out_dim(); }
};

/// Zero-initialised network of the given shape.
inline MultiHeadNet make_multihead(const QNetShape& shape) {
  if (shape.heads == 0 || shape.action_count == 0 || shape.obs_dim == 0) {
    throw ShapeError("make_multihead: heads, actions and obs_dim must be positive");
  }
  std::vector<LayerSpec> body;
  for (auto w : shape.body_hidden) body.push_back({w, Activation::relu});
  if (body.empty()) throw ShapeError("make_multihead: body needs at least one layer");
  std::vector<LayerSpec> head;
  for (auto w : shape.head_hidden) head.push_back({w, Activation::relu});
  head.push_back({shape.action_count, Activation::identity});

  MultiHeadNet net;
  net.body = make_dense(shape.obs_dim, body);
  for (std::size_t k = 0; k < shape.heads; ++k) net.heads.push_back(make_dense(body.back().out, head));
  return net;
}

inline MultiHeadNet make_multihead(const QNetShape& shape, RngStream& rng) {
  MultiHeadNet net = make_multihead(shape);
  init_uniform_fan_in(net.body, rng);
  for (auto& h : net.heads) init_uniform_fan_in(h, rng, shape.output_init_scale);
  return net;
}

inline bool all_finite(const MultiHeadNet& net) {
  if (!all_finite(net.body)) return false;
  for (const auto& h : net.heads) {
    if (!all_finite(h)) return false;
  }
  return true;
}

/// Per-head Q-values for a batch: result[k] is batch x action_count.
inline std::vector<Matrix> q_all(const MultiHeadNet& net, const Matrix& states) {
  const Matrix features = forward(net.body, states);
  std::vector<Matrix> out;
  out.reserve(net.heads.size());
  for (const auto& h : net.heads) out.push_back(forward(h, features));
  return out;
}

/// K x action_count Q matrix for a single state.
inline Matrix q_all(const MultiHeadNet& net, const Vector& state) {
  const Matrix row = state.transpose();
  const Matrix features = forward(net.body, row);
  Matrix q(static_cast<Eigen::Index>(net.heads.size()), static_cast<Eigen::Index>(net.action_count()));
  for (std::size_t k = 0; k < net.heads.size(); ++k) q.row(static_cast<Eigen::Index>(k)) = forward(net.heads[k], features);
  return q;
}

/// Policy network (Q^A) and its periodically synchronised copy (Q^B).
struct NetPair {
  MultiHeadNet policy;
  MultiHeadNet target;
  std::uint64_t frames_since_sync = 0;

  explicit NetPair(MultiHeadNet p) : policy(std::move(p)), target(policy) {}
  NetPair() = default;
};

inline void sync_target(NetPair& pair) {
  pair.target = pair.policy;
  pair.frames_since_sync = 0;
}

inline bool bitwise_equal(const DenseNet& a, const DenseNet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
        x.bias.size() != y.bias.size()) {
      return false;
    }
    if (std::memcmp(x.weight.data(), y.weight.data(), sizeof(double) * static_cast<std::size_t>(x.weight.size())) != 0 ||
        std::memcmp(x.bias.data(), y.bias.data(), sizeof(double) * static_cast<std::size_t>(x.bias.size())) != 0) {
      return false;
    }
  }
  return true;
}

inline bool bitwise_equal(const MultiHeadNet& a, const MultiHeadNet& b) {
  if (!bitwise_equal(a.body, b.body) || a.heads.size() != b.heads.size()) return false;
  for (std::size_t k = 0; k < a.heads.size(); ++k) {
    if (!bitwise_equal(a.heads[k], b.heads[k])) return false;
  }
  return true;
}

/// Adam state for every parameter group of a MultiHeadNet: body plus one per head.
/// Groups are stepped independently so a head that received no gradient signal
/// keeps both its parameters and its moments untouched.
struct MultiHeadAdam {
  AdamState body;
  std::vector<AdamState> heads;

  static MultiHeadAdam for_net(const MultiHeadNet& net, AdamHyper hyper = {}) {
    MultiHeadAdam s;
    s.body = AdamState::for_net(net.body, hyper);
    for (const auto& h : net.heads) s.heads.push_back(AdamState::for_net(h, hyper));
    return s;
  }
};

}  // namespace bdqn
