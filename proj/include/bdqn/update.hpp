#pragma once

// One network update: per-head double-Q targets with scaled Gaussian noise,
// masked Smooth-L1 losses averaged over heads, one Adam step on the policy.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <vector>

#include "bdqn/agent.hpp"
#include "bdqn/noise.hpp"
#include "bdqn/qnet.hpp"
#include "bdqn/replay.hpp"

namespace bdqn {

/// Sampled transitions packed into matrices.
struct UpdateBatch {
  Matrix states;       // B x obs
  Matrix next_states;  // B x obs
  std::vector<std::size_t> actions;
  Vector rewards;    // B
  Vector terminals;  // B, 0 or 1
  Matrix masks;      // K x B, 0 or 1

  std::size_t size() const { return actions.size(); }
  std::size_t heads() const { return static_cast<std::size_t>(masks.rows()); }

  static UpdateBatch from(const std::vector<Transition>& ts) {
    if (ts.empty()) throw ArgumentError("UpdateBatch: empty batch");
    const auto b = static_cast<Eigen::Index>(ts.size());
    const auto obs = ts.front().state.size();
    const auto k = static_cast<Eigen::Index>(ts.front().mask.size());
    UpdateBatch out;
    out.states.resize(b, obs);
    out.next_states.resize(b, obs);
    out.rewards.resize(b);
    out.terminals.resize(b);
    out.masks.resize(k, b);
    out.actions.resize(ts.size());
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto& t = ts[static_cast<std::size_t>(i)];
      if (t.state.size() != obs || t.next_state.size() != obs || static_cast<Eigen::Index>(t.mask.size()) != k) {
        throw ShapeError("UpdateBatch: ragged transitions");
      }
      out.states.row(i) = t.state.transpose();
      out.next_states.row(i) = t.next_state.transpose();
      out.actions[static_cast<std::size_t>(i)] = t.action;
      out.rewards(i) = t.reward;
      out.terminals(i) = t.terminal ? 1.0 : 0.0;
      for (Eigen::Index j = 0; j < k; ++j) out.masks(j, i) = t.mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    }
    return out;
  }
};

namespace detail {
inline void require_batch(const MultiHeadNet& net, const UpdateBatch& batch) {
  if (batch.size() == 0) throw ArgumentError("update: empty batch");
  if (batch.heads() != net.head_count()) throw ShapeError("update: mask rows != head count");
  if (static_cast<std::size_t>(batch.states.cols()) != net.obs_dim()) throw ShapeError("update: state width != obs_dim");
  for (auto a : batch.actions) {
    if (a >= net.action_count()) throw ShapeError("update: action out of range");
  }
}
}  // namespace detail

/// Max over samples, heads and actions of the policy's Q on the batch states.
inline double batch_qmax(const MultiHeadNet& policy, const Matrix& states) {
  if (states.rows() == 0) throw ArgumentError("batch_qmax: empty batch");
  const auto q = q_all(policy, states);
  double best = q.front().maxCoeff();
  for (const auto& m : q) best = std::max(best, m.maxCoeff());
  return best;
}

/// r + gamma * Q^B_k(s', argmax_a Q^A_k(s', a)) * (1 - terminal), K x B, without noise.
inline Matrix compute_double_q_targets(const NetPair& pair, const UpdateBatch& batch, double gamma) {
  detail::require_batch(pair.policy, batch);
  const auto q_online = q_all(pair.policy, batch.next_states);
  const auto q_target = q_all(pair.target, batch.next_states);
  const auto k_count = static_cast<Eigen::Index>(pair.policy.head_count());
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix targets(k_count, b);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto& online = q_online[static_cast<std::size_t>(k)];
    const auto& evaluate = q_target[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto best = static_cast<Eigen::Index>(argmax_lowest(online.row(i)));
      targets(k, i) = batch.rewards(i) + gamma * evaluate(i, best) * (1.0 - batch.terminals(i));
    }
  }
  return targets;
}

/// Double-Q targets plus scale * noise[k][i].
inline Matrix compute_targets(const NetPair& pair, const UpdateBatch& batch, double scale, const Matrix& noise,
                              double gamma) {
  if (noise.rows() != static_cast<Eigen::Index>(pair.policy.head_count()) ||
      noise.cols() != static_cast<Eigen::Index>(batch.size())) {
    throw ShapeError("compute_targets: noise must be K x batch");
  }
  Matrix targets = compute_double_q_targets(pair, batch, gamma);
  targets += scale * noise;
  return targets;
}

/// Masked loss: (1/K) * sum_k mean_i m_ki * smooth_l1(Q^A_k(s_i, a_i), target_ki).
inline double total_loss(const std::vector<Matrix>& q_policy, const UpdateBatch& batch, const Matrix& targets) {
  const auto k_count = static_cast<Eigen::Index>(q_policy.size());
  const auto b = static_cast<Eigen::Index>(batch.size());
  double total = 0.0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    double head = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
      if (batch.masks(k, i) == 0.0) continue;
      const double pred = q_policy[static_cast<std::size_t>(k)](i, static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(i)]));
      head += batch.masks(k, i) * smooth_l1(pred, targets(k, i));
    }
    total += head / static_cast<double>(b);
  }
  return total / static_cast<double>(k_count);
}

inline double total_loss(const NetPair& pair, const UpdateBatch& batch, const Matrix& targets) {
  return total_loss(q_all(pair.policy, batch.states), batch, targets);
}

struct UpdateOptions {
  double gamma = 0.99;
  NoiseConfig noise;
  /// false selects the plain bootstrapped path: no noise is sampled or added.
  bool noise_enabled = true;
};

struct UpdateStats {
  double total_loss = 0.0;
  double batch_qmax = 0.0;
  double scale = 1.0;
};

/// One training update. The policy network and its Adam state are modified in
/// place; the target network is read only. Parameter groups (body, each head)
/// with no unmasked sample in the batch are not stepped.
inline UpdateStats update_step(NetPair& pair, const UpdateBatch& batch, const UpdateOptions& opts,
                               MultiHeadAdam& adam, RngStream& noise_rng) {
  detail::require_batch(pair.policy, batch);
  MultiHeadNet& policy = pair.policy;
  const std::size_t k_count = policy.head_count();
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (adam.heads.size() != k_count) throw ShapeError("update_step: adam state / head count mismatch");

  const ForwardTrace body_trace = forward_trace(policy.body, batch.states);
  std::vector<ForwardTrace> head_traces;
  std::vector<Matrix> q_policy;
  head_traces.reserve(k_count);
  q_policy.reserve(k_count);
  for (const auto& h : policy.heads) {
    head_traces.push_back(forward_trace(h, body_trace.output()));
    q_policy.push_back(head_traces.back().output());
  }

  UpdateStats stats;
  stats.batch_qmax = q_policy.front().maxCoeff();
  for (const auto& q : q_policy) stats.batch_qmax = std::max(stats.batch_qmax, q.maxCoeff());
  if (!std::isfinite(stats.batch_qmax)) throw NumericError("update_step: non-finite Q-values on batch states");
  stats.scale = compute_scale(stats.batch_qmax, opts.noise.beta);

  const Matrix targets =
      opts.noise_enabled
          ? compute_targets(pair, batch, stats.scale, sample_noise(k_count, batch.size(), opts.noise, noise_rng), opts.gamma)
          : compute_double_q_targets(pair, batch, opts.gamma);

  stats.total_loss = total_loss(q_policy, batch, targets);
  if (!std::isfinite(stats.total_loss)) {
    std::ostringstream msg;
    msg << "update_step: non-finite loss (batch_qmax=" << stats.batch_qmax << ", scale=" << stats.scale
        << ", target range=[" << targets.minCoeff() << ", " << targets.maxCoeff() << "])";
    throw NumericError(msg.str());
  }

  const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(k_count));
  Matrix feature_grad = Matrix::Zero(body_trace.output().rows(), body_trace.output().cols());
  bool any_active = false;
  std::vector<GradientSet> head_grads(k_count);
  std::vector<bool> head_active(k_count, false);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    Matrix out_grad = Matrix::Zero(b, static_cast<Eigen::Index>(policy.action_count()));
    for (Eigen::Index i = 0; i < b; ++i) {
      if (batch.masks(ki, i) == 0.0) continue;
      head_active[k] = true;
      const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(i)]);
      out_grad(i, a) = batch.masks(ki, i) * smooth_l1_grad(q_policy[k](i, a), targets(ki, i)) * norm;
    }
    if (!head_active[k]) continue;
    any_active = true;
    Backprop bp = backward(policy.heads[k], head_traces[k], out_grad);
    head_grads[k] = std::move(bp.grads);
    feature_grad += bp.input_grad;
  }
  if (!any_active) return stats;

  const GradientSet body_grads = backward(policy.body, body_trace, feature_grad).grads;
  adam_step(policy.body, body_grads, adam.body);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (head_active[k]) adam_step(policy.heads[k], head_grads[k], adam.heads[k]);
  }
  if (!all_finite(policy)) throw NumericError("update_step: policy parameters became non-finite");
  return stats;
}

}  // namespace bdqn
