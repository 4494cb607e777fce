#pragma once

// Action selection: epsilon-greedy on a per-episode head while exploring,
// majority vote across heads while evaluating.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "bdqn/errors.hpp"
#include "bdqn/qnet.hpp"
#include "bdqn/rng.hpp"

namespace bdqn {

struct EpsilonSchedule {
  double initial = 1.0;
  double final = 0.01;
  std::uint64_t decay_frames = 1'000'000;

  void validate() const {
    if (!(initial >= final && final >= 0.0 && initial <= 1.0)) {
      throw ConfigError("epsilon schedule needs 1 >= initial >= final >= 0");
    }
    if (decay_frames == 0) throw ConfigError("eps.decay_frames must be positive");
  }
};

/// Linear interpolation from `initial` to `final`, flat after `decay_frames`.
inline double epsilon_at(const EpsilonSchedule& s, std::uint64_t frames) {
  if (frames >= s.decay_frames) return s.final;
  const double frac = static_cast<double>(frames) / static_cast<double>(s.decay_frames);
  return s.initial + (s.final - s.initial) * frac;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Row>
std::size_t argmax_lowest(const Row& row) {
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < row.size(); ++a) {
    if (row(a) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
  }
  return best;
}

/// Epsilon-greedy action for head k. Always draws the epsilon coin, plus one
/// uniform action index when the coin says explore.
inline std::size_t act_explore(const NetPair& pair, std::size_t head, const Vector& state, double eps,
                               RngStream& rng) {
  if (head >= pair.policy.head_count()) throw ArgumentError("act_explore: head index out of range");
  if (rng.uniform() < eps) return static_cast<std::size_t>(rng.uniform_index(pair.policy.action_count()));
  const Matrix row = state.transpose();
  const Matrix q = forward(pair.policy.heads[head], forward(pair.policy.body, row));
  return argmax_lowest(q.row(0));
}

/// Majority vote over the heads' greedy actions on a K x A Q matrix. Vote ties
/// are decided by the larger Q summed over heads, then by the lowest index.
inline std::size_t vote(const Matrix& q) {
  const auto actions = static_cast<std::size_t>(q.cols());
  std::vector<std::size_t> votes(actions, 0);
  for (Eigen::Index k = 0; k < q.rows(); ++k) ++votes[argmax_lowest(q.row(k))];
  const Vector sums = q.colwise().sum().transpose();
  std::size_t best = 0;
  for (std::size_t a = 1; a < actions; ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    const auto bi = static_cast<Eigen::Index>(best);
    if (votes[a] > votes[best] || (votes[a] == votes[best] && sums(ai) > sums(bi))) best = a;
  }
  return best;
}

inline std::size_t act_evaluate(const NetPair& pair, const Vector& state) { return vote(q_all(pair.policy, state)); }

/// Fraction of states on which the heads' greedy actions are not unanimous.
inline double head_disagreement(const MultiHeadNet& net, const Matrix& states) {
  if (states.rows() == 0) throw ArgumentError("head_disagreement: empty state set");
  const auto q = q_all(net, states);
  std::size_t split = 0;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    const std::size_t first = argmax_lowest(q[0].row(i));
    for (std::size_t k = 1; k < q.size(); ++k) {
      if (argmax_lowest(q[k].row(i)) != first) {
        ++split;
        break;
      }
    }
  }
  return static_cast<double>(split) / static_cast<double>(states.rows());
}

inline double head_disagreement(const NetPair& pair, const Matrix& states) {
  return head_disagreement(pair.policy, states);
}

}  // namespace bdqn
