#pragma once

// Deterministic tabular environments with one-hot observations, plus the
// finite-horizon value-iteration oracle used for their reference returns.
//
//   nchain   N states in a line, start at 0. left at state 0 pays 0.001;
//            right at state N-1 pays 1.0. Horizon N + 9 by default.
//   deepsea  N x N grid descending one row per step, start top-left. right
//            costs 0.01 / N; right at the bottom-right cell pays +1.
//            Horizon N.
//   cliff    W x H grid, start bottom-left, goal bottom-right, the bottom row
//            between them is a cliff. Entering the goal pays +10, the cliff
//            -10; both end the episode. Action 4 stays in place and is the
//            no-op used for randomised starts. Horizon 4 (W + H) by default.
//
// Only `cliff` has a no-op action; reset() on the other two applies no no-op
// steps regardless of noop_max.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bdqn/errors.hpp"
#include "bdqn/nn.hpp"
#include "bdqn/rng.hpp"

namespace bdqn {

struct Outcome {
  std::size_t next = 0;
  double reward = 0.0;
  bool terminal = false;
};

struct TabularMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<Outcome> outcomes;  // index s * actions + a
  std::size_t start = 0;
  std::size_t horizon = 0;  // 0: no time limit

  const Outcome& at(std::size_t s, std::size_t a) const { return outcomes[s * actions + a]; }
};

struct OracleResult {
  std::vector<double> values;           // V at t = 0, per state
  std::vector<std::size_t> greedy;      // greedy action at t = 0, per state
  std::vector<std::vector<std::size_t>> greedy_by_time;  // [t][s]; one row when horizon = 0
  double optimal_return = 0.0;          // V_0(start)
  double random_return = 0.0;           // expected return of the uniform policy from start
  double bellman_residual = 0.0;        // sup-norm of the recursion error
};

namespace detail {

inline void check_mdp(const TabularMdp& m) {
  if (m.states == 0 || m.actions == 0) throw ArgumentError("oracle: empty MDP");
  if (m.outcomes.size() != m.states * m.actions) throw ShapeError("oracle: outcome table size mismatch");
  if (m.start >= m.states) throw ArgumentError("oracle: start state out of range");
  for (const auto& o : m.outcomes) {
    if (o.next >= m.states) throw ArgumentError("oracle: transition leaves the state space");
  }
}

inline double backup(const TabularMdp& m, const std::vector<double>& next_v, std::size_t s, std::size_t a,
                     double gamma) {
  const Outcome& o = m.at(s, a);
  return o.reward + (o.terminal ? 0.0 : gamma * next_v[o.next]);
}

}  // namespace detail

inline constexpr std::size_t kMaxOracleStates = 100'000;

/// Bellman-optimality fixed point. With a horizon this is exact backward
/// induction over (t, s); without one it iterates to a 1e-12 sup-norm change.
inline OracleResult value_iteration_oracle(const TabularMdp& m, double gamma) {
  detail::check_mdp(m);
  if (m.states > kMaxOracleStates) throw UnsupportedError("oracle: state space too large to enumerate");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("oracle: gamma must lie in [0, 1]");
  const std::size_t S = m.states;
  const std::size_t A = m.actions;
  const double inv_a = 1.0 / static_cast<double>(A);
  OracleResult res;

  auto greedy_row = [&](const std::vector<double>& next_v) {
    std::vector<double> v(S);
    std::vector<std::size_t> pick(S);
    for (std::size_t s = 0; s < S; ++s) {
      std::size_t best = 0;
      double best_q = detail::backup(m, next_v, s, 0, gamma);
      for (std::size_t a = 1; a < A; ++a) {
        const double q = detail::backup(m, next_v, s, a, gamma);
        if (q > best_q) {
          best_q = q;
          best = a;
        }
      }
      v[s] = best_q;
      pick[s] = best;
    }
    return std::pair{v, pick};
  };
  auto uniform_row = [&](const std::vector<double>& next_r) {
    std::vector<double> r(S);
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t a = 0; a < A; ++a) acc += detail::backup(m, next_r, s, a, gamma);
      r[s] = acc * inv_a;
    }
    return r;
  };

  if (m.horizon > 0) {
    std::vector<double> v(S, 0.0), r(S, 0.0);
    res.greedy_by_time.assign(m.horizon, {});
    double residual = 0.0;
    for (std::size_t t = m.horizon; t-- > 0;) {
      auto [nv, pick] = greedy_row(v);
      // Recursion check: recompute the max directly and compare.
      for (std::size_t s = 0; s < S; ++s) {
        double q = -INFINITY;
        for (std::size_t a = 0; a < A; ++a) q = std::max(q, detail::backup(m, v, s, a, gamma));
        residual = std::max(residual, std::abs(q - nv[s]));
      }
      r = uniform_row(r);
      v = std::move(nv);
      res.greedy_by_time[t] = std::move(pick);
    }
    res.values = v;
    res.greedy = res.greedy_by_time.front();
    res.optimal_return = v[m.start];
    res.random_return = r[m.start];
    res.bellman_residual = residual;
    return res;
  }

  if (gamma >= 1.0) throw UnsupportedError("oracle: an untimed MDP needs gamma < 1");
  std::vector<double> v(S, 0.0), r(S, 0.0);
  for (int iter = 0; iter < 1'000'000; ++iter) {
    auto [nv, pick] = greedy_row(v);
    double delta = 0.0;
    for (std::size_t s = 0; s < S; ++s) delta = std::max(delta, std::abs(nv[s] - v[s]));
    v = std::move(nv);
    res.greedy = std::move(pick);
    if (delta <= 1e-12) break;
  }
  for (int iter = 0; iter < 1'000'000; ++iter) {
    auto nr = uniform_row(r);
    double delta = 0.0;
    for (std::size_t s = 0; s < S; ++s) delta = std::max(delta, std::abs(nr[s] - r[s]));
    r = std::move(nr);
    if (delta <= 1e-12) break;
  }
  auto [check, pick] = greedy_row(v);
  double residual = 0.0;
  for (std::size_t s = 0; s < S; ++s) residual = std::max(residual, std::abs(check[s] - v[s]));
  res.values = v;
  res.greedy_by_time = {res.greedy};
  res.optimal_return = v[m.start];
  res.random_return = r[m.start];
  res.bellman_residual = residual;
  return res;
}

/// States reachable from `start` through non-terminal transitions, ascending.
inline std::vector<std::size_t> reachable_states(const TabularMdp& m) {
  std::vector<bool> seen(m.states, false);
  std::vector<std::size_t> stack = {m.start};
  seen[m.start] = true;
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    for (std::size_t a = 0; a < m.actions; ++a) {
      const Outcome& o = m.at(s, a);
      if (!o.terminal && !seen[o.next]) {
        seen[o.next] = true;
        stack.push_back(o.next);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < m.states; ++s) {
    if (seen[s]) out.push_back(s);
  }
  return out;
}

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t action_count = 0;
  std::size_t max_episode_steps = 0;
  double optimal_return = 0.0;
  double random_return = 0.0;
};

struct StepResult {
  Vector observation;
  double raw_reward = 0.0;
  double clipped_reward = 0.0;
  bool terminal = false;
};

inline double clip_reward(double r) { return std::max(-1.0, std::min(1.0, r)); }

class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  /// Restart the episode. `seed` is recorded as the episode seed; the no-op
  /// count is drawn uniformly from [0, noop_max) with `noop_rng` when the
  /// environment has a no-op action and noop_max > 1.
  Vector reset(std::uint64_t seed, int noop_max, RngStream& noop_rng) {
    if (noop_max < 0) throw ArgumentError("reset: noop_max must be >= 0");
    seed_ = seed;
    restart();
    steps_ = 0;
    done_ = false;
    last_noops_ = 0;
    const auto noop = noop_action();
    if (noop && noop_max > 1) {
      std::size_t n = static_cast<std::size_t>(noop_rng.uniform_index(static_cast<std::uint64_t>(noop_max)));
      n = std::min(n, spec_.max_episode_steps - 1);
      for (std::size_t i = 0; i < n && !done_; ++i) step(*noop);
      last_noops_ = n;
    }
    return observe();
  }

  /// Reset with the no-op period drawn from a stream seeded by `seed`.
  Vector reset(std::uint64_t seed, int noop_max) {
    RngStream rng(seed);
    return reset(seed, noop_max, rng);
  }

  StepResult step(std::size_t action) {
    if (done_) throw StateError("step: episode already terminated; call reset()");
    if (action >= spec_.action_count) throw ArgumentError("step: action out of range");
    const Outcome o = transition(action);
    ++steps_;
    done_ = o.terminal || steps_ >= spec_.max_episode_steps;
    StepResult r;
    r.observation = observe();
    r.raw_reward = o.reward;
    r.clipped_reward = clip_reward(o.reward);
    r.terminal = done_;
    return r;
  }

  bool done() const { return done_; }
  std::size_t elapsed_steps() const { return steps_; }
  std::size_t last_noop_count() const { return last_noops_; }
  std::uint64_t episode_seed() const { return seed_; }

  virtual std::optional<std::size_t> noop_action() const { return std::nullopt; }

  /// Enumerable model of the dynamics; throws UnsupportedError when there is none.
  virtual TabularMdp tabular() const { throw UnsupportedError(spec_.name + ": no tabular model"); }

  /// Fixed set of observations used to measure head diversity.
  virtual Matrix probe_states() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual void restart() = 0;
  virtual Outcome transition(std::size_t action) = 0;
  virtual Vector observe() const = 0;

  /// Fill optimal/random returns from the undiscounted finite-horizon oracle.
  void attach_oracle() {
    const OracleResult o = value_iteration_oracle(tabular(), 1.0);
    spec_.optimal_return = o.optimal_return;
    spec_.random_return = o.random_return;
  }

  EnvSpec spec_;

 private:
  std::uint64_t seed_ = 0;
  std::size_t steps_ = 0;
  std::size_t last_noops_ = 0;
  bool done_ = true;
};

/// Environment backed by a deterministic TabularMdp with one-hot observations.
class TabularEnv : public Environment {
 public:
  TabularMdp tabular() const override { return mdp_; }

  /// One-hot encodings of every state reachable from the start state.
  Matrix probe_states() const override {
    const auto reach = reachable_states(mdp_);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(reach.size()), static_cast<Eigen::Index>(mdp_.states));
    for (std::size_t i = 0; i < reach.size(); ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(reach[i])) = 1.0;
    return out;
  }

  std::size_t state_index() const { return state_; }

 protected:
  void init(std::string name, TabularMdp mdp) {
    mdp_ = std::move(mdp);
    spec_.name = std::move(name);
    spec_.obs_dim = mdp_.states;
    spec_.action_count = mdp_.actions;
    spec_.max_episode_steps = mdp_.horizon;
    attach_oracle();
  }

  void restart() override { state_ = mdp_.start; }

  Outcome transition(std::size_t action) override {
    const Outcome o = mdp_.at(state_, action);
    state_ = o.next;
    return o;
  }

  Vector observe() const override {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(mdp_.states));
    v(static_cast<Eigen::Index>(state_)) = 1.0;
    return v;
  }

  TabularMdp mdp_;
  std::size_t state_ = 0;
};

inline TabularMdp nchain_mdp(std::size_t n, std::size_t horizon) {
  if (n < 2) throw ArgumentError("nchain: N must be >= 2");
  TabularMdp m;
  m.states = n;
  m.actions = 2;
  m.horizon = horizon == 0 ? n + 9 : horizon;
  m.outcomes.resize(n * 2);
  for (std::size_t s = 0; s < n; ++s) {
    m.outcomes[s * 2 + 0] = {s == 0 ? 0 : s - 1, s == 0 ? 0.001 : 0.0, false};
    m.outcomes[s * 2 + 1] = {std::min(s + 1, n - 1), s == n - 1 ? 1.0 : 0.0, false};
  }
  return m;
}

class NChain final : public TabularEnv {
 public:
  static constexpr std::size_t kLeft = 0;
  static constexpr std::size_t kRight = 1;

  explicit NChain(std::size_t n, std::size_t horizon = 0) { init("nchain", nchain_mdp(n, horizon)); }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<NChain>(*this); }
};

inline TabularMdp deepsea_mdp(std::size_t n) {
  if (n < 2) throw ArgumentError("deepsea: N must be >= 2");
  TabularMdp m;
  m.states = n * n;
  m.actions = 2;
  m.horizon = n;
  m.outcomes.resize(m.states * 2);
  const double move_cost = 0.01 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t s = r * n + c;
      const bool last_row = r + 1 == n;
      const std::size_t left_col = c == 0 ? 0 : c - 1;
      const std::size_t right_col = std::min(c + 1, n - 1);
      const std::size_t left_next = last_row ? s : (r + 1) * n + left_col;
      const std::size_t right_next = last_row ? s : (r + 1) * n + right_col;
      const double treasure = (last_row && c == n - 1) ? 1.0 : 0.0;
      m.outcomes[s * 2 + 0] = {left_next, 0.0, last_row};
      m.outcomes[s * 2 + 1] = {right_next, treasure - move_cost, last_row};
    }
  }
  return m;
}

class DeepSea final : public TabularEnv {
 public:
  explicit DeepSea(std::size_t n) { init("deepsea", deepsea_mdp(n)); }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<DeepSea>(*this); }
};

inline TabularMdp cliff_mdp(std::size_t width, std::size_t height, std::size_t horizon) {
  if (width < 3 || height < 2) throw ArgumentError("cliff: needs width >= 3 and height >= 2");
  TabularMdp m;
  m.states = width * height;
  m.actions = 5;
  m.horizon = horizon == 0 ? 4 * (width + height) : horizon;
  m.start = (height - 1) * width;
  m.outcomes.resize(m.states * 5);
  const std::size_t goal = (height - 1) * width + width - 1;
  auto is_cliff = [&](std::size_t r, std::size_t c) { return r == height - 1 && c > 0 && c + 1 < width; };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t s = r * width + c;
      const std::size_t moves[5][2] = {{r == 0 ? r : r - 1, c},
                                       {std::min(r + 1, height - 1), c},
                                       {r, c == 0 ? c : c - 1},
                                       {r, std::min(c + 1, width - 1)},
                                       {r, c}};
      for (std::size_t a = 0; a < 5; ++a) {
        const std::size_t nr = moves[a][0];
        const std::size_t nc = moves[a][1];
        const std::size_t ns = nr * width + nc;
        Outcome o{ns, 0.0, false};
        if (is_cliff(nr, nc)) {
          o = {m.start, -10.0, true};
        } else if (ns == goal && s != goal) {
          o = {ns, 10.0, true};
        }
        m.outcomes[s * 5 + a] = o;
      }
    }
  }
  return m;
}

class SparseCliff final : public TabularEnv {
 public:
  static constexpr std::size_t kStay = 4;

  SparseCliff(std::size_t width, std::size_t height, std::size_t horizon = 0) {
    init("cliff", cliff_mdp(width, height, horizon));
  }

  std::optional<std::size_t> noop_action() const override { return kStay; }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<SparseCliff>(*this); }
};

struct EnvConfig {
  std::string name = "nchain";
  std::size_t n = 20;
  std::size_t horizon = 0;  // 0: environment default
  std::size_t width = 8;
  std::size_t height = 4;
};

inline std::unique_ptr<Environment> make_env(const EnvConfig& cfg) {
  if (cfg.name == "nchain") return std::make_unique<NChain>(cfg.n, cfg.horizon);
  if (cfg.name == "deepsea") return std::make_unique<DeepSea>(cfg.n);
  if (cfg.name == "cliff") return std::make_unique<SparseCliff>(cfg.width, cfg.height, cfg.horizon);
  throw ConfigError("unknown env.name '" + cfg.name + "' (expected nchain, deepsea or cliff)");
}

}  // namespace bdqn
