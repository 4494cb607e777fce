#include <gtest/gtest.h>

#include "bdqn/agent.hpp"
#include "support.hpp"

using namespace bdqn;

namespace {

/// Net whose head k outputs exactly its output-layer bias: body and hidden
/// weights are zero, so every state maps to the same Q-row per head.
NetPair constant_heads(const std::vector<std::vector<double>>& rows) {
  QNetShape shape{2, rows.front().size(), rows.size()};
  NetPair pair(make_multihead(shape));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t a = 0; a < rows[k].size(); ++a) pair.policy.heads[k].layers.back().bias(static_cast<Eigen::Index>(a)) = rows[k][a];
  }
  pair.target = pair.policy;
  return pair;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t a = 0; a < rows[k].size(); ++a) q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = rows[k][a];
  }
  return q;
}

/// Exhaustive restatement of the vote rule: most votes, then larger summed Q,
/// then lowest index.
std::size_t vote_oracle(const std::vector<std::vector<double>>& rows) {
  const std::size_t actions = rows.front().size();
  std::vector<int> votes(actions, 0);
  std::vector<double> sums(actions, 0.0);
  for (const auto& r : rows) {
    ++votes[bdqn::testing::naive_argmax(r)];
    for (std::size_t a = 0; a < actions; ++a) sums[a] += r[a];
  }
  std::size_t best = 0;
  for (std::size_t a = 0; a < actions; ++a) {
    bool beats_all = true;
    for (std::size_t b = 0; b < actions; ++b) {
      if (b == a) continue;
      const bool b_better = votes[b] > votes[a] || (votes[b] == votes[a] && sums[b] > sums[a]) ||
                            (votes[b] == votes[a] && sums[b] == sums[a] && b < a);
      if (b_better) beats_all = false;
    }
    if (beats_all) best = a;
  }
  return best;
}

}  // namespace

TEST(Epsilon, Endpoints) {
  const EpsilonSchedule s;
  EXPECT_EQ(epsilon_at(s, 0), 1.0);
  EXPECT_EQ(epsilon_at(s, 1'000'000), 0.01);
  EXPECT_EQ(epsilon_at(s, 5'000'000), 0.01);
  EXPECT_NEAR(epsilon_at(s, 500'000), 0.505, 1e-15);
}

TEST(Epsilon, MonotoneNonIncreasing) {
  const EpsilonSchedule s{0.8, 0.05, 1000};
  double prev = epsilon_at(s, 0);
  for (std::uint64_t f = 1; f < 1500; ++f) {
    const double e = epsilon_at(s, f);
    EXPECT_LE(e, prev);
    prev = e;
  }
  EXPECT_THROW((EpsilonSchedule{0.1, 0.5, 10}.validate()), ConfigError);
  EXPECT_THROW((EpsilonSchedule{1.0, 0.1, 0}.validate()), ConfigError);
}

TEST(ActExplore, GreedyPicksArgmaxWithLowestTie) {
  const NetPair pair = constant_heads({{0.1, 0.9, 0.3}, {0.5, 0.5, 0.1}});
  RngStream rng(1);
  EXPECT_EQ(act_explore(pair, 0, Vector::Zero(2), 0.0, rng), 1u);
  EXPECT_EQ(act_explore(pair, 1, Vector::Zero(2), 0.0, rng), 0u);
  EXPECT_THROW(act_explore(pair, 2, Vector::Zero(2), 0.0, rng), ArgumentError);
}

TEST(ActExplore, FullEpsilonIsUniform) {
  const NetPair pair = constant_heads({{0.0, 5.0, 0.0}});
  RngStream rng(2);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[act_explore(pair, 0, Vector::Zero(2), 1.0, rng)];
  for (int c : counts) EXPECT_NEAR(c / 30000.0, 1.0 / 3.0, 0.015);
}

TEST(ActExplore, IgnoresOtherHeads) {
  RngStream init(3);
  NetPair pair(bdqn::testing::small_multihead(3, 4, 3, init));
  const Matrix states = bdqn::testing::random_matrix(20, 3, init);
  std::vector<std::size_t> before;
  RngStream rng(4);
  for (Eigen::Index i = 0; i < states.rows(); ++i) before.push_back(act_explore(pair, 1, states.row(i).transpose(), 0.0, rng));
  bdqn::testing::randomize(pair.policy.heads[0], init, 3.0);
  bdqn::testing::randomize(pair.policy.heads[2], init, 3.0);
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    EXPECT_EQ(act_explore(pair, 1, states.row(i).transpose(), 0.0, rng), before[static_cast<std::size_t>(i)]);
  }
}

TEST(Vote, UnanimityMajorityAndSumTieBreak) {
  EXPECT_EQ(vote(rows_to_matrix({{0, 0, 1}, {0, 0, 2}, {1, 0, 3}})), 2u);
  EXPECT_EQ(vote(rows_to_matrix({{1, 0}, {1, 0}, {0, 1}})), 0u);
  EXPECT_EQ(vote(rows_to_matrix({{0.6, 0.0}, {0.4, 1.4}})), 1u);
  EXPECT_EQ(vote(rows_to_matrix({{1.0, 0.0}, {0.0, 1.0}})), 0u);
}

TEST(Vote, MatchesExhaustiveOracleOnSmallCases) {
  RngStream rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t heads = 1 + rng.uniform_index(4);
    const std::size_t actions = 2 + rng.uniform_index(3);
    std::vector<std::vector<double>> rows(heads, std::vector<double>(actions));
    for (auto& r : rows) {
      for (auto& x : r) x = static_cast<double>(rng.uniform_index(3));  // small integer grid forces ties
    }
    EXPECT_EQ(vote(rows_to_matrix(rows)), vote_oracle(rows));
  }
}

TEST(Vote, InvariantUnderPositiveRescaling) {
  RngStream rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const Matrix q = bdqn::testing::random_matrix(4, 3, rng);
    const std::size_t base = vote(q);
    for (double c : {0.5, 2.0, 8.0}) EXPECT_EQ(vote(c * q), base);
  }
}

TEST(ActEvaluate, UsesPolicyVote) {
  const NetPair pair = constant_heads({{0.0, 2.0}, {0.0, 1.0}, {3.0, 0.0}});
  EXPECT_EQ(act_evaluate(pair, Vector::Zero(2)), 1u);
}

TEST(Disagreement, IdenticalHeadsGiveZero) {
  QNetShape shape{3, 2, 5};
  const MultiHeadNet net = make_multihead(shape);
  EXPECT_EQ(head_disagreement(net, Matrix::Ones(4, 3)), 0.0);
}

TEST(Disagreement, ConstructedDisagreementGivesOne) {
  const NetPair pair = constant_heads({{1.0, 0.0}, {0.0, 1.0}});
  RngStream rng(1);
  EXPECT_EQ(head_disagreement(pair, bdqn::testing::random_matrix(10, 2, rng)), 1.0);
}

TEST(Disagreement, MatchesRecount) {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const MultiHeadNet net = bdqn::testing::small_multihead(3, 3, 4, rng);
    const Matrix states = bdqn::testing::random_matrix(50, 3, rng, 2.0);
    int split = 0;
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
      const auto s = bdqn::testing::row_of(states, i);
      const std::size_t first = bdqn::testing::naive_argmax(bdqn::testing::naive_q(net, 0, s));
      for (std::size_t k = 1; k < 4; ++k) {
        if (bdqn::testing::naive_argmax(bdqn::testing::naive_q(net, k, s)) != first) {
          ++split;
          break;
        }
      }
    }
    EXPECT_DOUBLE_EQ(head_disagreement(net, states), split / 50.0);
  }
}

TEST(Disagreement, EmptyStateSetThrows) {
  QNetShape shape{3, 2, 2};
  EXPECT_THROW(head_disagreement(make_multihead(shape), Matrix(0, 3)), ArgumentError);
}
