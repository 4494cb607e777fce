#include <gtest/gtest.h>

#include <filesystem>

#include "bdqn/trainer.hpp"
#include "support.hpp"

using namespace bdqn;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.env.name = "nchain";
  c.env.n = 6;
  c.heads = 3;
  c.max_frames = 600;
  c.steps_per_evaluation = 200;
  c.sync_frames = 50;
  c.learning_rate = 1e-3;
  c.epsilon.decay_frames = 300;
  c.replay_size = 1000;
  c.body_hidden = {16};
  c.head_hidden = {8};
  c.seed = 5;
  return c;
}

/// Config with updates disabled, for fast counting of sampling statistics.
TrainConfig counting_config(std::uint64_t frames) {
  TrainConfig c = tiny_config();
  c.env.n = 2;
  c.env.horizon = 1;
  c.heads = 9;
  c.max_frames = frames;
  c.steps_per_evaluation = frames + 1;
  c.replay_size = 16;
  c.learn_start = 17;
  return c;
}

}  // namespace

TEST(Trainer, ZeroFramesIsAnEmptyRun) {
  TrainConfig c = tiny_config();
  c.max_frames = 0;
  Trainer fresh(c);
  const auto init = encode(fresh.checkpoint());
  std::uint64_t episodes = 0;
  TrainHooks hooks;
  hooks.on_episode_start = [&](std::uint64_t, std::size_t) { ++episodes; };
  const TrainResult r = train(c, "", hooks);
  EXPECT_TRUE(r.metrics.rows.empty());
  EXPECT_EQ(episodes, 0u);
  EXPECT_EQ(encode(r.final_checkpoint), init);
}

TEST(Trainer, SyncEveryFrameKeepsTargetEqual) {
  TrainConfig c = tiny_config();
  c.sync_frames = 1;
  int updates = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& ev) {
    EXPECT_TRUE(ev.synced);
    if (ev.updated) ++updates;
    EXPECT_TRUE(bitwise_equal(ev.pair->policy, ev.pair->target));
  };
  const TrainResult r = train(c, "", hooks);
  EXPECT_GT(updates, 0);
  EXPECT_EQ(r.metrics.rows.size(), 3u);
}

TEST(Trainer, SyncCadenceIsFrameDenominated) {
  TrainConfig c = tiny_config();
  c.frames_per_step = 4;
  c.sync_frames = 40;
  c.max_frames = 2000;
  int checked_equal = 0, checked_diff = 0;
  bool any_update_since_sync = false;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& ev) {
    if (ev.updated) any_update_since_sync = true;
    if (ev.frames % 40 == 0) {
      EXPECT_TRUE(ev.synced);
      EXPECT_TRUE(bitwise_equal(ev.pair->policy, ev.pair->target));
      ++checked_equal;
      any_update_since_sync = false;
    } else {
      EXPECT_FALSE(ev.synced);
      if (any_update_since_sync) {
        EXPECT_FALSE(bitwise_equal(ev.pair->policy, ev.pair->target));
        ++checked_diff;
      }
    }
  };
  train(c, "", hooks);
  EXPECT_EQ(checked_equal, 50);
  EXPECT_GT(checked_diff, 300);
}

TEST(Trainer, OutputsAreByteIdenticalAcrossRuns) {
  bdqn::testing::ScratchDir dir("trainer_det");
  const TrainConfig c = tiny_config();
  train(c, dir / "a");
  train(c, dir / "b");
  namespace fs = std::filesystem;
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    EXPECT_EQ(bdqn::testing::slurp(entry.path().string()), bdqn::testing::slurp((fs::path(dir / "b") / rel).string()))
        << rel;
    ++files;
  }
  EXPECT_EQ(files, 3 + 3 + 1);  // metrics, config, streams; three eval checkpoints and final
}

TEST(Trainer, MetricsFileLayout) {
  bdqn::testing::ScratchDir dir("trainer_metrics");
  const TrainConfig c = tiny_config();
  const TrainResult r = train(c, dir.str());
  const std::string csv = bdqn::testing::slurp(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frames,ep0,ep1,ep2,ep3,ep4,mean,std,qmax,scale,disagreement,wallclock_s");
  EXPECT_EQ(csv, metrics_csv(r.metrics, 5));
  ASSERT_EQ(r.metrics.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& row = r.metrics.rows[i];
    EXPECT_EQ(row.frames, 200u * (i + 1));
    EXPECT_EQ(row.returns.size(), 5u);
    EXPECT_EQ(row.wallclock_s, 0.0);
    const auto [m, s] = mean_std(row.returns);
    EXPECT_EQ(row.mean, m);
    EXPECT_EQ(row.std, s);
    EXPECT_EQ(row.scale, compute_scale(row.qmax, c.noise.beta));
    EXPECT_GE(row.disagreement, 0.0);
    EXPECT_LE(row.disagreement, 1.0);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints/frames_600.bin"));
  EXPECT_EQ(bdqn::testing::slurp(dir / "checkpoints/final.bin"), bdqn::testing::slurp(dir / "checkpoints/frames_600.bin"));
  EXPECT_EQ(load_config(dir / "config.cfg").seed, 5u);
}

TEST(Trainer, HeadSelectionIsUniform) {
  std::vector<int> counts(9, 0);
  TrainHooks hooks;
  hooks.on_episode_start = [&](std::uint64_t, std::size_t head) { ++counts[head]; };
  train(counting_config(10000), "", hooks);
  int total = 0;
  for (int c : counts) total += c;
  ASSERT_EQ(total, 10000);
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 1.0 / 9.0, 0.02);
}

TEST(Trainer, HeadIsFixedWithinEpisode) {
  TrainConfig c = tiny_config();
  std::map<std::uint64_t, std::size_t> head_of;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& ev) {
    const auto [it, fresh] = head_of.emplace(ev.episode, ev.head);
    if (!fresh) {
      EXPECT_EQ(it->second, ev.head);
    }
  };
  train(c, "", hooks);
  EXPECT_EQ(head_of.size(), 600u / 15u);
}

TEST(Trainer, MaskBitRateMatchesBernoulliP) {
  std::uint64_t ones = 0, bits = 0, transitions = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& ev) {
    ++transitions;
    for (auto b : ev.transition->mask) {
      ones += b;
      ++bits;
    }
  };
  train(counting_config(100000), "", hooks);
  ASSERT_EQ(transitions, 100000u);
  EXPECT_NEAR(static_cast<double>(ones) / static_cast<double>(bits), 0.9, 0.01);
}

TEST(Trainer, QmaxStaysBoundedOnDeskRun) {
  TrainConfig c = tiny_config();
  c.env.n = 10;
  c.max_frames = 6000;
  c.steps_per_evaluation = 500;
  const TrainResult r = train(c);
  const double optimal = make_env(c.env)->spec().optimal_return;
  for (const auto& row : r.metrics.rows) {
    EXPECT_TRUE(std::isfinite(row.qmax));
    EXPECT_LT(row.qmax, 10.0 * optimal);
  }
}

TEST(Trainer, NumericBlowUpReportsFrame) {
  TrainConfig c = tiny_config();
  c.learning_rate = 1e300;
  try {
    train(c);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("frame ", 0), 0u) << e.what();
  }
}

TEST(Trainer, InvalidConfigRejected) {
  TrainConfig c = tiny_config();
  c.bernoulli_p = 2.0;
  EXPECT_THROW(Trainer{c}, ConfigError);
  c = tiny_config();
  c.env.name = "pong";
  EXPECT_THROW(Trainer{c}, ConfigError);
}

namespace {

NetPair constant_policy(const Environment& env, std::size_t heads, std::vector<double> q) {
  QNetShape shape{env.spec().obs_dim, env.spec().action_count, heads};
  NetPair pair(make_multihead(shape));
  for (auto& h : pair.policy.heads) {
    for (std::size_t a = 0; a < q.size(); ++a) h.layers.back().bias(static_cast<Eigen::Index>(a)) = q[a];
  }
  pair.target = pair.policy;
  return pair;
}

}  // namespace

TEST(Evaluate, FrozenNetDeterministicEnvGivesIdenticalReturns) {
  RngStream init(1);
  const NChain env(8);
  QNetShape shape{env.spec().obs_dim, 2, 3};
  const NetPair pair(make_multihead(shape, init));
  RngStream seeds(2);
  const auto returns = evaluate(pair, env, 5, seeds, 0);
  ASSERT_EQ(returns.size(), 5u);
  for (double r : returns) EXPECT_EQ(r, returns[0]);
  EXPECT_EQ(seeds.draws(), 5u);
  EXPECT_THROW(evaluate(pair, env, 0, seeds, 0), ArgumentError);
}

TEST(Evaluate, AlwaysRightPolicyAchievesOracleOptimum) {
  const NChain env(20);
  const NetPair pair = constant_policy(env, 3, {0.0, 1.0});
  RngStream seeds(3);
  for (double r : evaluate(pair, env, 5, seeds, 30)) EXPECT_DOUBLE_EQ(r, env.spec().optimal_return);
}

TEST(Evaluate, ReturnsAreRawNotClipped) {
  SparseCliff cliff(5, 3);
  const NetPair pair = constant_policy(cliff, 1, {0.0, 0.0, 0.0, 1.0, 0.0});  // walk right into the cliff
  RngStream seeds(4);
  for (double r : evaluate(pair, cliff, 3, seeds, 0)) EXPECT_EQ(r, -10.0);
}
