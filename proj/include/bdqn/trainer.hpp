#pragma once

// Training loop: one exploration head per episode, epsilon-greedy acting,
// masked replay writes, one update per step, frame-denominated target sync,
// periodic ensemble-vote evaluation with metrics and checkpoints.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "bdqn/agent.hpp"
#include "bdqn/config.hpp"
#include "bdqn/envs.hpp"
#include "bdqn/qnet.hpp"
#include "bdqn/replay.hpp"
#include "bdqn/rng.hpp"
#include "bdqn/serialize.hpp"
#include "bdqn/update.hpp"

namespace bdqn {

struct EvalRow {
  std::uint64_t frames = 0;
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
  double qmax = 0.0;
  double scale = 1.0;
  double disagreement = 0.0;
  double wallclock_s = 0.0;
};

struct RunMetrics {
  std::vector<EvalRow> rows;
};

/// Population mean and standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

inline std::string metrics_header(std::size_t episodes) {
  std::string h = "frames";
  for (std::size_t i = 0; i < episodes; ++i) h += ",ep" + std::to_string(i);
  return h + ",mean,std,qmax,scale,disagreement,wallclock_s";
}

inline std::string format_wallclock(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", s);
  return buf;
}

inline std::string metrics_csv(const RunMetrics& m, std::size_t episodes) {
  using detail::format_double;
  std::string out = metrics_header(episodes) + "\n";
  for (const auto& r : m.rows) {
    out += std::to_string(r.frames);
    for (double x : r.returns) out += "," + format_double(x);
    out += "," + format_double(r.mean) + "," + format_double(r.std) + "," + format_double(r.qmax) + "," +
           format_double(r.scale) + "," + format_double(r.disagreement) + "," + format_wallclock(r.wallclock_s) + "\n";
  }
  return out;
}

/// Runs `episodes` ensemble-vote episodes with epsilon = 0. Each episode gets a
/// fresh seed from `seed_rng`, which also seeds that episode's no-op draw.
/// Returns raw (unclipped) returns.
inline std::vector<double> evaluate(const NetPair& pair, const Environment& proto, std::size_t episodes,
                                    RngStream& seed_rng, int noop_max) {
  if (episodes == 0) throw ArgumentError("evaluate: need at least one episode");
  std::vector<double> returns;
  returns.reserve(episodes);
  auto env = proto.clone();
  for (std::size_t e = 0; e < episodes; ++e) {
    const std::uint64_t seed = seed_rng.next_u64();
    Vector obs = env->reset(seed, noop_max);
    double total = 0.0;
    while (!env->done()) {
      const StepResult r = env->step(act_evaluate(pair, obs));
      total += r.raw_reward;
      obs = r.observation;
    }
    returns.push_back(total);
  }
  return returns;
}

struct StepEvent {
  std::uint64_t frames = 0;
  std::uint64_t steps = 0;
  std::uint64_t episode = 0;
  std::size_t head = 0;
  const Transition* transition = nullptr;
  bool updated = false;
  bool synced = false;
  const NetPair* pair = nullptr;
};

struct TrainHooks {
  std::function<void(std::uint64_t episode, std::size_t head)> on_episode_start;
  std::function<void(const StepEvent&)> on_step;
  std::function<void(const EvalRow&, const NetPair&)> on_evaluation;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)), streams_(cfg_.seed), env_(make_env(cfg_.env)) {
    cfg_.validate();
    QNetShape shape;
    shape.obs_dim = env_->spec().obs_dim;
    shape.action_count = env_->spec().action_count;
    shape.heads = cfg_.heads;
    shape.body_hidden = cfg_.body_hidden;
    shape.head_hidden = cfg_.head_hidden;
    shape.output_init_scale = cfg_.output_init_scale;
    pair_ = NetPair(make_multihead(shape, streams_[Stream::weights]));
    adam_ = MultiHeadAdam::for_net(pair_.policy, cfg_.adam());
    buffer_ = std::make_unique<ReplayBuffer>(cfg_.replay_size, shape.action_count, cfg_.heads);
    train_env_seed_ = streams_[Stream::env].next_u64();
    probes_ = env_->probe_states();
    update_opts_.gamma = cfg_.gamma;
    update_opts_.noise = cfg_.noise;
    update_opts_.noise_enabled = cfg_.variant == Variant::boot_dqn_np;
  }

  /// Runs to max_frames. When `out_dir` is non-empty, writes metrics.csv,
  /// config.cfg, streams.csv and checkpoints/ there.
  RunMetrics run(const std::string& out_dir = "", const TrainHooks& hooks = {}) {
    namespace fs = std::filesystem;
    out_dir_ = out_dir;
    if (!out_dir_.empty()) {
      fs::create_directories(fs::path(out_dir_) / "checkpoints");
      std::ofstream(fs::path(out_dir_) / "config.cfg") << to_text(cfg_);
    }
    start_ = std::chrono::steady_clock::now();
    RunMetrics metrics;
    std::uint64_t episode = 0;

    while (frames_ < cfg_.max_frames) {
      Vector obs = env_->reset(train_env_seed_, cfg_.noop_max, streams_[Stream::noop]);
      const auto head = static_cast<std::size_t>(streams_[Stream::head_select].uniform_index(cfg_.heads));
      if (hooks.on_episode_start) hooks.on_episode_start(episode, head);

      while (!env_->done() && frames_ < cfg_.max_frames) {
        const std::uint64_t before = frames_;
        frames_ += cfg_.frames_per_step;
        ++steps_;
        const double eps = epsilon_at(cfg_.epsilon, frames_);
        const std::size_t action = act_explore(pair_, head, obs, eps, streams_[Stream::epsilon]);
        const StepResult r = env_->step(action);

        Transition t;
        t.state = obs;
        t.action = action;
        t.reward = r.clipped_reward;
        t.next_state = r.observation;
        t.terminal = r.terminal;
        t.mask.resize(cfg_.heads);
        for (auto& bit : t.mask) bit = streams_[Stream::masks].bernoulli(cfg_.bernoulli_p) ? 1 : 0;
        buffer_->push(t);
        obs = r.observation;

        bool updated = false;
        if (buffer_->size() >= cfg_.learn_start) {
          const UpdateBatch batch = UpdateBatch::from(buffer_->sample(cfg_.batch_size, streams_[Stream::replay_sample]));
          UpdateStats stats;
          try {
            stats = update_step(pair_, batch, update_opts_, adam_, streams_[Stream::noise]);
          } catch (const NumericError& e) {
            throw NumericError("frame " + std::to_string(frames_) + ": " + e.what());
          }
          scale_state_.last_batch_qmax = stats.batch_qmax;
          scale_state_.last_scale = stats.scale;
          updated = true;
        }

        pair_.frames_since_sync += cfg_.frames_per_step;
        const bool synced = frames_ / cfg_.sync_frames > before / cfg_.sync_frames;
        if (synced) sync_target(pair_);

        if (hooks.on_step) {
          StepEvent ev{frames_, steps_, episode, head, &t, updated, synced, &pair_};
          hooks.on_step(ev);
        }

        if (steps_ % cfg_.steps_per_evaluation == 0) {
          metrics.rows.push_back(evaluation_row());
          if (hooks.on_evaluation) hooks.on_evaluation(metrics.rows.back(), pair_);
          if (!out_dir_.empty()) {
            write_metrics(metrics);
            if (cfg_.checkpoint_every_eval) {
              save_checkpoint((fs::path(out_dir_) / "checkpoints" / ("frames_" + std::to_string(frames_) + ".bin")).string(),
                              checkpoint());
            }
          }
        }
      }
      ++episode;
    }

    if (!out_dir_.empty()) {
      write_metrics(metrics);
      save_checkpoint((fs::path(out_dir_) / "checkpoints" / "final.bin").string(), checkpoint());
      std::ofstream streams(fs::path(out_dir_) / "streams.csv");
      streams << "stream,draws\n";
      for (std::size_t i = 0; i < kStreamCount; ++i) {
        streams << kStreamNames[i] << "," << streams_[static_cast<Stream>(i)].draws() << "\n";
      }
    }
    return metrics;
  }

  EvalRow evaluation_row() {
    EvalRow row;
    row.frames = frames_;
    row.returns = evaluate(pair_, *env_, cfg_.eval_episodes, streams_[Stream::eval_seeds], cfg_.noop_max);
    std::tie(row.mean, row.std) = mean_std(row.returns);
    row.qmax = scale_state_.last_batch_qmax;
    row.scale = scale_state_.last_scale;
    row.disagreement = head_disagreement(pair_.policy, probes_);
    if (cfg_.record_wallclock) {
      row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    return row;
  }

  TrainerCheckpoint checkpoint() const { return {frames_, steps_, pair_, adam_}; }

  const TrainConfig& config() const { return cfg_; }
  const NetPair& pair() const { return pair_; }
  const StreamSet& streams() const { return streams_; }
  const Environment& env() const { return *env_; }
  const ReplayBuffer& buffer() const { return *buffer_; }
  const Matrix& probe_states() const { return probes_; }
  std::uint64_t frames() const { return frames_; }

 private:
  void write_metrics(const RunMetrics& m) const {
    std::ofstream(std::filesystem::path(out_dir_) / "metrics.csv", std::ios::trunc) << metrics_csv(m, cfg_.eval_episodes);
  }

  TrainConfig cfg_;
  StreamSet streams_;
  std::unique_ptr<Environment> env_;
  NetPair pair_;
  MultiHeadAdam adam_;
  std::unique_ptr<ReplayBuffer> buffer_;
  UpdateOptions update_opts_;
  ScaleState scale_state_;
  Matrix probes_;
  std::uint64_t train_env_seed_ = 0;
  std::uint64_t frames_ = 0;
  std::uint64_t steps_ = 0;
  std::string out_dir_;
  std::chrono::steady_clock::time_point start_;
};

struct TrainResult {
  RunMetrics metrics;
  TrainerCheckpoint final_checkpoint;
};

inline TrainResult train(const TrainConfig& cfg, const std::string& out_dir = "", const TrainHooks& hooks = {}) {
  Trainer t(cfg);
  RunMetrics m = t.run(out_dir, hooks);
  return {std::move(m), t.checkpoint()};
}

}  // namespace bdqn
