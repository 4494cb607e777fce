// bdqn: train, evaluate, report and ablate bootstrapped DQN agents.
//
//   bdqn train      --config run.cfg --seed 3 --out runs/a [--override key=value]...
//   bdqn eval       --config run.cfg --checkpoint runs/a/checkpoints/final.bin [--episodes 5]
//   bdqn report     --out report/ runs/a runs/b ...
//   bdqn experiment --config base.cfg --matrix ablation.matrix --seeds 1,2,3 --out sweep/

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "bdqn/experiment.hpp"
#include "bdqn/report.hpp"
#include "bdqn/trainer.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "flat key = value config file");
  cmd->add_option("--override", c.overrides, "key=value applied after the config file (repeatable)");
  auto* seed = cmd->add_option("--seed", c.seed, "master seed");
  seed->each([&c](const std::string&) { c.seed_given = true; });
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
}

bdqn::TrainConfig resolve(const Common& c) {
  bdqn::TrainConfig cfg = c.config.empty() ? bdqn::TrainConfig{} : bdqn::load_config(c.config);
  for (const auto& o : c.overrides) bdqn::apply_override(cfg, o);
  if (c.seed_given) cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = bdqn::detail::trim(tok);
    std::uint64_t s = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), s);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw bdqn::ArgumentError("--seeds: bad seed '" + tok + "'");
    }
    seeds.push_back(s);
  }
  if (seeds.empty()) throw bdqn::ArgumentError("--seeds: empty list");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bootstrapped DQN with noisy targets"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train = app.add_subcommand("train", "train one agent and write metrics, checkpoints and config");
  add_common(train, train_opts, true);

  Common eval_opts;
  std::string checkpoint;
  std::size_t episodes = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with the ensemble vote");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", checkpoint, "trainer checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes (default: eval.episodes)");

  Common report_opts;
  std::vector<std::string> run_dirs;
  auto* rep = app.add_subcommand("report", "score run directories into scores.csv, profile.csv and SVG curves");
  add_common(rep, report_opts, true);
  rep->add_option("runs", run_dirs, "run directories")->required();

  Common exp_opts;
  std::string matrix;
  std::string seeds = "1,2,3,4,5";
  unsigned jobs = 1;
  auto* exp = app.add_subcommand("experiment", "train every matrix variant on every seed, then report");
  add_common(exp, exp_opts, true);
  exp->add_option("--matrix", matrix, "variant matrix file")->required();
  exp->add_option("--seeds", seeds, "comma-separated seed list");
  exp->add_option("--jobs", jobs, "cells trained concurrently");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const bdqn::TrainConfig cfg = resolve(train_opts);
      const auto metrics = bdqn::Trainer(cfg).run(train_opts.out);
      if (!metrics.rows.empty()) {
        const auto& last = metrics.rows.back();
        std::printf("frames=%llu mean=%s disagreement=%s\n", static_cast<unsigned long long>(last.frames),
                    bdqn::detail::format_double(last.mean).c_str(),
                    bdqn::detail::format_double(last.disagreement).c_str());
      }
      std::printf("wrote %s\n", train_opts.out.c_str());
    } else if (*eval) {
      const bdqn::TrainConfig cfg = resolve(eval_opts);
      const bdqn::TrainerCheckpoint ck = bdqn::load_checkpoint(checkpoint);
      const auto env = bdqn::make_env(cfg.env);
      if (ck.pair.policy.obs_dim() != env->spec().obs_dim || ck.pair.policy.action_count() != env->spec().action_count) {
        throw bdqn::ShapeError("eval: checkpoint does not match the configured environment");
      }
      bdqn::StreamSet streams(cfg.seed);
      const auto returns = bdqn::evaluate(ck.pair, *env, episodes ? episodes : cfg.eval_episodes,
                                          streams[bdqn::Stream::eval_seeds], cfg.noop_max);
      const auto [mean, sd] = bdqn::mean_std(returns);
      std::string line = "frames=" + std::to_string(ck.frames) + " returns=";
      for (std::size_t i = 0; i < returns.size(); ++i) line += (i ? "," : "") + bdqn::detail::format_double(returns[i]);
      line += " mean=" + bdqn::detail::format_double(mean) + " std=" + bdqn::detail::format_double(sd) +
              " optimal=" + bdqn::detail::format_double(env->spec().optimal_return);
      std::printf("%s\n", line.c_str());
      if (!eval_opts.out.empty()) {
        std::filesystem::create_directories(eval_opts.out);
        bdqn::RunMetrics m;
        bdqn::EvalRow row;
        row.frames = ck.frames;
        row.returns = returns;
        row.mean = mean;
        row.std = sd;
        const bdqn::Matrix probes = env->probe_states();
        row.qmax = bdqn::batch_qmax(ck.pair.policy, probes);
        row.scale = bdqn::compute_scale(row.qmax, cfg.noise.beta);
        row.disagreement = bdqn::head_disagreement(ck.pair.policy, probes);
        m.rows.push_back(row);
        std::ofstream(std::filesystem::path(eval_opts.out) / "eval.csv") << bdqn::metrics_csv(m, returns.size());
      }
    } else if (*rep) {
      const auto out = bdqn::report(run_dirs, report_opts.out);
      for (const auto& f : out.files) std::printf("wrote %s\n", f.c_str());
    } else if (*exp) {
      const bdqn::TrainConfig base = resolve(exp_opts);
      const auto res = bdqn::run_ablation(base, bdqn::load_matrix(matrix), parse_seeds(seeds), exp_opts.out, jobs);
      std::printf("%zu cells ok, %zu failed\n", res.run_dirs.size(), res.failures.size());
      for (const auto& f : res.failures) {
        std::fprintf(stderr, "failed: %s seed %llu: %s\n", f.variant.c_str(), static_cast<unsigned long long>(f.seed),
                     f.error.c_str());
      }
      if (res.run_dirs.empty()) return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bdqn: %s\n", e.what());
    return 1;
  }
  return 0;
}
