#pragma once

// TrainConfig and its flat `key = value` text form. Lines starting with '#'
// are comments. Unknown keys are errors.
//
// Defaults are desk-scale. Where they differ from the reference (Atari)
// settings, the reference value is given in the trailing comment.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bdqn/agent.hpp"
#include "bdqn/envs.hpp"
#include "bdqn/errors.hpp"
#include "bdqn/noise.hpp"

namespace bdqn {

enum class Variant {
  boot_dqn_np,  // bootstrapped DQN with noisy targets
  boot_dqn,     // plain bootstrapped DQN: the no-noise code path
};

inline std::string_view to_string(Variant v) { return v == Variant::boot_dqn_np ? "boot_dqn_np" : "boot_dqn"; }

struct TrainConfig {
  Variant variant = Variant::boot_dqn_np;
  std::size_t heads = 9;
  double bernoulli_p = 0.9;
  double gamma = 0.99;
  double learning_rate = 6.25e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  EpsilonSchedule epsilon;                      // 1 -> 0.01 over 1M frames
  std::uint64_t sync_frames = 40'000;
  std::uint64_t frames_per_step = 1;            // reference: 4
  std::uint64_t steps_per_evaluation = 2'000;   // reference: 250k
  std::uint64_t max_frames = 400'000;           // reference: 200M
  std::size_t replay_size = 100'000;            // reference: 1M
  std::size_t batch_size = 32;
  std::size_t learn_start = 32;
  NoiseConfig noise;
  std::vector<std::size_t> body_hidden = {64};
  std::vector<std::size_t> head_hidden = {32};
  double output_init_scale = 1.0;
  EnvConfig env;
  int noop_max = 30;
  std::size_t eval_episodes = 5;
  std::uint64_t seed = 0;
  bool record_wallclock = false;
  bool checkpoint_every_eval = true;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(what);
    };
    need(heads >= 1, "heads must be >= 1");
    need(bernoulli_p >= 0.0 && bernoulli_p <= 1.0, "bernoulli_p must lie in [0, 1]");
    need(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    need(learning_rate >= 0.0 && std::isfinite(learning_rate), "lr must be finite and >= 0");
    need(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam.beta1 must lie in [0, 1)");
    need(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam.beta2 must lie in [0, 1)");
    need(adam_epsilon > 0.0, "adam.eps must be > 0");
    epsilon.validate();
    need(sync_frames >= 1, "sync must be >= 1");
    need(frames_per_step >= 1, "frames_per_step must be >= 1");
    need(steps_per_evaluation >= 1, "steps_per_evaluation must be >= 1");
    need(replay_size >= 1, "replay_size must be >= 1");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(learn_start >= 1, "learn_start must be >= 1");
    noise.validate();
    need(!body_hidden.empty(), "net.body needs at least one layer");
    for (auto w : body_hidden) need(w >= 1, "net.body widths must be >= 1");
    for (auto w : head_hidden) need(w >= 1, "net.head widths must be >= 1");
    need(output_init_scale >= 0.0 && std::isfinite(output_init_scale), "net.output_init_scale must be >= 0");
    need(noop_max >= 0, "noop_max must be >= 0");
    need(eval_episodes >= 1, "eval.episodes must be >= 1");
  }

  AdamHyper adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline std::string join_widths(const std::vector<std::size_t>& w) {
  if (w.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T, typename Member>
Field number_field(Member member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = parse_number<T>(k, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(member(c));
            } else {
              return std::to_string(member(c));
            }
          }};
}

#define BDQN_NUM(T, expr) number_field<T>([](auto& c) -> auto& { return expr; })

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"variant",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "boot_dqn_np") c.variant = Variant::boot_dqn_np;
          else if (v == "boot_dqn") c.variant = Variant::boot_dqn;
          else throw ConfigError("bad value for " + k + ": '" + v + "' (boot_dqn_np or boot_dqn)");
        },
        [](const TrainConfig& c) { return std::string(to_string(c.variant)); }}},
      {"heads", BDQN_NUM(std::size_t, c.heads)},
      {"bernoulli_p", BDQN_NUM(double, c.bernoulli_p)},
      {"gamma", BDQN_NUM(double, c.gamma)},
      {"lr", BDQN_NUM(double, c.learning_rate)},
      {"adam.beta1", BDQN_NUM(double, c.adam_beta1)},
      {"adam.beta2", BDQN_NUM(double, c.adam_beta2)},
      {"adam.eps", BDQN_NUM(double, c.adam_epsilon)},
      {"eps.initial", BDQN_NUM(double, c.epsilon.initial)},
      {"eps.final", BDQN_NUM(double, c.epsilon.final)},
      {"eps.decay_frames", BDQN_NUM(std::uint64_t, c.epsilon.decay_frames)},
      {"sync", BDQN_NUM(std::uint64_t, c.sync_frames)},
      {"frames_per_step", BDQN_NUM(std::uint64_t, c.frames_per_step)},
      {"steps_per_evaluation", BDQN_NUM(std::uint64_t, c.steps_per_evaluation)},
      {"max_frames", BDQN_NUM(std::uint64_t, c.max_frames)},
      {"replay_size", BDQN_NUM(std::size_t, c.replay_size)},
      {"batch_size", BDQN_NUM(std::size_t, c.batch_size)},
      {"learn_start", BDQN_NUM(std::size_t, c.learn_start)},
      {"noise.mu", BDQN_NUM(double, c.noise.mu)},
      {"noise.sigma", BDQN_NUM(double, c.noise.sigma)},
      {"noise.beta", BDQN_NUM(double, c.noise.beta)},
      {"noise.granularity",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.noise.granularity = parse_granularity(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.noise.granularity)); }}},
      {"net.body",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.body_hidden = parse_widths(k, v); },
        [](const TrainConfig& c) { return join_widths(c.body_hidden); }}},
      {"net.head",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.head_hidden = parse_widths(k, v); },
        [](const TrainConfig& c) { return join_widths(c.head_hidden); }}},
      {"net.output_init_scale", BDQN_NUM(double, c.output_init_scale)},
      {"env.name",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.env.name = v; },
        [](const TrainConfig& c) { return c.env.name; }}},
      {"env.n", BDQN_NUM(std::size_t, c.env.n)},
      {"env.horizon", BDQN_NUM(std::size_t, c.env.horizon)},
      {"env.width", BDQN_NUM(std::size_t, c.env.width)},
      {"env.height", BDQN_NUM(std::size_t, c.env.height)},
      {"noop_max", BDQN_NUM(int, c.noop_max)},
      {"eval.episodes", BDQN_NUM(std::size_t, c.eval_episodes)},
      {"seed", BDQN_NUM(std::uint64_t, c.seed)},
      {"metrics.wallclock",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.record_wallclock = parse_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.record_wallclock ? "true" : "false"); }}},
      {"checkpoint.every_eval",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every_eval = parse_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.checkpoint_every_eval ? "true" : "false"); }}},
  };
  return table;
}

#undef BDQN_NUM

}  // namespace detail

/// Apply one `key=value` assignment.
inline void apply_override(TrainConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string value = detail::trim(assignment.substr(eq + 1));
  const auto& table = detail::fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

inline void apply_config_text(TrainConfig& cfg, std::string_view text, const std::string& origin = "<config>") {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      apply_override(cfg, t);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  apply_config_text(cfg, text);
  cfg.validate();
  return cfg;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  TrainConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  cfg.validate();
  return cfg;
}

/// Every key, sorted, one `key = value` per line. Round-trips through parse_config.
inline std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : detail::fields()) keys.push_back(key);
  return keys;
}

}  // namespace bdqn
