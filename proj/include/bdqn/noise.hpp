#pragma once

// Gaussian target noise and its Q-dependent scale.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "bdqn/errors.hpp"
#include "bdqn/nn.hpp"
#include "bdqn/rng.hpp"

namespace bdqn {

enum class NoiseGranularity {
  per_sample,  // one draw per (head, batch sample)
  per_head,    // one draw per head, shared by the whole batch
};

inline std::string_view to_string(NoiseGranularity g) {
  return g == NoiseGranularity::per_sample ? "per_sample" : "per_head";
}

inline NoiseGranularity parse_granularity(std::string_view s) {
  if (s == "per_sample") return NoiseGranularity::per_sample;
  if (s == "per_head") return NoiseGranularity::per_head;
  throw ConfigError("unknown noise granularity '" + std::string(s) + "'");
}

struct NoiseConfig {
  double mu = 0.0;
  double sigma = 0.02;
  double beta = 0.05;
  NoiseGranularity granularity = NoiseGranularity::per_sample;

  void validate() const {
    if (!std::isfinite(mu)) throw ConfigError("noise.mu must be finite");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise.sigma must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("noise.beta must be >= 0");
  }
};

struct ScaleState {
  double last_batch_qmax = 0.0;
  double last_scale = 1.0;
};

/// 1 + beta * qmax. Not clamped: a negative qmax yields a scale below 1 and
/// scale stays increasing in qmax.
inline double compute_scale(double qmax, double beta) {
  if (!std::isfinite(qmax) || !std::isfinite(beta)) throw NumericError("compute_scale: non-finite input");
  return 1.0 + beta * qmax;
}

/// K x batch_size i.i.d. G(mu, sigma) draws. The number of rng draws does not
/// depend on sigma, so a sigma = 0 run stays aligned with a noisy one.
inline Matrix sample_noise(std::size_t heads, std::size_t batch_size, const NoiseConfig& cfg, RngStream& rng) {
  if (heads == 0 || batch_size == 0) throw ArgumentError("sample_noise: heads and batch_size must be >= 1");
  const auto k = static_cast<Eigen::Index>(heads);
  const auto b = static_cast<Eigen::Index>(batch_size);
  Matrix out(k, b);
  if (cfg.granularity == NoiseGranularity::per_sample) {
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < b; ++j) out(i, j) = rng.normal(cfg.mu, cfg.sigma);
    }
  } else {
    for (Eigen::Index i = 0; i < k; ++i) out.row(i).setConstant(rng.normal(cfg.mu, cfg.sigma));
  }
  if (cfg.sigma == 0.0) out.setConstant(cfg.mu);
  return out;
}

}  // namespace bdqn
