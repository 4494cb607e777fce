#pragma once

// Test helpers: scratch directories, file slurping, random networks and
// naive scalar re-implementations used as oracles.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bdqn/nn.hpp"
#include "bdqn/qnet.hpp"
#include "bdqn/rng.hpp"

namespace bdqn::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("bdqn_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& body) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << body;
}

/// Every weight and bias drawn from U(-scale, scale).
inline void randomize(DenseNet& net, RngStream& rng, double scale = 1.0) {
  for (auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.uniform(-scale, scale);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-scale, scale);
  }
}

inline void randomize(MultiHeadNet& net, RngStream& rng, double scale = 1.0) {
  randomize(net.body, rng, scale);
  for (auto& h : net.heads) randomize(h, rng, scale);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

/// Per-sample loops with no Eigen products.
inline std::vector<double> naive_forward(const DenseNet& net, std::vector<double> x) {
  for (const auto& l : net.layers) {
    std::vector<double> y(l.out_dim(), 0.0);
    for (std::size_t o = 0; o < l.out_dim(); ++o) {
      double acc = l.bias(static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < l.in_dim(); ++i) {
        acc += l.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
      }
      y[o] = l.activation == Activation::relu ? (acc > 0.0 ? acc : 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

/// Q-row of head k for one state via the naive forward.
inline std::vector<double> naive_q(const MultiHeadNet& net, std::size_t k, const std::vector<double>& s) {
  return naive_forward(net.heads[k], naive_forward(net.body, s));
}

inline std::size_t naive_argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline double naive_smooth_l1(double p, double t) {
  const double d = p - t;
  return std::fabs(d) < 1.0 ? 0.5 * d * d : std::fabs(d) - 0.5;
}

inline MultiHeadNet small_multihead(std::size_t obs, std::size_t actions, std::size_t heads, RngStream& rng,
                                    std::vector<std::size_t> body = {5}, std::vector<std::size_t> head = {4}) {
  QNetShape shape;
  shape.obs_dim = obs;
  shape.action_count = actions;
  shape.heads = heads;
  shape.body_hidden = std::move(body);
  shape.head_hidden = std::move(head);
  MultiHeadNet net = make_multihead(shape);
  randomize(net, rng, 0.8);
  return net;
}

}  // namespace bdqn::testing
