#pragma once

// Little-endian binary checkpoints. Layout is documented in
// docs/checkpoint_format.md; keep the two in sync.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bdqn/errors.hpp"
#include "bdqn/nn.hpp"
#include "bdqn/qnet.hpp"

namespace bdqn {

inline constexpr char kMagic[4] = {'B', 'D', 'Q', 'N'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class PayloadKind : std::uint8_t { dense_net = 1, adam_state = 2, trainer = 3 };

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  /// Row-major dump of a matrix.
  void matrix(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void vector(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  void matrix(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
  }
  void vector(Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
  }

  void header(PayloadKind expected) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kMagic, 4) != 0) throw ParseError("checkpoint: bad magic");
    pos_ += 4;
    const auto version = u32();
    if (version != kFormatVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    const auto kind = u8();
    if (kind != static_cast<std::uint8_t>(expected)) throw ParseError("checkpoint: unexpected payload kind");
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint: truncated data");
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void write_header(ByteWriter& w, PayloadKind kind) {
  w.raw(kMagic, 4);
  w.u32(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(kind));
}

inline void write_dense(ByteWriter& w, const DenseNet& net) {
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (const auto& l : net.layers) {
    w.matrix(l.weight);
    w.vector(l.bias);
  }
}

inline DenseNet read_dense(ByteReader& r) {
  const auto count = r.u32();
  if (count == 0 || count > 1024) throw ParseError("checkpoint: implausible layer count");
  DenseNet net;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto in = r.u32();
    const auto out = r.u32();
    const auto act = r.u8();
    if (act > 1) throw ParseError("checkpoint: unknown activation tag");
    Layer l;
    l.weight.resize(out, in);
    l.bias.resize(out);
    l.activation = static_cast<Activation>(act);
    net.layers.push_back(std::move(l));
  }
  check_chain(net);
  for (auto& l : net.layers) {
    r.matrix(l.weight);
    r.vector(l.bias);
  }
  return net;
}

inline void write_adam(ByteWriter& w, const AdamState& s) {
  w.u64(s.step);
  w.f64(s.hyper.learning_rate);
  w.f64(s.hyper.beta1);
  w.f64(s.hyper.beta2);
  w.f64(s.hyper.epsilon);
  w.u32(static_cast<std::uint32_t>(s.m.size()));
  for (const auto& m : s.m) {
    w.u32(static_cast<std::uint32_t>(m.weight.cols()));
    w.u32(static_cast<std::uint32_t>(m.weight.rows()));
  }
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    w.matrix(s.m[i].weight);
    w.vector(s.m[i].bias);
    w.matrix(s.v[i].weight);
    w.vector(s.v[i].bias);
  }
}

inline AdamState read_adam(ByteReader& r) {
  AdamState s;
  s.step = r.u64();
  s.hyper.learning_rate = r.f64();
  s.hyper.beta1 = r.f64();
  s.hyper.beta2 = r.f64();
  s.hyper.epsilon = r.f64();
  const auto count = r.u32();
  if (count > 1024) throw ParseError("checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto in = r.u32();
    const auto out = r.u32();
    LayerGrad g{Matrix(out, in), Vector(out)};
    s.m.push_back(g);
    s.v.push_back(g);
  }
  for (std::size_t i = 0; i < count; ++i) {
    r.matrix(s.m[i].weight);
    r.vector(s.m[i].bias);
    r.matrix(s.v[i].weight);
    r.vector(s.v[i].bias);
  }
  return s;
}

inline void write_multihead(ByteWriter& w, const MultiHeadNet& net) {
  write_dense(w, net.body);
  w.u32(static_cast<std::uint32_t>(net.heads.size()));
  for (const auto& h : net.heads) write_dense(w, h);
}

inline MultiHeadNet read_multihead(ByteReader& r) {
  MultiHeadNet net;
  net.body = read_dense(r);
  const auto k = r.u32();
  if (k == 0 || k > 4096) throw ParseError("checkpoint: implausible head count");
  for (std::uint32_t i = 0; i < k; ++i) net.heads.push_back(read_dense(r));
  return net;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::uint8_t> encode(const DenseNet& net) {
  ByteWriter w;
  write_header(w, PayloadKind::dense_net);
  write_dense(w, net);
  return w.bytes();
}

inline DenseNet decode_dense(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.header(PayloadKind::dense_net);
  DenseNet net = read_dense(r);
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes");
  return net;
}

inline std::vector<std::uint8_t> encode(const AdamState& s) {
  ByteWriter w;
  write_header(w, PayloadKind::adam_state);
  write_adam(w, s);
  return w.bytes();
}

inline AdamState decode_adam(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.header(PayloadKind::adam_state);
  AdamState s = read_adam(r);
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes");
  return s;
}

/// Everything a trainer checkpoint holds: both networks, the optimiser state
/// and the frame/step counters. The replay buffer is not saved.
struct TrainerCheckpoint {
  std::uint64_t frames = 0;
  std::uint64_t steps = 0;
  NetPair pair;
  MultiHeadAdam adam;
};

inline std::vector<std::uint8_t> encode(const TrainerCheckpoint& c) {
  ByteWriter w;
  write_header(w, PayloadKind::trainer);
  w.u64(c.frames);
  w.u64(c.steps);
  w.u64(c.pair.frames_since_sync);
  write_multihead(w, c.pair.policy);
  write_multihead(w, c.pair.target);
  write_adam(w, c.adam.body);
  w.u32(static_cast<std::uint32_t>(c.adam.heads.size()));
  for (const auto& h : c.adam.heads) write_adam(w, h);
  return w.bytes();
}

inline TrainerCheckpoint decode_trainer(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.header(PayloadKind::trainer);
  TrainerCheckpoint c;
  c.frames = r.u64();
  c.steps = r.u64();
  const auto since = r.u64();
  MultiHeadNet policy = read_multihead(r);
  MultiHeadNet target = read_multihead(r);
  c.pair = NetPair(std::move(policy));
  c.pair.target = std::move(target);
  c.pair.frames_since_sync = since;
  c.adam.body = read_adam(r);
  const auto k = r.u32();
  if (k != c.pair.policy.head_count()) throw ParseError("checkpoint: optimiser head count mismatch");
  for (std::uint32_t i = 0; i < k; ++i) c.adam.heads.push_back(read_adam(r));
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const std::string& path, const TrainerCheckpoint& c) { write_file(path, encode(c)); }
inline TrainerCheckpoint load_checkpoint(const std::string& path) { return decode_trainer(read_file(path)); }

}  // namespace bdqn
