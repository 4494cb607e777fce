#pragma once

// Fixed-capacity FIFO experience buffer. Each transition carries the K-bit
// head mask drawn when it was stored; masks are never resampled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bdqn/errors.hpp"
#include "bdqn/nn.hpp"
#include "bdqn/rng.hpp"

namespace bdqn {

struct Transition {
  Vector state;
  std::size_t action = 0;
  double reward = 0.0;  // clipped to [-1, 1]
  Vector next_state;
  bool terminal = false;
  std::vector<std::uint8_t> mask;  // one 0/1 entry per head
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t action_count, std::size_t heads)
      : capacity_(capacity), action_count_(action_count), heads_(heads) {
    if (capacity == 0) throw ValidationError("ReplayBuffer: capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void push(Transition t) {
    validate(t);
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// `batch_size` independent uniform draws with replacement.
  std::vector<Transition> sample(std::size_t batch_size, RngStream& rng) const {
    std::vector<Transition> out;
    out.reserve(batch_size);
    for (std::size_t idx : sample_indices(batch_size, rng)) out.push_back(storage_[idx]);
    return out;
  }

  std::vector<std::size_t> sample_indices(std::size_t batch_size, RngStream& rng) const {
    if (storage_.empty()) throw StateError("ReplayBuffer::sample: buffer is empty");
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(storage_.size()));
    return idx;
  }

  /// Entry by storage slot (not by age).
  const Transition& at(std::size_t slot) const { return storage_.at(slot); }

  /// Stored entries ordered oldest to newest.
  std::vector<Transition> snapshot() const {
    std::vector<Transition> out;
    out.reserve(storage_.size());
    const std::size_t start = storage_.size() < capacity_ ? 0 : cursor_;
    for (std::size_t i = 0; i < storage_.size(); ++i) out.push_back(storage_[(start + i) % storage_.size()]);
    return out;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }

 private:
  void validate(const Transition& t) const {
    if (!(t.reward >= -1.0 && t.reward <= 1.0)) {
      throw ValidationError("Transition: reward " + std::to_string(t.reward) + " outside [-1, 1]");
    }
    if (t.action >= action_count_) throw ValidationError("Transition: action out of range");
    if (t.mask.size() != heads_) throw ValidationError("Transition: mask length != head count");
    if (t.state.size() != t.next_state.size()) throw ValidationError("Transition: state widths differ");
  }

  std::size_t capacity_;
  std::size_t action_count_;
  std::size_t heads_;
  std::size_t cursor_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace bdqn
