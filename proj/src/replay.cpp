#include "aoirelay/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aoirelay {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), leaves_(1) {
  if (capacity == 0) throw std::invalid_argument("sum tree capacity must be >= 1");
  while (leaves_ < capacity) leaves_ <<= 1;
  sum_.assign(2 * leaves_, 0.0);
  max_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t i, double value) {
  if (i >= capacity_) throw std::out_of_range("sum tree leaf out of range");
  if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("sum tree values must be finite and >= 0");
  std::size_t node = leaves_ + i;
  sum_[node] = value;
  max_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) {
    sum_[node] = sum_[2 * node] + sum_[2 * node + 1];
    max_[node] = std::max(max_[2 * node], max_[2 * node + 1]);
  }
}

std::size_t SumTree::find_prefix(double value) const {
  value = std::clamp(value, 0.0, total());
  std::size_t node = 1;
  while (node < leaves_) {
    const std::size_t left = 2 * node;
    if (value < sum_[left] || sum_[left + 1] == 0.0) {
      node = left;
    } else {
      value -= sum_[left];
      node = left + 1;
    }
  }
  std::size_t i = node - leaves_;
  // Rounding can land on a zero-weight leaf; fall back to the nearest
  // positive one on the left.
  while (i > 0 && sum_[leaves_ + i] == 0.0) --i;
  return i;
}

bool SumTree::check_invariant() const {
  for (std::size_t node = 1; node < leaves_; ++node) {
    if (sum_[node] != sum_[2 * node] + sum_[2 * node + 1]) return false;
    if (max_[node] != std::max(max_[2 * node], max_[2 * node + 1])) return false;
  }
  for (std::size_t i = capacity_; i < leaves_; ++i) {
    if (sum_[leaves_ + i] != 0.0) return false;
  }
  return true;
}

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, double alpha)
    : alpha_(alpha), tree_(capacity), raw_(capacity), items_(capacity), priorities_(capacity, 0.0) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("replay: alpha must be >= 0");
}

double PrioritizedReplay::max_priority() const {
  return size_ == 0 ? 1.0 : raw_.max();
}

void PrioritizedReplay::set_priority(std::size_t index, double p) {
  priorities_[index] = p;
  tree_.set(index, std::pow(p, alpha_));
  raw_.set(index, p);
}

std::size_t PrioritizedReplay::push(Transition t) {
  const double p = max_priority();
  const std::size_t slot = cursor_;
  items_[slot] = std::move(t);
  set_priority(slot, p);
  cursor_ = (cursor_ + 1) % capacity();
  size_ = std::min(size_ + 1, capacity());
  return slot;
}

double PrioritizedReplay::probability(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay: slot not in use");
  return tree_.leaf(index) / tree_.total();
}

SampleBatch PrioritizedReplay::sample(std::size_t m, double beta, Rng& rng) const {
  if (m == 0) throw std::invalid_argument("replay: batch size must be >= 1");
  if (size_ < m) {
    throw std::logic_error("replay: memory holds " + std::to_string(size_) +
                           " transitions, batch needs " + std::to_string(m));
  }
  SampleBatch batch;
  batch.indices.reserve(m);
  batch.probabilities.reserve(m);
  batch.raw_weights.reserve(m);
  const double total = tree_.total();
  const double segment = total / static_cast<double>(m);
  const double rm = static_cast<double>(capacity());
  double max_w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = (static_cast<double>(j) + rng.uniform()) * segment;
    std::size_t i = tree_.find_prefix(u);
    if (i >= size_) i = size_ - 1;
    const double p = tree_.leaf(i) / total;
    const double w = std::pow(1.0 / (rm * p), beta);
    batch.indices.push_back(i);
    batch.probabilities.push_back(p);
    batch.raw_weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  batch.weights.reserve(m);
  for (double w : batch.raw_weights) batch.weights.push_back(w / max_w);
  return batch;
}

void PrioritizedReplay::update_priority(std::size_t index, double loss, double zeta) {
  if (index >= size_) throw std::out_of_range("replay: slot " + std::to_string(index) + " not in use");
  set_priority(index, std::abs(loss) + zeta);
}

}  // namespace aoirelay
