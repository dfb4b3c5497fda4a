#pragma once

#include <cstddef>
#include <vector>

#include "aoirelay/rng.hpp"

namespace aoirelay {

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Binary sum tree over a power-of-two number of leaves. Node 1 is the root;
// leaf i lives at node leaf_count + i.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t leaf_count() const { return leaves_; }
  double total() const { return sum_[1]; }
  double max() const { return max_[1]; }
  double leaf(std::size_t i) const { return sum_[leaves_ + i]; }

  void set(std::size_t i, double value);
  // Smallest leaf index whose inclusive prefix sum exceeds `value`;
  // `value` is clamped into [0, total).
  std::size_t find_prefix(double value) const;
  // Every internal node equals the sum (and max) of its children.
  bool check_invariant() const;

 private:
  std::size_t capacity_;
  std::size_t leaves_;
  std::vector<double> sum_;
  std::vector<double> max_;
};

struct SampleBatch {
  std::vector<std::size_t> indices;  // slots in the memory
  std::vector<double> probabilities;  // P_i
  std::vector<double> raw_weights;  // (1 / (RM * P_i))^beta
  std::vector<double> weights;  // raw_weights / max(raw_weights)
};

// Proportional prioritized replay. Stored priorities are raw p_i; the tree
// holds p_i^alpha, so alpha is fixed per memory.
class PrioritizedReplay {
 public:
  PrioritizedReplay(std::size_t capacity, double alpha);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return tree_.capacity(); }
  double alpha() const { return alpha_; }

  // Stores with priority max_j p_j (1 when empty), overwriting the oldest
  // entry once full. Returns the slot used.
  std::size_t push(Transition t);

  // Stratified proportional sampling; throws std::logic_error if fewer
  // than m transitions are stored.
  SampleBatch sample(std::size_t m, double beta, Rng& rng) const;

  // p_i <- |loss| + zeta. Throws std::out_of_range for an unused slot.
  void update_priority(std::size_t index, double loss, double zeta);

  double priority(std::size_t index) const { return priorities_.at(index); }
  double max_priority() const;
  double probability(std::size_t index) const;
  const Transition& at(std::size_t index) const { return items_.at(index); }
  const SumTree& tree() const { return tree_; }

 private:
  void set_priority(std::size_t index, double p);

  double alpha_;
  SumTree tree_;  // p_i^alpha
  SumTree raw_;   // p_i, for the max rule
  std::vector<Transition> items_;
  std::vector<double> priorities_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace aoirelay
