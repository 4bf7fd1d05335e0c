#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seft/errors.hpp"
#include "seft/random.hpp"

namespace seft {

/// Optimizer steps per epoch: the minimum of the steps needed to see every
/// majority sample once and the steps needed to see every minority sample
/// three times, given how many of each class one batch holds.
inline std::size_t steps_per_epoch_rule(std::size_t n_majority, std::size_t n_minority,
                                        std::size_t majority_per_batch,
                                        std::size_t minority_per_batch) {
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  return std::min(ceil_div(n_majority, majority_per_batch),
                  ceil_div(3 * n_minority, minority_per_batch));
}

struct BatchPlan {
  std::size_t batch_size = 0;
  std::size_t steps_per_epoch = 0;
  std::vector<std::size_t> class_sizes;  // N_c
  std::vector<std::size_t> per_batch;    // base samples of class c in each batch
};

/// Balanced minibatches over integer class labels 0..C-1.
///
/// Every class is an endless stream over a seeded permutation of its
/// members; when a stream is exhausted it is reshuffled and restarted.
/// Binary tasks put ceil(B/2) minority and floor(B/2) majority samples in
/// every batch. With C > 2 the B mod C leftover slots rotate round-robin.
class BalancedBatcher {
 public:
  BalancedBatcher(std::span<const int> labels, std::size_t batch_size, std::uint64_t seed)
      : rng_(seed) {
    if (batch_size < 2) throw ValidationError("batch size must be at least 2");
    int max_label = -1;
    for (int y : labels) {
      if (y < 0) throw ValidationError("balanced batching needs labeled data");
      max_label = std::max(max_label, y);
    }
    const std::size_t classes = static_cast<std::size_t>(max_label + 1);
    streams_.resize(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      streams_[static_cast<std::size_t>(labels[i])].items.push_back(i);
    }
    for (const auto& s : streams_) {
      if (s.items.empty()) throw ValidationError("balanced batching needs every class present");
    }
    if (classes < 2) throw ValidationError("balanced batching needs at least two classes");
    if (batch_size < classes) throw ValidationError("batch size smaller than class count");

    plan_.batch_size = batch_size;
    for (const auto& s : streams_) plan_.class_sizes.push_back(s.items.size());
    plan_.per_batch.assign(classes, batch_size / classes);

    const auto [min_it, max_it] =
        std::minmax_element(plan_.class_sizes.begin(), plan_.class_sizes.end());
    const std::size_t minority = static_cast<std::size_t>(min_it - plan_.class_sizes.begin());
    std::size_t majority = static_cast<std::size_t>(max_it - plan_.class_sizes.begin());
    if (majority == minority) majority = minority == 0 ? 1 : 0;
    if (classes == 2) {
      plan_.per_batch[minority] = (batch_size + 1) / 2;
      plan_.per_batch[majority] = batch_size / 2;
    }
    plan_.steps_per_epoch = steps_per_epoch_rule(
        plan_.class_sizes[majority], plan_.class_sizes[minority], plan_.per_batch[majority],
        plan_.per_batch[minority]);

    for (auto& s : streams_) reshuffle(s);
  }

  const BatchPlan& plan() const noexcept { return plan_; }
  std::size_t steps_per_epoch() const noexcept { return plan_.steps_per_epoch; }

  /// Next batch of dataset indices, classes interleaved round-robin.
  std::vector<std::size_t> next_batch() {
    const std::size_t classes = streams_.size();
    std::vector<std::size_t> quota = plan_.per_batch;
    if (classes > 2) {
      const std::size_t extra = plan_.batch_size % classes;
      for (std::size_t k = 0; k < extra; ++k) ++quota[(rotation_ + k) % classes];
      rotation_ = (rotation_ + extra) % classes;
    }
    std::vector<std::size_t> batch;
    batch.reserve(plan_.batch_size);
    for (bool any = true; any;) {
      any = false;
      for (std::size_t c = 0; c < classes; ++c) {
        if (quota[c] == 0) continue;
        --quota[c];
        batch.push_back(draw(streams_[c]));
        any = true;
      }
    }
    return batch;
  }

  std::vector<std::vector<std::size_t>> epoch() {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(plan_.steps_per_epoch);
    for (std::size_t s = 0; s < plan_.steps_per_epoch; ++s) out.push_back(next_batch());
    return out;
  }

 private:
  struct Stream {
    std::vector<std::size_t> items;
    std::size_t cursor = 0;
  };

  void reshuffle(Stream& s) {
    rng_.shuffle(std::span<std::size_t>(s.items));
    s.cursor = 0;
  }

  std::size_t draw(Stream& s) {
    if (s.cursor == s.items.size()) reshuffle(s);
    return s.items[s.cursor++];
  }

  Rng rng_;
  BatchPlan plan_;
  std::vector<Stream> streams_;
  std::size_t rotation_ = 0;
};

inline BalancedBatcher balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                        std::uint64_t seed) {
  return BalancedBatcher(labels, batch_size, seed);
}

}  // namespace seft
