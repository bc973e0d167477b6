#pragma once

#include "ncl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ncl {

struct Sample {
  Vector x;
  ClassId label = 0;
  int task = 0;
};

/// Fixed-capacity replay memory filled by reservoir sampling (Algorithm R).
/// Capacity 0 is the memory-free mode: every offered item is discarded.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  /// Offers one item. The n-th offered item (0-based) is kept with probability
  /// capacity / (n + 1), replacing a uniformly chosen slot once the buffer is full.
  void insert(Sample item);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t seen_count() const { return seen_; }
  const std::vector<Sample>& entries() const { return entries_; }

  /// Writes `task,label,x0..x{D-1}` rows.
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::size_t capacity_;
  std::vector<Sample> entries_;
  std::uint64_t seen_ = 0;
  Rng rng_;
};

inline void reservoir_insert(ReplayBuffer& buf, Sample item) { buf.insert(std::move(item)); }

struct DrawnSample {
  const Sample* sample;
  bool is_buffer;
};

/// Mini-batch drawn uniformly from pool ∪ buffer entries, every item with equal
/// probability. Draws are without replacement when the union holds at least
/// `batch_size` items and with replacement otherwise.
std::vector<DrawnSample> sample_batch(const ReplayBuffer& buf, std::span<const Sample> current_pool,
                                      int batch_size, Rng& rng);

}  // namespace ncl
