#include "afafed/stream_buffer.hpp"

#include <numeric>
#include <utility>

namespace afafed {

StreamBuffer::StreamBuffer(std::size_t capacity, std::size_t minibatch_size)
    : capacity_(capacity), minibatch_size_(minibatch_size) {
  if (capacity_ == 0) throw ConfigError("buffer capacity must be positive");
  if (minibatch_size_ == 0 || minibatch_size_ > capacity_)
    throw ConfigError("mini-batch size must lie in [1, buffer capacity]");
}

AdmitOutcome StreamBuffer::admit(TrainingExample example, std::uint64_t arrival_index) {
  AdmitOutcome outcome = AdmitOutcome::kStored;
  if (entries_.size() == capacity_) {
    entries_.pop_front();
    ++admission_evictions_;
    outcome = AdmitOutcome::kStoredAfterEvict;
  }
  entries_.push_back(Entry{arrival_index, std::move(example)});
  ++admitted_;
  if (warm()) ever_warm_ = true;
  return outcome;
}

EvictOutcome StreamBuffer::evict_oldest_if_surplus() {
  if (entries_.size() <= minibatch_size_) return EvictOutcome::kKept;
  entries_.pop_front();
  ++control_evictions_;
  return EvictOutcome::kEvicted;
}

std::optional<std::vector<const TrainingExample*>> StreamBuffer::sample_minibatch(
    Rng& rng) const {
  if (!warm()) return std::nullopt;
  // Partial Fisher-Yates over entry indices.
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<const TrainingExample*> batch;
  batch.reserve(minibatch_size_);
  for (std::size_t i = 0; i < minibatch_size_; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    batch.push_back(&entries_[idx[i]].example);
  }
  return batch;
}

}  // namespace afafed
