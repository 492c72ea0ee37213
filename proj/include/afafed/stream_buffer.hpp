#pragma once

#include "afafed/types.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace afafed {

enum class AdmitOutcome { kStored, kStoredAfterEvict };
enum class EvictOutcome { kEvicted, kKept };

/// Finite per-coworker stream buffer.
///
/// Admission (access control) always stores the newcomer and, when full,
/// drops the oldest entry first, so the content is always the newest
/// `capacity` arrivals. The buffer control step removes the oldest entry
/// only while more than `minibatch_size` entries are stored; once the buffer
/// has been warm it therefore never falls below one mini-batch.
class StreamBuffer {
 public:
  struct Entry {
    std::uint64_t arrival_index;
    TrainingExample example;
  };

  StreamBuffer(std::size_t capacity, std::size_t minibatch_size);

  AdmitOutcome admit(TrainingExample example, std::uint64_t arrival_index);
  EvictOutcome evict_oldest_if_surplus();

  /// |MB| distinct entries drawn uniformly. std::nullopt while fewer than
  /// |MB| entries are stored (the caller stalls). The returned pointers stay
  /// valid until the next admit/evict.
  std::optional<std::vector<const TrainingExample*>> sample_minibatch(Rng& rng) const;

  bool warm() const { return entries_.size() >= minibatch_size_; }
  bool ever_warm() const { return ever_warm_; }
  std::size_t count() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t minibatch_size() const { return minibatch_size_; }
  const std::deque<Entry>& entries() const { return entries_; }

  std::uint64_t admitted() const { return admitted_; }
  std::uint64_t admission_evictions() const { return admission_evictions_; }
  std::uint64_t control_evictions() const { return control_evictions_; }

 private:
  std::size_t capacity_;
  std::size_t minibatch_size_;
  std::deque<Entry> entries_;
  bool ever_warm_ = false;
  std::uint64_t admitted_ = 0;
  std::uint64_t admission_evictions_ = 0;
  std::uint64_t control_evictions_ = 0;
};

}  // namespace afafed
