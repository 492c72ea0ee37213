#include "afafed/stream_buffer.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace afafed;

namespace {

TrainingExample tagged(double v) {
  TrainingExample e;
  e.x = ModelVector::Constant(1, v);
  e.y = ModelVector::Zero(1);
  return e;
}

}  // namespace

TEST(StreamBuffer, RejectsBadSizes) {
  EXPECT_THROW(StreamBuffer(0, 0), ConfigError);
  EXPECT_THROW(StreamBuffer(4, 5), ConfigError);
  EXPECT_THROW(StreamBuffer(4, 0), ConfigError);
}

TEST(StreamBuffer, NotReadyUntilOneMinibatch) {
  StreamBuffer b(8, 3);
  Rng rng(1);
  b.admit(tagged(0), 0);
  b.admit(tagged(1), 1);
  EXPECT_FALSE(b.sample_minibatch(rng).has_value());
  EXPECT_FALSE(b.ever_warm());
  b.admit(tagged(2), 2);
  EXPECT_TRUE(b.sample_minibatch(rng).has_value());
  EXPECT_TRUE(b.ever_warm());
}

TEST(StreamBuffer, AdmissionKeepsNewest) {
  StreamBuffer b(3, 1);
  for (int i = 0; i < 5; ++i) b.admit(tagged(i), i);
  ASSERT_EQ(b.count(), 3u);
  EXPECT_EQ(b.entries().front().arrival_index, 2u);
  EXPECT_EQ(b.entries().back().arrival_index, 4u);
  EXPECT_EQ(b.admission_evictions(), 2u);
}

TEST(StreamBuffer, ControlNeverDropsBelowMinibatch) {
  StreamBuffer b(10, 4);
  for (int i = 0; i < 10; ++i) b.admit(tagged(i), i);
  for (int i = 0; i < 20; ++i) b.evict_oldest_if_surplus();
  EXPECT_EQ(b.count(), 4u);
  EXPECT_EQ(b.entries().front().arrival_index, 6u);
  EXPECT_EQ(b.evict_oldest_if_surplus(), EvictOutcome::kKept);
}

TEST(StreamBuffer, MinibatchDrawsDistinctEntries) {
  StreamBuffer b(16, 8);
  for (int i = 0; i < 16; ++i) b.admit(tagged(i), i);
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto batch = b.sample_minibatch(rng);
    ASSERT_TRUE(batch);
    std::set<double> seen;
    for (const auto* e : *batch) seen.insert(e->x(0));
    EXPECT_EQ(seen.size(), 8u);
  }
}

TEST(StreamBuffer, MinibatchIsUniform) {
  StreamBuffer b(10, 2);
  for (int i = 0; i < 10; ++i) b.admit(tagged(i), i);
  Rng rng(21);
  std::vector<int> hits(10, 0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto batch = b.sample_minibatch(rng);
    for (const auto* e : *batch) ++hits[static_cast<int>(e->x(0))];
  }
  // each entry is included with probability 2/10
  const double p = 0.2, sd = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_NEAR(h, draws * p, 4 * sd);
}

TEST(StreamBuffer, StallFreeAfterWarmupUnderRandomSchedules) {
  Rng rng(33);
  std::bernoulli_distribution arrive(0.3);
  StreamBuffer b(6, 3);
  std::uint64_t idx = 0;
  int stalls_after = 0;
  for (int step = 0; step < 20000; ++step) {
    if (arrive(rng)) b.admit(tagged(double(idx)), idx++);
    if (!b.sample_minibatch(rng)) {
      if (b.ever_warm()) ++stalls_after;
      continue;
    }
    b.evict_oldest_if_surplus();
    ASSERT_LE(b.count(), b.capacity());
  }
  EXPECT_EQ(stalls_after, 0);
}
