#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace afafed {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ModelVector = Vector<double>;

/// One (feature, label) pair. `label_class` is the generator's class id and
/// only drives partitioning; the losses never read it.
template <typename Scalar>
struct Example {
  Vector<Scalar> x;
  Vector<Scalar> y;
  int label_class = 0;
};

using TrainingExample = Example<double>;

template <typename Scalar>
using Dataset = std::vector<Example<Scalar>>;

using Rng = std::mt19937_64;

/// Seed for an independent stream, derived from the master seed by a
/// counter-based split (splitmix64 finalizer over the stream coordinates).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Violation of the message protocol between coworkers and server.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericDivergence : public std::runtime_error {
 public:
  NumericDivergence(int coworker, double virtual_time, const std::string& what)
      : std::runtime_error(what), coworker_(coworker), time_(virtual_time) {}
  int coworker() const { return coworker_; }
  double virtual_time() const { return time_; }

 private:
  int coworker_;
  double time_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EngineInvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace afafed
