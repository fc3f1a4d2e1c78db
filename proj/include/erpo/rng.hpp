#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace erpo {

/// Purpose tags keep sub-streams for different call sites disjoint.
enum class StreamTag : std::uint64_t {
  Rollout = 1,
  EpochShuffle,
  Minibatch,
  Taskset,
  Init,
  Refill,
  Sweep,
  Eval,
  Test,
};

/// Counter-based generator: the n-th output is a pure function of (key, n),
/// so a stream can be re-derived from its coordinates at any time.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key) : key_(key) {}

  /// Derives the stream for (seed, tag, coords...). Independent of call order.
  static RandomStream derive(std::uint64_t seed, StreamTag tag,
                             std::initializer_list<std::uint64_t> coords = {});

  /// Sub-stream keyed by this stream's key and `index`; ignores the counter.
  RandomStream child(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace erpo
