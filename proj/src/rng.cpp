#include "erpo/rng.hpp"

#include <cmath>
#include <numbers>

namespace erpo {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

RandomStream RandomStream::derive(std::uint64_t seed, StreamTag tag,
                                  std::initializer_list<std::uint64_t> coords) {
  std::uint64_t key = mix64(seed + kGolden);
  key = mix64(key ^ mix64(static_cast<std::uint64_t>(tag) * kGolden));
  for (std::uint64_t c : coords) {
    key = mix64(key ^ mix64(c + 0x632be59bd9b4e019ULL));
  }
  return RandomStream(key);
}

RandomStream RandomStream::child(std::uint64_t index) const {
  return RandomStream(mix64(key_ ^ mix64(index + 0x2545f4914f6cdd1dULL)));
}

RandomStream::result_type RandomStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RandomStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  // Lemire's rejection keeps the result unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = (*this)();
    __extension__ using u128 = unsigned __int128;
    const u128 m = static_cast<u128>(x) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) {
      return static_cast<std::uint64_t>(m >> 64);
    }
  }
}

double RandomStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace erpo
