#include "atr/numkit/random_stream.hpp"

#include <cmath>
#include <numbers>

namespace atr::numkit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(splitmix64(splitmix64(seed) ^ (stream_id * 0xD1B54A32D192ED03ULL))) {}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t x = key_ ^ (counter_ * 0x9E3779B97F4A7C15ULL);
  ++counter_;
  return splitmix64(splitmix64(x) + key_);
}

double RandomStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % bound;
}

RandomStream RandomStream::split(std::uint64_t child_id) const {
  return RandomStream(splitmix64(key_ ^ 0x6A09E667F3BCC909ULL), child_id + 1);
}

}  // namespace atr::numkit
