#pragma once

#include <cstdint>

namespace atr::numkit {

// Counter-based generator: draw i of stream (seed, id) is a pure function of
// (seed, id, i), so results do not depend on platform or on how sessions are
// scheduled. Child streams obtained with split() never overlap their parent.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Standard normal via Box-Muller (two uniform draws per value).
  double normal();
  // Uniform integer on [0, bound).
  std::uint64_t below(std::uint64_t bound);

  RandomStream split(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace atr::numkit
