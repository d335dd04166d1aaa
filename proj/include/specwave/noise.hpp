#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace specwave {

namespace detail {

// Philox4x32-10 counter-based generator.  Pure function of (counter, key), so
// draws are addressable: no generator state to carry, split, or synchronize.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

}  // namespace detail

// Addressable Gaussian noise for one Monte Carlo sample.  A draw is keyed by
// (seed, stream, mode, step, slot); equal keys give equal values in any
// process, thread, or evaluation order.  Distinct streams index independent
// samples, slots separate independent uses within one (mode, step) cell.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Two independent standard normals.  mode < 2^24, slot < 2^8.
  Eigen::Vector2d normal_pair(std::uint32_t mode, std::uint32_t step,
                              std::uint32_t slot = 0) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace specwave
