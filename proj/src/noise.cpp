#include "specwave/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace specwave {

namespace detail {

namespace {

constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr std::uint32_t kMult0 = 0xD2511F53u;
constexpr std::uint32_t kMult1 = 0xCD9E8D57u;

inline void round_once(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kMult0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kMult1) * c[2];
  c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
       std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    round_once(counter, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

}  // namespace detail

Eigen::Vector2d NoiseStream::normal_pair(std::uint32_t mode, std::uint32_t step,
                                         std::uint32_t slot) const {
  if (mode >= (1u << 24)) throw std::invalid_argument("mode index exceeds 24 bits");
  if (slot >= (1u << 8)) throw std::invalid_argument("slot index exceeds 8 bits");
  const std::array<std::uint32_t, 4> counter = {mode | (slot << 24), step,
                                                std::uint32_t(stream_),
                                                std::uint32_t(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)};
  const auto words = detail::philox4x32(counter, key);
  const std::uint64_t a = std::uint64_t(words[0]) << 32 | words[1];
  const std::uint64_t b = std::uint64_t(words[2]) << 32 | words[3];
  // strictly interior uniforms, so the log below is finite
  const double u1 = double(a >> 11) * 0x1.0p-53 + 0x1.0p-54;
  const double u2 = double(b >> 11) * 0x1.0p-53 + 0x1.0p-54;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace specwave
