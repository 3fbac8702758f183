#pragma once

// Counter-based random numbers. A Philox4x32-10 generator is keyed by a
// 64-bit seed and addressed by a 64-bit stream id, so every replicate (or any
// other unit of work) draws from its own substream and results do not depend
// on execution order.

#include <array>
#include <cstdint>
#include <limits>

namespace hetwls {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept;

  // The raw 10-round bijection.
  static Block encrypt(Block counter, Key key) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  // Standard normal via Box-Muller.
  double normal() noexcept;
  // Uniform integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  void refill() noexcept;

  Key key_;
  std::uint64_t block_ = 0;
  std::uint64_t stream_;
  Block out_{};
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream id for (purpose, index): the purpose tag lives in the top 16 bits.
constexpr std::uint64_t make_stream(std::uint16_t purpose, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(purpose) << 48) ^ (index & 0x0000FFFFFFFFFFFFull);
}

}  // namespace hetwls
