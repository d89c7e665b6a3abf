#ifndef SUPERBUNCH_RNG_HPP
#define SUPERBUNCH_RNG_HPP

#include <array>
#include <cstdint>

namespace superbunch {

/// Philox4x32-10 counter-based generator.
///
/// A stream is fixed by a 64-bit key and the upper 64 bits of the counter;
/// the lower 64 bits count blocks within the stream. Streams keyed by
/// (seed, trajectory index) are independent of scheduling.
class Philox4x32 {
public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block round_function(Block ctr, Key key)
  {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream)
  {
  }

  std::uint32_t next_u32()
  {
    if (used_ == 4) {
      const Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
      buffer_ = round_function(ctr, key_);
      ++block_;
      used_ = 0;
    }
    return buffer_[used_++];
  }

  std::uint64_t next_u64()
  {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform double on (0, 1] with 53 random bits.
  double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // UniformRandomBitGenerator interface.
  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }
  result_type operator()() { return next_u32(); }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
};

} // namespace superbunch

#endif // SUPERBUNCH_RNG_HPP
