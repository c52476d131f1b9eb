#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bernrand {

/// Philox4x32-10 block function (Salmon et al., Random123). Maps a 128-bit
/// counter and a 64-bit key to 128 pseudo-random bits. Defined inline because
/// coin flipping in the rejection sampler is bound by it.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
           static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

/// Counter-based random stream.
///
/// The seed is the Philox key; the stream id occupies the upper half of the
/// counter and the lower half counts blocks. Two streams with the same
/// (seed, stream id) produce the same sequence on every platform, and
/// streams differing in either value never share a counter/key pair.
///
/// Satisfies UniformRandomBitGenerator so it can drive boost::random
/// distributions, which are portable across standard libraries.
class RngStream {
public:
  using result_type = std::uint32_t;

  /// Blocks reserved for each substream; substream(i) starts at i << 40.
  static constexpr unsigned kSubstreamShift = 40;
  static constexpr std::uint64_t kMaxSubstreams = std::uint64_t{1}
                                                  << (64 - kSubstreamShift);

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    if (pos_ == 4)
      refill();
    return buffer_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Unbiased integer in [0, bound) for 0 < bound <= 2^32 (Lemire's method).
  std::uint32_t below(std::uint64_t bound) noexcept;

  /// Independent stream sharing this stream's key and id but starting at a
  /// disjoint counter range. Used to split Monte Carlo work into blocks whose
  /// results do not depend on how blocks are scheduled across threads.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t block_counter() const noexcept { return counter_; }

private:
  void refill() noexcept {
    buffer_ = philox4x32({static_cast<std::uint32_t>(counter_),
                          static_cast<std::uint32_t>(counter_ >> 32),
                          static_cast<std::uint32_t>(stream_id_),
                          static_cast<std::uint32_t>(stream_id_ >> 32)},
                         {static_cast<std::uint32_t>(seed_),
                          static_cast<std::uint32_t>(seed_ >> 32)});
    ++counter_;
    pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned pos_ = 4;
};

} // namespace bernrand
