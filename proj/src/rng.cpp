#include "bernrand/rng.hpp"

#include "bernrand/error.hpp"

#include <string>

namespace bernrand {

std::uint32_t RngStream::below(std::uint64_t bound) noexcept {
  const auto n = static_cast<std::uint32_t>(bound);
  if (bound > max())
    return (*this)();
  std::uint64_t m = std::uint64_t{(*this)()} * n;
  auto low = static_cast<std::uint32_t>(m);
  if (low < n) {
    const std::uint32_t threshold = (0u - n) % n;
    while (low < threshold) {
      m = std::uint64_t{(*this)()} * n;
      low = static_cast<std::uint32_t>(m);
    }
  }
  return static_cast<std::uint32_t>(m >> 32);
}

RngStream RngStream::substream(std::uint64_t index) const {
  ensure(index < kMaxSubstreams, ErrorCode::OutOfRange,
          "substream index " + std::to_string(index) + " exceeds 2^24");
  RngStream out(seed_, stream_id_);
  out.counter_ = index << kSubstreamShift;
  return out;
}

} // namespace bernrand
