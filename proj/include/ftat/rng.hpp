#pragma once

#include <array>
#include <cstdint>

namespace ftat {

/// Philox4x32-10 counter-based generator.
///
/// A (seed, stream) pair selects an independent substream; draws within a
/// substream are indexed by a 64-bit counter, so results do not depend on
/// how work is scheduled.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream);

  /// Substream derived from this generator's key and `stream`.
  Philox substream(std::uint64_t stream) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1).
  double uniform_open();
  double normal();
  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace ftat
