#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace nsqla
{

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A generator is identified by a 64-bit key (the experiment seed) and a
/// 64-bit stream id; the remaining 64 counter bits are consumed by the
/// stream. Streams with different ids never overlap, so replications can be
/// drawn in any order on any thread and still produce the same numbers.
class Philox4x32
{
public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)}
  {
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept
  {
    if (index_ == 4) {
      block_ = encrypt(counter_, key_);
      bump_counter();
      index_ = 0;
    }
    return block_[index_++];
  }

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> encrypt(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) noexcept
  {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
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

private:
  void bump_counter() noexcept
  {
    if (++counter_[0] == 0) {
      ++counter_[1];
    }
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
};

using Engine = Philox4x32;

/// Stream id for replication `rep` of the experiment cell `cell` (e.g. one n value).
constexpr std::uint64_t stream_id(std::uint64_t cell, std::uint64_t rep) noexcept
{
  return (cell << 40) ^ rep;
}

inline double standard_normal(Engine& rng)
{
  std::normal_distribution<double> dist;
  return dist(rng);
}

inline double uniform01(Engine& rng)
{
  return std::generate_canonical<double, std::numeric_limits<double>::digits>(rng);
}

}  // namespace nsqla
