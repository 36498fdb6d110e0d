#ifndef OMNITREE_RNG_HPP
#define OMNITREE_RNG_HPP

// Counter-based random number generation (Philox4x32-10).
//
// Every random draw in this library is a pure function of
// (master seed, substream id, draw index). Substream ids are derived from a
// purpose tag plus stable identifiers such as a leaf's location code, so the
// same quantity is sampled identically no matter in which order -- or on how
// many threads -- the surrounding computation runs.

#include <array>
#include <cstdint>
#include <cstring>
#include <span>

namespace omnitree {

/// One 4x32 Philox block: 10 rounds, 128-bit counter, 64-bit key.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// Purpose tags separating the independent substream families.
enum class StreamPurpose : std::uint32_t {
  kSampleA = 1,  // Saltelli base matrix A
  kSampleB = 2,  // Saltelli base matrix B
  kFill = 3,     // data-vector fill sampling
  kEval = 4,     // error-evaluation sampling
  kMisc = 5,     // tests and utilities
};

/// FNV-1a accumulator used to fold purpose tags and location codes into a
/// 64-bit substream id.
class SubstreamKey {
 public:
  SubstreamKey() = default;
  explicit SubstreamKey(StreamPurpose purpose) { add_u32(std::uint32_t(purpose)); }

  SubstreamKey& add_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) mix_byte(std::uint8_t(v >> (8 * i)));
    return *this;
  }
  SubstreamKey& add_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) mix_byte(std::uint8_t(v >> (8 * i)));
    return *this;
  }
  SubstreamKey& add_bytes(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) mix_byte(b);
    return *this;
  }

  std::uint64_t value() const { return state_; }

 private:
  void mix_byte(std::uint8_t b) {
    state_ ^= b;
    state_ *= 0x100000001B3ull;
  }
  std::uint64_t state_ = 0xCBF29CE484222325ull;
};

/// Stream of uniform doubles in [0, 1), identified by (seed, substream).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t substream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        prefix_{std::uint32_t(substream), std::uint32_t(substream >> 32)} {}

  RandomStream(std::uint64_t seed, const SubstreamKey& substream)
      : RandomStream(seed, substream.value()) {}

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double() {
    const std::uint64_t bits = next_u64();
    return double(bits >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() {
    if (have_ == 0) refill();
    --have_;
    const std::uint64_t hi = buffer_[2 * have_];
    const std::uint64_t lo = buffer_[2 * have_ + 1];
    return (hi << 32) | lo;
  }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(index_), std::uint32_t(index_ >> 32), prefix_[0], prefix_[1]};
    buffer_ = Philox4x32::block(ctr, key_);
    ++index_;
    have_ = 2;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> prefix_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int have_ = 0;
};

}  // namespace omnitree

#endif  // OMNITREE_RNG_HPP
