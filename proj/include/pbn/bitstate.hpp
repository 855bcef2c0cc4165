#pragma once

#include <cassert>
#include <cstdint>
#include <utility>
#include <vector>

namespace pbn {

// Packed network state: bit i of word i/64 holds the value of node i.
// Bits above the significant width are kept at zero.
class state {
public:
  state() = default;

  // One slack word beyond the significant width, so bit index nbits is
  // always readable (and zero): steppers use it as a padding slot in
  // fixed-width gather lists.
  explicit state(std::uint32_t nbits) : words_(nbits / 64 + 1, 0), nbits_(nbits) {}

  static state from_uint(std::uint64_t v, std::uint32_t nbits) {
    assert(nbits <= 64);
    state s(nbits);
    if (nbits > 0) s.words_[0] = nbits == 64 ? v : (v & ((1ULL << nbits) - 1));
    return s;
  }

  std::uint32_t size() const { return nbits_; }

  bool test(std::uint32_t i) const {
    assert(i <= nbits_);  // index nbits_ is the always-zero padding bit
    return (words_[i >> 6] >> (i & 63)) & 1;
  }

  void set(std::uint32_t i, bool v) {
    assert(i < nbits_);
    const std::uint64_t bit = 1ULL << (i & 63);
    if (v)
      words_[i >> 6] |= bit;
    else
      words_[i >> 6] &= ~bit;
  }

  void clear() {
    for (auto& w : words_) w = 0;
  }

  // XOR a chunk of up to 64 bits at the given bit offset. The caller
  // guarantees the chunk lies within the significant width.
  void xor_chunk(std::uint64_t c, std::uint32_t offset) {
    const std::uint32_t w = offset >> 6;
    const std::uint32_t b = offset & 63;
    words_[w] ^= c << b;
    if (b != 0) {
      const std::uint64_t hi = c >> (64 - b);
      if (hi != 0) words_[w + 1] ^= hi;
    }
  }

  // OR a chunk of up to 64 bits at the given bit offset (target bits zero).
  void or_chunk(std::uint64_t c, std::uint32_t offset) {
    const std::uint32_t w = offset >> 6;
    const std::uint32_t b = offset & 63;
    words_[w] |= c << b;
    if (b != 0) {
      const std::uint64_t hi = c >> (64 - b);
      if (hi != 0) words_[w + 1] |= hi;
    }
  }

  void xor_with(const state& other) {
    assert(other.nbits_ == nbits_);
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
  }

  void swap(state& other) noexcept {
    words_.swap(other.words_);
    std::swap(nbits_, other.nbits_);
  }

  std::uint64_t to_uint() const {
    assert(nbits_ <= 64);
    return words_.empty() ? 0 : words_[0];
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

  // Raw word access for hot loops that keep the pointers in registers.
  std::uint64_t* data() { return words_.data(); }
  const std::uint64_t* data() const { return words_.data(); }

  friend bool operator==(const state& a, const state& b) {
    return a.nbits_ == b.nbits_ && a.words_ == b.words_;
  }

private:
  std::vector<std::uint64_t> words_;
  std::uint32_t nbits_ = 0;
};

}  // namespace pbn
