#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <vector>

namespace bcp {

// A +1/-1 site sequence packed one site per bit (bit set <=> site is +1).
// Packing matters: empirical correlations between long sequences reduce to
// XOR + popcount over 64-bit words.
class PackedSeq {
 public:
  PackedSeq() = default;
  explicit PackedSeq(std::int64_t k) : k_(k), words_((k + 63) / 64, 0) {}

  std::int64_t size() const { return k_; }

  int get(std::int64_t t) const {
    return (words_[t >> 6] >> (t & 63)) & 1 ? +1 : -1;
  }

  // Sites default to -1; set_plus flips site t to +1.
  void set_plus(std::int64_t t) { words_[t >> 6] |= 1ull << (t & 63); }

  void set(std::int64_t t, int value) {
    if (value > 0) set_plus(t);
  }

  // Sum over sites of the product of paired entries, in {-k, ..., +k}.
  std::int64_t corr_sum(const PackedSeq& other) const {
    assert(k_ == other.k_);
    std::int64_t mismatches = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      mismatches += std::popcount(words_[i] ^ other.words_[i]);
    // Trailing bits beyond k_ are zero in both operands, so they cancel.
    return k_ - 2 * mismatches;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  std::int64_t k_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace bcp
