#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdm/rng.hpp"

namespace sdm {

// Fixed-length binary vector packed into 64-bit words. n need not be a
// multiple of 64; the tail word is kept masked so popcount kernels can run
// over whole words.
class BitVector {
public:
    BitVector() = default;

    explicit BitVector(int n) : n_(n), words_((n + 63) / 64, 0) {
        if (n < 1) throw std::invalid_argument("BitVector: n must be >= 1");
    }

    static BitVector random(int n, Rng& rng) {
        BitVector v(n);
        for (auto& w : v.words_) w = rng.next_u64();
        v.mask_tail();
        return v;
    }

    static BitVector zeros(int n) { return BitVector(n); }

    static BitVector ones(int n) {
        BitVector v(n);
        for (auto& w : v.words_) w = ~0ULL;
        v.mask_tail();
        return v;
    }

    int size() const { return n_; }

    bool get(int i) const { return (words_[i >> 6] >> (i & 63)) & 1; }

    void set(int i, bool b) {
        const std::uint64_t m = 1ULL << (i & 63);
        if (b)
            words_[i >> 6] |= m;
        else
            words_[i >> 6] &= ~m;
    }

    void flip(int i) { words_[i >> 6] ^= 1ULL << (i & 63); }

    int popcount() const {
        int c = 0;
        for (auto w : words_) c += std::popcount(w);
        return c;
    }

    BitVector complemented() const {
        BitVector v = *this;
        for (auto& w : v.words_) w = ~w;
        v.mask_tail();
        return v;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const BitVector& o) const { return n_ == o.n_ && words_ == o.words_; }
    bool operator!=(const BitVector& o) const { return !(*this == o); }

private:
    void mask_tail() {
        const int rem = n_ & 63;
        if (rem != 0) words_.back() &= (~0ULL) >> (64 - rem);
    }

    int n_ = 0;
    std::vector<std::uint64_t> words_;
};

inline int hamming_distance(const BitVector& a, const BitVector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("hamming_distance: dimension mismatch");
    int d = 0;
    const auto& wa = a.words();
    const auto& wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += std::popcount(wa[i] ^ wb[i]);
    return d;
}

// Flips exactly k distinct positions chosen uniformly without replacement, so
// the result is at Hamming distance exactly k from v.
inline BitVector perturb_binary(const BitVector& v, int k, Rng& rng) {
    const int n = v.size();
    if (k < 0 || k > n) throw std::invalid_argument("perturb_binary: k out of [0, n]");
    BitVector out = v;
    if (k == 0) return out;
    if (k == n) return v.complemented();
    // Floyd's algorithm: k distinct indices from [0, n).
    std::vector<std::uint8_t> taken(n, 0);
    for (int j = n - k; j < n; ++j) {
        int t = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(j) + 1));
        if (taken[t]) t = j;
        taken[t] = 1;
        out.flip(t);
    }
    return out;
}

}  // namespace sdm
