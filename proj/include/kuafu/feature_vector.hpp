#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "kuafu/error.hpp"

namespace kuafu {

// Fixed-length binary vector aligned to a feature catalog. Bits are packed
// into 64-bit words so Hamming distances and intersections stay cheap.
class FeatureVector {
public:
    FeatureVector() = default;

    explicit FeatureVector(std::size_t size)
        : size_(size), words_((size + 63) / 64, 0) {}

    static FeatureVector from_bits(const std::vector<int>& bits) {
        FeatureVector v(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] != 0) v.set(i, true);
        }
        return v;
    }

    std::size_t size() const { return size_; }

    bool get(std::size_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1ull;
    }

    void set(std::size_t i, bool value) {
        std::uint64_t mask = 1ull << (i & 63);
        if (value) {
            words_[i >> 6] |= mask;
        } else {
            words_[i >> 6] &= ~mask;
        }
    }

    void flip(std::size_t i) { words_[i >> 6] ^= 1ull << (i & 63); }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const FeatureVector& other) const {
        return size_ == other.size_ && words_ == other.words_;
    }
    bool operator!=(const FeatureVector& other) const { return !(*this == other); }

    friend std::size_t hamming_distance(const FeatureVector& a, const FeatureVector& b) {
        require_same_size(a, b);
        std::size_t d = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            d += static_cast<std::size_t>(std::popcount(a.words_[i] ^ b.words_[i]));
        }
        return d;
    }

    friend std::size_t intersection_count(const FeatureVector& a, const FeatureVector& b) {
        require_same_size(a, b);
        std::size_t n = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            n += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i]));
        }
        return n;
    }

    friend std::size_t union_count(const FeatureVector& a, const FeatureVector& b) {
        require_same_size(a, b);
        std::size_t n = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            n += static_cast<std::size_t>(std::popcount(a.words_[i] | b.words_[i]));
        }
        return n;
    }

private:
    static void require_same_size(const FeatureVector& a, const FeatureVector& b) {
        if (a.size_ != b.size_) {
            throw ValidationError("feature vector dimension mismatch: " +
                                  std::to_string(a.size_) + " vs " + std::to_string(b.size_));
        }
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace kuafu
