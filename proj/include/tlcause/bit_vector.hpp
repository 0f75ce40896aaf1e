#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tlcause {

/// Fixed-length packed boolean sequence. Bits past size() are kept zero so
/// that count() and equality need no masking.
class BitVector {
public:
    BitVector() = default;

    explicit BitVector(std::size_t size, bool value = false)
        : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : 0) {
        trim();
    }

    template <typename Range>
    static BitVector from_range(const Range& values) {
        BitVector out(static_cast<std::size_t>(std::size(values)));
        std::size_t i = 0;
        for (const auto& v : values) {
            out.set(i++, static_cast<bool>(v));
        }
        return out;
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    [[nodiscard]] bool test(std::size_t i) const noexcept {
        return (words_[i >> 6] >> (i & 63)) & 1U;
    }

    void set(std::size_t i, bool value = true) noexcept {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (value) {
            words_[i >> 6] |= mask;
        } else {
            words_[i >> 6] &= ~mask;
        }
    }

    [[nodiscard]] std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) {
            n += static_cast<std::size_t>(std::popcount(w));
        }
        return n;
    }

    [[nodiscard]] bool any() const noexcept {
        for (auto w : words_) {
            if (w != 0) return true;
        }
        return false;
    }

    BitVector& operator&=(const BitVector& o) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    BitVector& operator|=(const BitVector& o) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }

    [[nodiscard]] BitVector operator~() const {
        BitVector out = *this;
        for (auto& w : out.words_) w = ~w;
        out.trim();
        return out;
    }

    friend BitVector operator&(BitVector a, const BitVector& b) { return a &= b; }
    friend BitVector operator|(BitVector a, const BitVector& b) { return a |= b; }
    friend bool operator==(const BitVector&, const BitVector&) = default;

    /// popcount(a & b) without materializing the intersection.
    [[nodiscard]] static std::size_t count_and(const BitVector& a, const BitVector& b) noexcept {
        std::size_t n = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            n += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i]));
        }
        return n;
    }

    [[nodiscard]] static std::size_t count_and(const BitVector& a, const BitVector& b,
                                               const BitVector& c) noexcept {
        std::size_t n = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            n += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i] & c.words_[i]));
        }
        return n;
    }

    /// Prefix counts: result[i] = number of set bits in [0, i).
    [[nodiscard]] std::vector<std::uint32_t> prefix_counts() const {
        std::vector<std::uint32_t> out(size_ + 1, 0);
        for (std::size_t i = 0; i < size_; ++i) {
            out[i + 1] = out[i] + (test(i) ? 1U : 0U);
        }
        return out;
    }

    [[nodiscard]] std::vector<bool> to_vector() const {
        std::vector<bool> out(size_);
        for (std::size_t i = 0; i < size_; ++i) out[i] = test(i);
        return out;
    }

private:
    void trim() noexcept {
        if (size_ % 64 != 0 && !words_.empty()) {
            words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
        }
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace tlcause
