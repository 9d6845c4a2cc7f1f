#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kwalk {

/// The binary field GF(2^w) for w in {2, 4, 8, 16, 32, 64}, elements stored
/// as bit vectors of polynomial coefficients (bit b = coefficient of x^b).
/// Multiplication is carry-less polynomial multiplication followed by
/// reduction modulo a fixed irreducible polynomial of degree w.
class BinaryField {
public:
    explicit BinaryField(unsigned width);

    /// Smallest supported width with 2^w >= size.
    static BinaryField for_domain(std::uint64_t size);

    unsigned width() const noexcept { return width_; }
    /// Low w bits of the modulus; the x^w term is implicit.
    std::uint64_t modulus_tail() const noexcept { return tail_; }
    /// 2^w - 1, i.e. the mask of valid element bits.
    std::uint64_t mask() const noexcept { return mask_; }
    /// Number of field elements as a 128-bit value (2^64 for w = 64).
    unsigned __int128 order() const noexcept { return static_cast<unsigned __int128>(1) << width_; }

    std::uint64_t add(std::uint64_t a, std::uint64_t b) const noexcept { return a ^ b; }
    std::uint64_t mul(std::uint64_t a, std::uint64_t b) const noexcept;
    std::uint64_t pow(std::uint64_t a, std::uint64_t e) const noexcept;

    /// Horner evaluation of sum_j coefficients[j] * x^j.
    std::uint64_t evaluate(std::span<const std::uint64_t> coefficients, std::uint64_t x) const noexcept;

    /// Mask M with lsb(c * y) = parity(c & M) for every element c. The map
    /// c -> c * y is GF(2)-linear, so its bit-0 row is a fixed mask.
    std::uint64_t lsb_row(std::uint64_t y) const noexcept;

private:
    unsigned width_;
    std::uint64_t tail_;
    std::uint64_t mask_;
};

/// Full 128-bit carry-less product of two 64-bit polynomials.
unsigned __int128 clmul64(std::uint64_t a, std::uint64_t b) noexcept;

/// Widths with a built-in modulus.
std::span<const unsigned> supported_field_widths() noexcept;

}  // namespace kwalk
