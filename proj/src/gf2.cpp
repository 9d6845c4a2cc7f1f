#include "kwalk/gf2.hpp"

#include <array>
#include <string>

#include "kwalk/errors.hpp"

namespace kwalk {
namespace {

struct ModulusEntry {
    unsigned width;
    std::uint64_t tail;  // modulus without the leading x^w term
};

// Low-weight irreducible polynomials (trinomials/pentanomials) from the
// standard tables.
constexpr std::array<ModulusEntry, 6> kModuli{{
    {2, 0x3},          // x^2 + x + 1
    {4, 0x3},          // x^4 + x + 1
    {8, 0x1B},         // x^8 + x^4 + x^3 + x + 1
    {16, 0x2B},        // x^16 + x^5 + x^3 + x + 1
    {32, 0x8D},        // x^32 + x^7 + x^3 + x^2 + 1
    {64, 0x1B},        // x^64 + x^4 + x^3 + x + 1
}};

constexpr std::array<unsigned, 6> kWidths{2, 4, 8, 16, 32, 64};

}  // namespace

unsigned __int128 clmul64(std::uint64_t a, std::uint64_t b) noexcept {
    unsigned __int128 acc = 0;
    unsigned __int128 shifted = a;
    while (b != 0) {
        if (b & 1) acc ^= shifted;
        shifted <<= 1;
        b >>= 1;
    }
    return acc;
}

std::span<const unsigned> supported_field_widths() noexcept { return kWidths; }

BinaryField::BinaryField(unsigned width) : width_(width), tail_(0), mask_(0) {
    bool found = false;
    for (const auto& entry : kModuli) {
        if (entry.width == width) {
            tail_ = entry.tail;
            found = true;
        }
    }
    if (!found) throw InvalidParameter("unsupported field width " + std::to_string(width));
    mask_ = width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

BinaryField BinaryField::for_domain(std::uint64_t size) {
    for (unsigned w : kWidths) {
        if (w == 64 || (std::uint64_t{1} << w) >= size) return BinaryField(w);
    }
    return BinaryField(64);
}

std::uint64_t BinaryField::mul(std::uint64_t a, std::uint64_t b) const noexcept {
    unsigned __int128 product = clmul64(a & mask_, b & mask_);
    // Fold the bits above degree w-1 back down: x^w == tail (mod modulus).
    // Each fold lowers the top degree by at least w - deg(tail) >= 1, so loop
    // until nothing remains above w-1.
    const unsigned __int128 low_mask = static_cast<unsigned __int128>(mask_);
    while ((product >> width_) != 0) {
        const auto high = static_cast<std::uint64_t>(product >> width_);
        product = (product & low_mask) ^ clmul64(high, tail_);
    }
    return static_cast<std::uint64_t>(product);
}

std::uint64_t BinaryField::pow(std::uint64_t a, std::uint64_t e) const noexcept {
    std::uint64_t result = 1;
    std::uint64_t base = a & mask_;
    while (e != 0) {
        if (e & 1) result = mul(result, base);
        base = mul(base, base);
        e >>= 1;
    }
    return result;
}

std::uint64_t BinaryField::evaluate(std::span<const std::uint64_t> coefficients, std::uint64_t x) const noexcept {
    std::uint64_t acc = 0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
        acc = mul(acc, x) ^ (*it & mask_);
    }
    return acc;
}

std::uint64_t BinaryField::lsb_row(std::uint64_t y) const noexcept {
    std::uint64_t row = 0;
    for (unsigned b = 0; b < width_; ++b) {
        if (mul(std::uint64_t{1} << b, y) & 1) row |= std::uint64_t{1} << b;
    }
    return row;
}

}  // namespace kwalk
