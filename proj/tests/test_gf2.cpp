#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>

#include "kwalk/errors.hpp"
#include "kwalk/gf2.hpp"
#include "kwalk/rng.hpp"

using kwalk::BinaryField;
using u128 = unsigned __int128;

namespace {

// Reference GF(2)[x] arithmetic on 128-bit words, independent of the library.
u128 poly_mulmod(u128 a, u128 b, u128 f, unsigned deg) {
    u128 result = 0;
    while (b) {
        if (b & 1) result ^= a;
        b >>= 1;
        a <<= 1;
        if ((a >> deg) & 1) a ^= f;
    }
    return result;
}

int degree(u128 p) {
    int d = -1;
    for (int b = 0; b < 128; ++b) {
        if ((p >> b) & 1) d = b;
    }
    return d;
}

u128 poly_mod(u128 a, u128 b) {
    const int db = degree(b);
    for (int da = degree(a); da >= db; da = degree(a)) a ^= b << (da - db);
    return a;
}

u128 poly_gcd(u128 a, u128 b) {
    while (b) {
        const u128 r = poly_mod(a, b);
        a = b;
        b = r;
    }
    return a;
}

// Rabin's test for degree w = 2^j: x^(2^w) = x mod f and gcd(x^(2^(w/2)) - x, f) = 1.
bool irreducible(unsigned w, std::uint64_t tail) {
    const u128 f = (static_cast<u128>(1) << w) | tail;
    u128 power = 2;  // x
    u128 half = 0;
    for (unsigned i = 1; i <= w; ++i) {
        power = poly_mulmod(power, power, f, w);
        if (i == w / 2) half = power;
    }
    if (power != 2) return false;
    return w == 1 || degree(poly_gcd(f, half ^ 2)) == 0;
}

std::uint64_t schoolbook_mul(const BinaryField& field, std::uint64_t a, std::uint64_t b) {
    const u128 f = (static_cast<u128>(1) << field.width()) | field.modulus_tail();
    return static_cast<std::uint64_t>(poly_mulmod(a, b, f, field.width()));
}

}  // namespace

TEST_CASE("every built-in modulus is irreducible") {
    for (unsigned w : kwalk::supported_field_widths()) {
        CAPTURE(w);
        CHECK(irreducible(w, BinaryField(w).modulus_tail()));
    }
}

TEST_CASE("reference irreducibility test rejects reducible polynomials") {
    CHECK_FALSE(irreducible(4, 0x1));   // x^4 + 1 = (x + 1)^4
    CHECK_FALSE(irreducible(8, 0x0));   // x^8
    CHECK(irreducible(2, 0x3));         // x^2 + x + 1
}

TEST_CASE("documented moduli") {
    CHECK(BinaryField(2).modulus_tail() == 0x3);
    CHECK(BinaryField(4).modulus_tail() == 0x3);
    CHECK(BinaryField(8).modulus_tail() == 0x1B);
    CHECK(BinaryField(16).modulus_tail() == 0x2B);
    CHECK(BinaryField(32).modulus_tail() == 0x8D);
    CHECK(BinaryField(64).modulus_tail() == 0x1B);
}

TEST_CASE("unsupported widths throw") {
    CHECK_THROWS_AS(BinaryField(3), kwalk::InvalidParameter);
    CHECK_THROWS_AS(BinaryField(128), kwalk::InvalidParameter);
}

TEST_CASE("for_domain picks the smallest field") {
    CHECK(BinaryField::for_domain(4).width() == 2);
    CHECK(BinaryField::for_domain(5).width() == 4);
    CHECK(BinaryField::for_domain(16).width() == 4);
    CHECK(BinaryField::for_domain(17).width() == 8);
    CHECK(BinaryField::for_domain(1ull << 40).width() == 64);
}

TEST_CASE("clmul64 matches shift-and-xor") {
    kwalk::CounterRng rng(1);
    for (int t = 0; t < 2000; ++t) {
        const std::uint64_t a = rng(), b = rng();
        u128 expect = 0;
        for (int bit = 0; bit < 64; ++bit) {
            if ((b >> bit) & 1) expect ^= static_cast<u128>(a) << bit;
        }
        CHECK(kwalk::clmul64(a, b) == expect);
    }
}

TEST_CASE("multiplication agrees with reference reduction") {
    kwalk::CounterRng rng(2);
    for (unsigned w : kwalk::supported_field_widths()) {
        const BinaryField field(w);
        for (int t = 0; t < 500; ++t) {
            const std::uint64_t a = rng() & field.mask(), b = rng() & field.mask();
            CHECK(field.mul(a, b) == schoolbook_mul(field, a, b));
        }
    }
}

TEST_CASE("GF(16) is a field: exhaustive inverses and the multiplicative group order") {
    const BinaryField field(4);
    for (std::uint64_t a = 1; a < 16; ++a) {
        int inverses = 0;
        for (std::uint64_t b = 1; b < 16; ++b) inverses += field.mul(a, b) == 1;
        CHECK(inverses == 1);
        CHECK(field.pow(a, 15) == 1);
    }
}

TEST_CASE("field axioms on random elements") {
    kwalk::CounterRng rng(3);
    for (unsigned w : kwalk::supported_field_widths()) {
        const BinaryField field(w);
        for (int t = 0; t < 300; ++t) {
            const std::uint64_t a = rng() & field.mask(), b = rng() & field.mask(), c = rng() & field.mask();
            CHECK(field.mul(a, b) == field.mul(b, a));
            CHECK(field.mul(field.mul(a, b), c) == field.mul(a, field.mul(b, c)));
            CHECK(field.mul(a, field.add(b, c)) == field.add(field.mul(a, b), field.mul(a, c)));
            CHECK(field.mul(a, 1) == a);
            CHECK(field.mul(a, b) <= field.mask());
        }
    }
}

TEST_CASE("x^(2^w) = x in every field (Frobenius)") {
    kwalk::CounterRng rng(4);
    for (unsigned w : kwalk::supported_field_widths()) {
        const BinaryField field(w);
        for (int t = 0; t < 20; ++t) {
            std::uint64_t a = rng() & field.mask();
            const std::uint64_t start = a;
            for (unsigned i = 0; i < w; ++i) a = field.mul(a, a);
            CHECK(a == start);
        }
    }
}

TEST_CASE("Horner evaluation equals the power sum") {
    kwalk::CounterRng rng(5);
    for (unsigned w : kwalk::supported_field_widths()) {
        const BinaryField field(w);
        for (int t = 0; t < 100; ++t) {
            std::vector<std::uint64_t> c(5);
            for (auto& v : c) v = rng() & field.mask();
            const std::uint64_t x = rng() & field.mask();
            std::uint64_t expect = 0;
            for (std::size_t j = 0; j < c.size(); ++j) expect ^= field.mul(c[j], field.pow(x, j));
            CHECK(field.evaluate(c, x) == expect);
        }
    }
}

TEST_CASE("lsb_row gives the low bit of a product as a parity") {
    kwalk::CounterRng rng(6);
    for (unsigned w : kwalk::supported_field_widths()) {
        const BinaryField field(w);
        for (int t = 0; t < 200; ++t) {
            const std::uint64_t c = rng() & field.mask(), y = rng() & field.mask();
            CHECK(static_cast<std::uint64_t>(std::popcount(c & field.lsb_row(y)) & 1) == (field.mul(c, y) & 1));
        }
    }
}
