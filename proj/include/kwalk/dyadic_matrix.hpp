#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace kwalk::dyadic {

/// The n x n matrix A with A_ij = lg n - kappa(i, j), kappa the smallest
/// k >= 0 with floor((i-1)/2^k) == floor((j-1)/2^k). Equivalently the sum of
/// all-ones blocks over the dyadic intervals of sizes 1, 2, ..., n/2.
/// n must be a power of two, n >= 4. Indices are 1-based.
std::int64_t entry(std::uint64_t n, std::uint64_t i, std::uint64_t j);

/// n lg n.
std::int64_t trace(std::uint64_t n);

/// lg n for a power of two n >= 4; throws otherwise.
unsigned log2_order(std::uint64_t n);

/// x^T A x as the sum over levels r = 0..lg n - 1 of squared dyadic block
/// sums. O(n lg n); never forms A.
double quadratic_form(std::uint64_t n, std::span<const double> x);

/// Row-major dense A (n <= 4096).
std::vector<double> dense(std::uint64_t n);

/// Dense A rebuilt from its dyadic all-ones blocks (independent of entry()).
std::vector<std::int64_t> dense_from_blocks(std::uint64_t n);

/// x^T A x >= (x_1 + ... + x_i)^2 / lg n - 1e-9.
bool prefix_lower_bound_check(std::uint64_t n, std::span<const double> x, std::uint64_t i);

/// min { w^T A w : w_1 + ... + w_i = 1 } = 1 / <v^i, A^{-1} v^i>, via a
/// Cholesky solve. Throws NumericalError if A is not positive definite.
double constrained_min(std::uint64_t n, std::uint64_t i);

/// <v^i, A^{-1} v^i> for every i = 1..n from one factorization
/// (2-D prefix sums of A^{-1}).
std::vector<double> prefix_inverse_forms(std::uint64_t n);

/// Tr(A) * max_i <v^i, A^{-1} v^i>.
double corollary_ratio(std::uint64_t n);

/// Writes dense A (n <= 64) as CSV rows.
void write_dense_csv(std::uint64_t n, std::ostream& out);

inline constexpr std::uint64_t kMaxDenseN = 4096;

}  // namespace kwalk::dyadic
