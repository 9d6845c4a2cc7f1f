#include "kwalk/dyadic_matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "kwalk/errors.hpp"

namespace kwalk::dyadic {

unsigned log2_order(std::uint64_t n) {
    require(std::has_single_bit(n) && n >= 4,
            "dyadic matrix order must be a power of two >= 4 (got " + std::to_string(n) + ")");
    return static_cast<unsigned>(std::countr_zero(n));
}

std::int64_t entry(std::uint64_t n, std::uint64_t i, std::uint64_t j) {
    const unsigned lg = log2_order(n);
    require(i >= 1 && i <= n && j >= 1 && j <= n, "dyadic matrix index out of range");
    const auto kappa = static_cast<unsigned>(std::bit_width((i - 1) ^ (j - 1)));
    return static_cast<std::int64_t>(lg) - static_cast<std::int64_t>(kappa);
}

std::int64_t trace(std::uint64_t n) { return static_cast<std::int64_t>(n) * log2_order(n); }

double quadratic_form(std::uint64_t n, std::span<const double> x) {
    const unsigned lg = log2_order(n);
    require(x.size() == n, "quadratic_form: vector length must equal n");
    std::vector<double> level(x.begin(), x.end());
    double total = 0.0;
    for (unsigned r = 0; r < lg; ++r) {
        for (double s : level) total += s * s;
        // Pair up adjacent blocks for the next level.
        for (std::size_t b = 0; b < level.size() / 2; ++b) level[b] = level[2 * b] + level[2 * b + 1];
        level.resize(level.size() / 2);
    }
    return total;
}

std::vector<double> dense(std::uint64_t n) {
    log2_order(n);
    require(n <= kMaxDenseN, "dense dyadic matrix limited to n <= 4096");
    std::vector<double> a(n * n);
    for (std::uint64_t i = 1; i <= n; ++i) {
        for (std::uint64_t j = 1; j <= n; ++j) a[(i - 1) * n + (j - 1)] = static_cast<double>(entry(n, i, j));
    }
    return a;
}

std::vector<std::int64_t> dense_from_blocks(std::uint64_t n) {
    const unsigned lg = log2_order(n);
    require(n <= 1024, "block reconstruction limited to n <= 1024");
    std::vector<std::int64_t> a(n * n, 0);
    for (unsigned r = 0; r < lg; ++r) {
        const std::uint64_t size = std::uint64_t{1} << r;
        for (std::uint64_t s = 1; s <= n / size; ++s) {
            const std::uint64_t first = size * (s - 1);
            for (std::uint64_t k = first; k < first + size; ++k) {
                for (std::uint64_t l = first; l < first + size; ++l) a[k * n + l] += 1;
            }
        }
    }
    return a;
}

bool prefix_lower_bound_check(std::uint64_t n, std::span<const double> x, std::uint64_t i) {
    const unsigned lg = log2_order(n);
    require(i >= 1 && i <= n, "prefix index out of range");
    double prefix = 0.0;
    for (std::uint64_t k = 0; k < i; ++k) prefix += x[k];
    return quadratic_form(n, x) >= prefix * prefix / static_cast<double>(lg) - 1e-9;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor(std::uint64_t n) {
    require(n <= kMaxDenseN, "dense solve limited to n <= 4096");
    const auto size = static_cast<Eigen::Index>(n);
    const std::vector<double> a = dense(n);
    Eigen::MatrixXd m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data(), size, size);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("dyadic matrix of order " + std::to_string(n) + " is not positive definite");
    }
    return llt;
}

}  // namespace

double constrained_min(std::uint64_t n, std::uint64_t i) {
    log2_order(n);
    require(i >= 1 && i <= n, "prefix index out of range");
    const auto llt = factor(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    v.head(static_cast<Eigen::Index>(i)).setOnes();
    const Eigen::VectorXd y = llt.solve(v);
    const double form = v.dot(y);
    if (!(form > 0.0)) throw NumericalError("non-positive v^T A^{-1} v");
    return 1.0 / form;
}

std::vector<double> prefix_inverse_forms(std::uint64_t n) {
    log2_order(n);
    const auto size = static_cast<Eigen::Index>(n);
    const auto llt = factor(n);
    // Columns of A^{-1} V where V is the upper-triangular all-ones matrix:
    // column i of V is v^i, so diag(V^T A^{-1} V) holds every form.
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index c = 0; c < size; ++c) v.col(c).head(c + 1).setOnes();
    const Eigen::MatrixXd y = llt.solve(v);
    std::vector<double> forms(n);
    // <v^i, y_i> = sum of the first i entries of column i.
    for (Eigen::Index c = 0; c < size; ++c) forms[static_cast<std::size_t>(c)] = y.col(c).head(c + 1).sum();
    return forms;
}

double corollary_ratio(std::uint64_t n) {
    const std::vector<double> forms = prefix_inverse_forms(n);
    return static_cast<double>(trace(n)) * *std::max_element(forms.begin(), forms.end());
}

void write_dense_csv(std::uint64_t n, std::ostream& out) {
    log2_order(n);
    require(n <= 64, "dump-matrix supports n <= 64");
    for (std::uint64_t i = 1; i <= n; ++i) {
        for (std::uint64_t j = 1; j <= n; ++j) {
            if (j > 1) out << ',';
            out << entry(n, i, j);
        }
        out << '\n';
    }
}

}  // namespace kwalk::dyadic
