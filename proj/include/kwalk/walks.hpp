#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "kwalk/sign_families.hpp"

namespace kwalk {

/// Monte Carlo estimate of E[(sup_t |S_t|)^order].
struct SupEstimate {
    unsigned moment_order = 1;
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t n = 0;
};

/// S_0 = 0, S_i = S_{i-1} + v_i; length n + 1.
std::vector<std::int64_t> prefix_sums(const SignVector& v);

/// max over 1 <= i <= n of |S_i|.
std::int64_t sup_abs_prefix(const SignVector& v);
std::int64_t sup_abs_prefix(std::span<const std::int8_t> v);

/// Mean and standard error of sup_abs_prefix(h)^order over seeded draws.
SupEstimate estimate_sup_moment(const FamilySpec& spec, unsigned moment_order, std::uint64_t trials,
                                std::uint64_t seed, unsigned workers = 0);

/// Exact E[S_{c*root}] under H1: root * sum_{c' <= c} f_{c'}.
Rational drift_check_h1(const AdversarialParams& params, std::uint64_t block);

struct ScalingRow {
    std::uint64_t n = 0;
    SupEstimate estimate;
};

struct ScalingTable {
    std::vector<ScalingRow> rows;
    std::uint64_t seed = 0;

    /// CSV columns: n, moment_order, mean, stderr, trials, seed.
    void write_csv(std::ostream& out) const;
};

/// Runs estimate_sup_moment for every n (strictly increasing powers of 4).
/// Row j uses seed mix(seed, n) so rows reproduce in isolation.
ScalingTable scaling_table(const FamilySpec& spec_template, std::span<const std::uint64_t> ns,
                           unsigned moment_order, std::uint64_t trials, std::uint64_t seed,
                           unsigned workers = 0);

/// Least-squares fit of y = a + b * x with the usual slope standard error.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_std_error = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fits mean/sqrt(n) (order 1) or mean/n (order 2) against lg n.
LineFit fit_log_growth(const ScalingTable& table);

/// Normalized statistic used by fit_log_growth for one row.
double normalized_mean(const ScalingRow& row);

}  // namespace kwalk
