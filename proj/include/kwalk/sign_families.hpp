#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <gmpxx.h>

#include "kwalk/errors.hpp"
#include "kwalk/gf2.hpp"
#include "kwalk/rng.hpp"

namespace kwalk {

using Rational = mpq_class;

enum class FamilyKind { FullyIndependent, PolynomialKWise, AdversarialStage };
enum class Stage { H1, H2, H3, H };

std::string to_string(FamilyKind kind);
std::string to_string(Stage stage);
FamilyKind parse_family_kind(const std::string& text);
Stage parse_stage(const std::string& text);

/// Which distribution over sign vectors to draw from.
struct FamilySpec {
    FamilyKind kind = FamilyKind::FullyIndependent;
    std::uint64_t n = 16;
    unsigned k = 0;            // PolynomialKWise only
    Stage stage = Stage::H;    // AdversarialStage only
    std::uint64_t seed = 0;

    /// Throws InvalidParameter when the invariants for `kind` fail.
    void validate() const;

    /// Largest k such that any k coordinates are independent uniform signs;
    /// 0 when not even the marginals are uniform. FullyIndependent reports n.
    std::uint64_t independence() const;

    /// Same spec with another domain size.
    FamilySpec with_n(std::uint64_t new_n) const;

    /// key -> decimal/identifier string form, suitable for a config section.
    std::map<std::string, std::string> to_fields() const;
    static FamilySpec from_fields(const std::map<std::string, std::string>& fields);
};

bool is_power_of_four(std::uint64_t n) noexcept;
bool is_power_of_two(std::uint64_t n) noexcept;
/// floor(sqrt(n)) for perfect squares; callers validate first.
std::uint64_t exact_sqrt(std::uint64_t n) noexcept;

/// A vector in {-1, +1}^n.
class SignVector {
public:
    SignVector() = default;
    explicit SignVector(std::size_t n, std::int8_t fill = 1) : entries_(n, fill) {}
    explicit SignVector(std::vector<std::int8_t> entries);

    std::size_t size() const noexcept { return entries_.size(); }
    std::int8_t operator[](std::size_t i) const noexcept { return entries_[i]; }
    std::int8_t& operator[](std::size_t i) noexcept { return entries_[i]; }
    std::span<const std::int8_t> entries() const noexcept { return entries_; }
    std::span<std::int8_t> entries() noexcept { return entries_; }
    void resize(std::size_t n) { entries_.resize(n, 1); }

    SignVector negated() const;
    bool valid() const noexcept;

    friend bool operator==(const SignVector&, const SignVector&) = default;

private:
    std::vector<std::int8_t> entries_;
};

/// Closed-form constants of the adversarial pairwise construction, exact.
/// Blocks are 1-based: block c holds indices (c-1)*root+1 .. c*root.
struct AdversarialParams {
    std::uint64_t n = 0;
    std::uint64_t root = 0;
    std::uint64_t ell = 0;
    std::vector<Rational> f;   // f[c-1] = E[h_i] under H1 for i in block c
    std::vector<Rational> g;   // row-major root x root
    Rational g_scale;          // 1 + sum_{c1<c2} |g_{c1c2}|
    Rational c6;               // sqrt(n) * E_{H3}[h_i h_j], i != j same block
    Rational p;                // probability of the H3 branch in H

    const Rational& g_at(std::uint64_t c1, std::uint64_t c2) const { return g[(c1 - 1) * root + (c2 - 1)]; }
    Rational& g_at(std::uint64_t c1, std::uint64_t c2) { return g[(c1 - 1) * root + (c2 - 1)]; }
    std::uint64_t block_of(std::uint64_t index0) const noexcept { return index0 / root + 1; }
};

/// Per-block means f_1..f_root. root must be even and >= 2.
std::vector<Rational> f_values(std::uint64_t root);

/// g_{c1c2} = (1/root) sum_d f_{c1+d} f_{c2+d} with f periodic mod root.
std::vector<Rational> g_table(std::uint64_t root);

/// Derives gScale, C6 and p from the g-table. The `_from_table` form takes a
/// caller-supplied table (the verifier's fault-injection path uses it).
AdversarialParams adversarial_params(std::uint64_t n);
AdversarialParams adversarial_params_from_table(std::uint64_t n, std::vector<Rational> g);

/// Sampler for the four adversarial stages. Probabilities are converted to
/// double once at construction.
class AdversarialSampler {
public:
    explicit AdversarialSampler(AdversarialParams params);

    const AdversarialParams& params() const noexcept { return params_; }

    void sample_h1(CounterRng& rng, SignVector& out) const;
    void sample_h2(CounterRng& rng, SignVector& out) const;
    void sample_h3(CounterRng& rng, SignVector& out) const;
    void sample_h(CounterRng& rng, SignVector& out) const;
    void sample(Stage stage, CounterRng& rng, SignVector& out) const;

    /// Pair mode (c1, c2), c1 < c2: block c1 all +1, block c2 all
    /// -sign(g_{c1c2}) (with sign(0) = +1), other entries uniform.
    void sample_pair_mode(std::uint64_t c1, std::uint64_t c2, CounterRng& rng, SignVector& out) const;
    /// Each block gets a uniform ell-subset of +1, the rest -1.
    void sample_balanced_blocks(CounterRng& rng, SignVector& out) const;

    /// out_i = in_{i + d*root} with indices mod n.
    void shift_blocks(const SignVector& in, std::uint64_t d, SignVector& out) const;

    /// Pairs (c1, c2), c1 < c2, in lexicographic order; index 0 of the CDF is H2.
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs() const noexcept { return pairs_; }
    /// Selects H2 (returns 0) or pair index + 1 by inverse CDF on u in [0, 1).
    std::size_t select_h3_mode(double u) const noexcept;

private:
    AdversarialParams params_;
    std::vector<double> plus_probability_;  // per block, H1
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs_;
    std::vector<std::int8_t> pair_second_sign_;
    std::vector<double> h3_cdf_;
    double p_ = 0.0;
};

/// Polynomial k-wise independent signs over GF(2^w): k uniform coefficients,
/// evaluated at the encodings 0..n-1 of indices 1..n, sign from the low bit.
class KWiseSampler {
public:
    KWiseSampler(std::uint64_t n, unsigned k, unsigned field_width = 64);

    std::uint64_t n() const noexcept { return n_; }
    unsigned k() const noexcept { return k_; }
    const BinaryField& field() const noexcept { return field_; }

    void sample(CounterRng& rng, SignVector& out) const;

    /// Signs for a fixed coefficient vector (length k) via precomputed masks.
    void signs_for(std::span<const std::uint64_t> coefficients, SignVector& out) const;
    /// Same, via direct Horner evaluation in the field.
    void signs_by_evaluation(std::span<const std::uint64_t> coefficients, SignVector& out) const;

    /// Invokes fn(signs) for every coefficient vector in GF(2^w)^k.
    /// Only feasible for tiny fields; throws ResourceError above 2^24 vectors.
    template <typename Fn>
    void for_each_polynomial(Fn&& fn) const;

private:
    std::uint64_t n_;
    unsigned k_;
    BinaryField field_;
    // rows_[i * (k-1) + (j-1)]: lsb(c * x_i^j) = parity(c & mask) for j >= 1
    std::vector<std::uint64_t> rows_;
};

KWiseSampler make_kwise(std::uint64_t n, unsigned k, unsigned field_width = 64);

/// Any family, behind one draw interface.
class FamilySampler {
public:
    explicit FamilySampler(const FamilySpec& spec, unsigned field_width = 64);

    const FamilySpec& spec() const noexcept { return spec_; }
    void sample(CounterRng& rng, SignVector& out) const;
    SignVector sample(CounterRng& rng) const;

private:
    FamilySpec spec_;
    std::variant<std::monostate, KWiseSampler, AdversarialSampler> impl_;
};

/// Exact first and second moments. Every stage is block-structured: the mean
/// depends only on the block and E[h_i h_j] (i != j) only on the two blocks,
/// so the n x n table is stored as a root x root block table plus the unit
/// diagonal.
class MomentSummary {
public:
    MomentSummary(std::uint64_t n, std::uint64_t root, std::vector<Rational> block_mean,
                  std::vector<Rational> block_cov);

    std::uint64_t n() const noexcept { return n_; }
    std::uint64_t root() const noexcept { return root_; }
    /// 1-based indices.
    Rational mean(std::uint64_t i) const;
    Rational covariance(std::uint64_t i, std::uint64_t j) const;
    const Rational& block_covariance(std::uint64_t c1, std::uint64_t c2) const {
        return block_cov_[(c1 - 1) * root_ + (c2 - 1)];
    }
    const Rational& block_mean(std::uint64_t c) const { return block_mean_[c - 1]; }

    bool means_all_zero() const;
    bool covariance_is_identity() const;
    bool covariance_symmetric() const;

    /// sum_{i != j} |E[h_i h_j]|.
    Rational off_diagonal_abs_sum() const;

    /// CSV with header "row,col,value"; values as exact fractions.
    void write_covariance_csv(std::ostream& out) const;

private:
    std::uint64_t n_;
    std::uint64_t root_;
    std::vector<Rational> block_mean_;
    std::vector<Rational> block_cov_;
};

inline constexpr std::uint64_t kMaxExactMomentsN = 4096;

MomentSummary exact_moments(const FamilySpec& spec);
MomentSummary exact_moments(const AdversarialParams& params, Stage stage);

/// Monte Carlo moment estimates; integer sums, so the reduction is exact and
/// independent of the worker count.
struct EmpiricalMoments {
    std::uint64_t n = 0;
    std::uint64_t trials = 0;
    std::vector<double> mean;        // length n
    std::vector<double> covariance;  // n x n row-major, E[h_i h_j]

    double cov(std::uint64_t i, std::uint64_t j) const { return covariance[(i - 1) * n + (j - 1)]; }
    void write_covariance_csv(std::ostream& out) const;
};

EmpiricalMoments empirical_moments(const FamilySampler& sampler, std::uint64_t trials, std::uint64_t seed,
                                   unsigned workers = 0);

std::string to_string(const Rational& value);

template <typename Fn>
void KWiseSampler::for_each_polynomial(Fn&& fn) const {
    const unsigned __int128 per_coefficient = field_.order();
    unsigned __int128 total = 1;
    for (unsigned j = 0; j < k_; ++j) {
        total *= per_coefficient;
        if (total > (static_cast<unsigned __int128>(1) << 24)) {
            throw ResourceError("polynomial enumeration too large");
        }
    }
    std::vector<std::uint64_t> coefficients(k_, 0);
    SignVector signs(n_);
    for (unsigned __int128 index = 0; index < total; ++index) {
        unsigned __int128 rest = index;
        for (unsigned j = 0; j < k_; ++j) {
            coefficients[j] = static_cast<std::uint64_t>(rest % per_coefficient);
            rest /= per_coefficient;
        }
        signs_for(coefficients, signs);
        fn(std::as_const(signs));
    }
}

}  // namespace kwalk
