#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kwalk/sign_families.hpp"
#include "kwalk/walks.hpp"

namespace kwalk::streams {

/// Items p_1..p_m in [1, n]; m a power of two.
struct InsertionStream {
    std::uint64_t n = 0;
    std::vector<std::uint32_t> items;

    std::size_t m() const noexcept { return items.size(); }
    void validate() const;
    /// ||z||_2^2 for the full stream.
    std::uint64_t squared_norm() const;
    /// 2 lg m + 1.
    unsigned top_level() const;
};

enum class Generator { Identity, SingleItem, TwoPhaseHeavy, UniformRandom, DyadicBursts };
std::string to_string(Generator g);
Generator parse_generator(const std::string& text);
const std::vector<Generator>& all_generators();

/// Identity: n = m, p_j = j. SingleItem: every p_j = 1 (n as given).
/// TwoPhaseHeavy: first half item 1, second half cycles 2..n.
/// UniformRandom: seeded uniform items. DyadicBursts: burst b is 2^b copies of
/// item (b mod n) + 1, truncated at m.
InsertionStream generate(Generator g, std::uint64_t m, std::uint64_t n, std::uint64_t seed = 0);

/// Newline-delimited decimal items. read_stream takes n as the largest item
/// unless a positive n is given.
void write_stream(const InsertionStream& stream, std::ostream& out);
InsertionStream read_stream(std::istream& in, std::uint64_t n = 0);

struct NetPoint {
    std::uint64_t time = 0;
    std::size_t parent = 0;  // index s' into level r - 1 (unused at level 0)
};

class NetHierarchy {
public:
    explicit NetHierarchy(const InsertionStream& stream);

    const InsertionStream& stream() const noexcept { return stream_; }
    unsigned top_level() const noexcept { return static_cast<unsigned>(levels_.size() - 1); }
    const std::vector<NetPoint>& level(unsigned r) const { return levels_.at(r); }
    /// d_r: the largest index s at level r.
    std::size_t d(unsigned r) const { return levels_.at(r).size() - 1; }
    std::uint64_t squared_norm() const noexcept { return squared_norm_; }
    /// ||z^(t)||_2^2 for t = 0..m.
    const std::vector<std::uint64_t>& prefix_squared_norms() const noexcept { return prefix_norms_; }

    /// CSV columns r, s, time, parent_s (parent_s empty at level 0).
    void write_csv(std::ostream& out) const;

private:
    InsertionStream stream_;
    std::uint64_t squared_norm_ = 0;
    std::vector<std::uint64_t> prefix_norms_;
    std::vector<std::vector<NetPoint>> levels_;
};

NetHierarchy build_nets(const InsertionStream& stream);

/// Every prefix lies within 2^{-r/2} ||z|| of its last preceding level-r net
/// point; exact integer comparison dist^2 * 2^r <= ||z||^2.
bool coverage_check(const NetHierarchy& nets, unsigned r);

/// Consecutive net points at every level are strictly farther than the radius
/// apart, and d_r <= 2^r.
bool separation_check(const NetHierarchy& nets, unsigned r);

/// ||z^(t) - z^(u)||_2^2 by direct count (t >= u).
std::uint64_t squared_distance(const InsertionStream& stream, std::uint64_t u, std::uint64_t t);

/// P[t] = <z^(t), X>, t = 0..m.
std::vector<double> prefix_inner_products(const InsertionStream& stream, std::span<const double> x);

/// Sum over r = 1..L, s of <a_{r,s} - a_{r-1,f(r,s)}, X>^2.
double chain_form_quadratic(const NetHierarchy& nets, std::span<const double> x);
/// Sum over r = 1..L of 2^{r/2} sum_s <a_{r,s} - a_{r-1,f(r,s)}, X>^k, k even >= 4.
double chain_form_k(const NetHierarchy& nets, std::span<const double> x, unsigned k);

/// Same sums with each difference held as a sparse coordinate-delta map.
double chain_form_quadratic_sparse(const NetHierarchy& nets, std::span<const double> x);
double chain_form_k_sparse(const NetHierarchy& nets, std::span<const double> x, unsigned k);

/// ((1 - rho) / (1 - rho^L))^k with rho = 2^{-1/(2k)}, L = 2 lg m + 1.
double chain_constant(unsigned k, std::uint64_t m);

/// max_t |<z^(t), X>| with an O(1) update per item.
double sup_inner(const InsertionStream& stream, std::span<const double> x);
double sup_inner(const InsertionStream& stream, const SignVector& x);

/// B_2 = 1, B_4 = 3; InvalidParameter otherwise.
double moment_constant(unsigned k);

struct ExactMomentCheck {
    Rational moment;  // E <v, X>^k
    Rational bound;   // B_k ||v||^k
    std::uint64_t family_size = 0;
    bool holds() const { return moment <= bound; }
};

/// Exhaustive over all degree-(k_family - 1) polynomials over the smallest
/// field with at least n elements (n <= 16). v is an integer vector.
ExactMomentCheck mz_moment_exact(std::span<const std::int64_t> v, unsigned k, unsigned family_k);

/// 3 ||v||^4 - 2 sum v_i^4: the fourth moment under 4-wise independent signs.
Rational rademacher_fourth_moment(std::span<const std::int64_t> v);

struct McMomentCheck {
    double moment = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    bool holds(double sigmas = 3.0) const { return moment <= bound + sigmas * std_error; }
};

McMomentCheck mz_moment_mc(std::span<const double> v, unsigned k, const FamilySpec& spec, std::uint64_t trials,
                           std::uint64_t seed, unsigned workers = 0);

/// E[sup_t |<X, z^(t)>|^k]; requires independence >= 2 (k = 2) or >= k.
SupEstimate mc_sup_moment(const InsertionStream& stream, const FamilySpec& spec, unsigned k, std::uint64_t trials,
                          std::uint64_t seed, unsigned workers = 0);

/// Mean and standard error of chain_form_quadratic over draws of the family.
struct ChainExpectation {
    double mean = 0.0;
    double std_error = 0.0;
    double bound = 0.0;  // 2 B_2 (2 lg m + 1) ||z||^2
};
ChainExpectation mc_chain_quadratic(const NetHierarchy& nets, const FamilySpec& spec, std::uint64_t trials,
                                    std::uint64_t seed, unsigned workers = 0);

}  // namespace kwalk::streams
