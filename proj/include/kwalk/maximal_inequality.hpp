#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kwalk/sign_families.hpp"

namespace kwalk::maximal {

/// Per-step variances with zero entries removed. Indices of the compressed
/// problem run 1..size(); original_index maps them back (original_index[0] = 0).
class VarianceProfile {
public:
    /// Throws InvalidParameter on negative or non-finite entries, or if every
    /// variance is zero.
    explicit VarianceProfile(std::span<const double> variances);

    std::size_t original_size() const noexcept { return original_size_; }
    std::size_t size() const noexcept { return weights_.size() - 1; }
    /// Unnormalized prefix sum W_i; T_i = W_i / W_n.
    double weight(std::size_t i) const { return weights_[i]; }
    double T(std::size_t i) const { return weights_[i] / weights_.back(); }
    double total_variance() const { return weights_.back(); }
    std::size_t original_index(std::size_t compressed) const { return original_index_[compressed]; }
    /// Compressed index of the last nonzero-variance step at or before
    /// original index i.
    std::size_t compressed_index(std::size_t original) const { return compressed_of_[original]; }

private:
    std::size_t original_size_ = 0;
    std::vector<double> weights_;
    std::vector<std::size_t> original_index_;
    std::vector<std::size_t> compressed_of_;
};

struct IntervalNode {
    std::size_t a = 0;
    std::size_t b = 0;
    unsigned level = 0;
    std::size_t position = 0;  // 1-based ordinal among level nodes, left to right
    bool bad = false;
    unsigned rank = 0;          // bad nodes only
    long parent = -1;
    long left = -1;
    long right = -1;

    bool leaf() const noexcept { return left < 0; }
};

struct IntervalTree {
    VarianceProfile profile;
    std::vector<IntervalNode> nodes;  // nodes[0] is the root; stored level by level
    unsigned depth = 0;               // deepest level present

    double length(const IntervalNode& node) const { return profile.T(node.b) - profile.T(node.a); }
    /// Level-r cover: the level-r nodes plus shallower leaves carried down,
    /// ordered left to right.
    std::vector<long> level_cover(unsigned r) const;

    void write_text(std::ostream& out) const;
    void write_json(std::ostream& out) const;
};

/// Recursive window split. Bad flags and ranks are filled by classify_and_rank.
IntervalTree build_tree(const VarianceProfile& profile);

/// bad := children do not share an endpoint; rank := bad ancestors-or-self.
void classify_and_rank(IntervalTree& tree);

/// Sum of T-lengths of bad nodes with rank exactly q.
double bad_mass(const IntervalTree& tree, unsigned q);
unsigned max_rank(const IntervalTree& tree);

struct InvariantReport {
    bool ok = true;
    std::vector<std::string> failures;
    void fail(std::string message) {
        ok = false;
        if (failures.size() < 20) failures.push_back(std::move(message));
    }
};

/// Coverage, ordering, length decay, sibling parity, rank-mass bound.
InvariantReport check_tree(const IntervalTree& tree);

enum class HopKind { Equal, Root, Bad, GoodMin, ZeroVariance };
std::string to_string(HopKind kind);

struct ChainPath {
    std::vector<std::size_t> points;  // i_0 = 0, ..., i_d = i (original indices)
    std::vector<HopKind> hops;        // hops[j] joins points[j] and points[j+1]
};

/// Chain for original index i. prefix_sums has original_size()+1 entries
/// (S_0 = 0); zero-variance steps must contribute zero to S.
ChainPath chain_path(const IntervalTree& tree, std::span<const double> prefix_sums, std::size_t i);

/// S_{points[d]} - S_{points[0]} as a sum of hop increments, in hop order.
double telescope(const ChainPath& path, std::span<const double> prefix_sums);

/// One row of an exceedance table.
struct TailRow {
    double lambda_multiple = 0.0;
    double lambda = 0.0;
    double empirical_p = 0.0;
    double std_error = 0.0;
    double bound = 0.0;           // sum sigma^2 / lambda^2
    double implied_constant = 0.0;  // empirical_p * lambda^2 / sum sigma^2
};

struct TailTable {
    std::uint64_t n = 0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    double total_variance = 0.0;
    std::vector<TailRow> rows;
    /// Smallest C with empirical_p <= C * sum sigma^2 / lambda^2 on all rows.
    double fitted_constant = 0.0;

    /// CSV columns: lambda, empirical_p, stderr, bound, lambda_multiple,
    /// implied_constant, n, trials, seed.
    void write_csv(std::ostream& out) const;
};

/// Steps X_i = scale_i * h_i with h drawn from spec (independence >= 4).
/// lambda = multiple * sqrt(sum scale_i^2).
TailTable mc_tail(const FamilySpec& spec, std::span<const double> scales, std::span<const double> lambda_multiples,
                  std::uint64_t trials, std::uint64_t seed, unsigned workers = 0);

/// sigma_i^2 = 10^{U(0, decades)} from a seeded generator.
std::vector<double> log_uniform_variances(std::size_t n, double decades, std::uint64_t seed);

}  // namespace kwalk::maximal
