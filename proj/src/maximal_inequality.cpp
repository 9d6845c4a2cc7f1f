#include "kwalk/maximal_inequality.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "kwalk/parallel.hpp"

namespace kwalk::maximal {

VarianceProfile::VarianceProfile(std::span<const double> variances) : original_size_(variances.size()) {
    weights_.push_back(0.0);
    original_index_.push_back(0);
    compressed_of_.push_back(0);
    for (std::size_t i = 0; i < variances.size(); ++i) {
        const double v = variances[i];
        require(std::isfinite(v) && v >= 0.0, "variance profile entries must be finite and >= 0");
        if (v > 0.0) {
            weights_.push_back(weights_.back() + v);
            original_index_.push_back(i + 1);
        }
        compressed_of_.push_back(weights_.size() - 1);
    }
    require(weights_.size() > 1, "variance profile has no positive entry");
    for (std::size_t i = 1; i < weights_.size(); ++i) {
        require(weights_[i] > weights_[i - 1], "variance profile prefix sums must be strictly increasing");
    }
}

IntervalTree build_tree(const VarianceProfile& profile) {
    IntervalTree tree{profile, {}, 0};
    const std::size_t n = profile.size();
    tree.nodes.push_back(IntervalNode{0, n, 0, 1, false, 0, -1, -1, -1});
    std::size_t level_begin = 0;
    while (level_begin < tree.nodes.size()) {
        const std::size_t level_end = tree.nodes.size();
        std::size_t ordinal = 0;
        for (std::size_t id = level_begin; id < level_end; ++id) {
            const IntervalNode node = tree.nodes[id];
            if (node.a == node.b) continue;
            const double wa = profile.weight(node.a);
            const double span = profile.weight(node.b) - wa;
            // smallest t with W_t - W_a >= 0.45 span; weights are increasing
            std::size_t lo = node.a, hi = node.b;
            while (lo < hi) {
                const std::size_t mid = lo + (hi - lo) / 2;
                if (profile.weight(mid) - wa >= 0.45 * span) hi = mid;
                else lo = mid + 1;
            }
            const std::size_t t = lo;
            std::size_t left_b = t, right_a = t;
            if (!(profile.weight(t) - wa <= 0.55 * span)) {
                left_b = t - 1;
                right_a = t;
            }
            const unsigned level = node.level + 1;
            const auto parent = static_cast<long>(id);
            tree.nodes[id].left = static_cast<long>(tree.nodes.size());
            tree.nodes.push_back(IntervalNode{node.a, left_b, level, ++ordinal, false, 0, parent, -1, -1});
            tree.nodes[id].right = static_cast<long>(tree.nodes.size());
            tree.nodes.push_back(IntervalNode{right_a, node.b, level, ++ordinal, false, 0, parent, -1, -1});
            tree.depth = level;
        }
        level_begin = level_end;
    }
    classify_and_rank(tree);
    return tree;
}

void classify_and_rank(IntervalTree& tree) {
    std::vector<unsigned> bad_count(tree.nodes.size(), 0);
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        IntervalNode& node = tree.nodes[id];
        if (node.parent < 0) {
            node.bad = false;
        } else {
            const IntervalNode& parent = tree.nodes[static_cast<std::size_t>(node.parent)];
            node.bad = tree.nodes[static_cast<std::size_t>(parent.left)].b !=
                       tree.nodes[static_cast<std::size_t>(parent.right)].a;
            bad_count[id] = bad_count[static_cast<std::size_t>(node.parent)];
        }
        if (node.bad) ++bad_count[id];
        node.rank = node.bad ? bad_count[id] : 0;
    }
}

double bad_mass(const IntervalTree& tree, unsigned q) {
    double total = 0.0;
    for (const auto& node : tree.nodes) {
        if (node.bad && node.rank == q) total += tree.length(node);
    }
    return total;
}

unsigned max_rank(const IntervalTree& tree) {
    unsigned best = 0;
    for (const auto& node : tree.nodes) best = std::max(best, node.rank);
    return best;
}

std::vector<long> IntervalTree::level_cover(unsigned r) const {
    std::vector<long> cover;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const auto& node = nodes[id];
        if (node.level == r || (node.level < r && node.leaf())) cover.push_back(static_cast<long>(id));
    }
    std::sort(cover.begin(), cover.end(), [&](long x, long y) {
        const auto& u = nodes[static_cast<std::size_t>(x)];
        const auto& v = nodes[static_cast<std::size_t>(y)];
        return u.a != v.a ? u.a < v.a : u.b < v.b;
    });
    return cover;
}

InvariantReport check_tree(const IntervalTree& tree) {
    InvariantReport report;
    const std::size_t n = tree.profile.size();
    for (unsigned r = 0; r <= tree.depth; ++r) {
        const auto cover = tree.level_cover(r);
        if (cover.empty()) {
            report.fail("level " + std::to_string(r) + " is empty");
            continue;
        }
        const auto& first = tree.nodes[static_cast<std::size_t>(cover.front())];
        const auto& last = tree.nodes[static_cast<std::size_t>(cover.back())];
        if (first.a != 0 || last.b != n) report.fail("level " + std::to_string(r) + " does not span [0, n]");
        for (std::size_t k = 0; k < cover.size(); ++k) {
            const auto& node = tree.nodes[static_cast<std::size_t>(cover[k])];
            if (node.a > node.b) report.fail("node with a > b at level " + std::to_string(r));
            if (k + 1 < cover.size()) {
                const auto& next = tree.nodes[static_cast<std::size_t>(cover[k + 1])];
                if (next.a != node.b && next.a != node.b + 1) {
                    report.fail("gap or overlap at level " + std::to_string(r) + " after index " +
                                std::to_string(node.b));
                }
            }
        }
    }
    for (const auto& node : tree.nodes) {
        if (tree.length(node) > std::pow(0.55, node.level) + 1e-12) {
            report.fail("length decay violated at level " + std::to_string(node.level));
        }
        if (!node.leaf()) {
            const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
            const auto& rgt = tree.nodes[static_cast<std::size_t>(node.right)];
            if (l.bad != rgt.bad) report.fail("siblings disagree on bad flag");
            if (l.a != node.a || rgt.b != node.b || l.b > rgt.a) report.fail("children do not tile parent");
        } else if (node.a != node.b) {
            report.fail("non-singleton leaf");
        }
    }
    const unsigned top = max_rank(tree);
    for (unsigned q = 1; q <= top; ++q) {
        const double mass = bad_mass(tree, q);
        if (mass > std::pow(0.9, q) + 1e-12) {
            report.fail("bad mass of rank " + std::to_string(q) + " is " + std::to_string(mass));
        }
    }
    return report;
}

void IntervalTree::write_text(std::ostream& out) const {
    // depth-first, indented by level
    std::vector<long> stack{0};
    while (!stack.empty()) {
        const auto& node = nodes[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        out << std::string(2 * node.level, ' ') << '[' << node.a << ", " << node.b << "] r=" << node.level
            << " s=" << node.position;
        if (node.bad) out << " bad rank=" << node.rank;
        out << '\n';
        if (!node.leaf()) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
}

void IntervalTree::write_json(std::ostream& out) const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& node : nodes) {
        nlohmann::json j = {{"level", node.level}, {"s", node.position}, {"a", node.a},
                            {"b", node.b},         {"bad", node.bad}};
        if (node.bad) j["rank"] = node.rank;
        list.push_back(std::move(j));
    }
    out << list.dump(1) << '\n';
}

std::string to_string(HopKind kind) {
    switch (kind) {
        case HopKind::Equal: return "equal";
        case HopKind::Root: return "root";
        case HopKind::Bad: return "bad-hop";
        case HopKind::GoodMin: return "good-min-hop";
        case HopKind::ZeroVariance: return "zero-variance";
    }
    return "?";
}

ChainPath chain_path(const IntervalTree& tree, std::span<const double> prefix_sums, std::size_t i) {
    const VarianceProfile& profile = tree.profile;
    require(prefix_sums.size() == profile.original_size() + 1, "chain_path: prefix sums have the wrong length");
    require(i <= profile.original_size(), "chain_path: index out of range");
    auto s_at = [&](std::size_t compressed) { return prefix_sums[profile.original_index(compressed)]; };

    const std::size_t target = profile.compressed_index(i);
    // descend until the target is an endpoint
    std::size_t id = 0;
    while (tree.nodes[id].a != target && tree.nodes[id].b != target) {
        const auto& node = tree.nodes[id];
        const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
        id = static_cast<std::size_t>(target <= left.b ? node.left : node.right);
    }

    std::vector<std::size_t> points{target};
    std::vector<HopKind> hops;
    std::size_t current = target;
    while (tree.nodes[id].parent >= 0) {
        const auto parent_id = static_cast<std::size_t>(tree.nodes[id].parent);
        const auto& parent = tree.nodes[parent_id];
        const auto& node = tree.nodes[id];
        if (current == parent.a || current == parent.b) {
            hops.push_back(HopKind::Equal);
        } else if (!node.bad) {
            // shared endpoint of good siblings: take the smaller sibling increment
            const double left_step = std::abs(s_at(current) - s_at(parent.a));
            const double right_step = std::abs(s_at(parent.b) - s_at(current));
            current = left_step <= right_step ? parent.a : parent.b;
            hops.push_back(HopKind::GoodMin);
        } else {
            current = static_cast<long>(id) == parent.left ? node.a : node.b;
            hops.push_back(HopKind::Bad);
        }
        points.push_back(current);
        id = parent_id;
    }
    if (current != 0) {
        points.push_back(0);
        hops.push_back(HopKind::Root);
    }
    std::reverse(points.begin(), points.end());
    std::reverse(hops.begin(), hops.end());

    ChainPath path;
    for (std::size_t p : points) path.points.push_back(profile.original_index(p));
    path.hops = std::move(hops);
    if (path.points.back() != i) {
        path.points.push_back(i);
        path.hops.push_back(HopKind::ZeroVariance);
    }
    return path;
}

double telescope(const ChainPath& path, std::span<const double> prefix_sums) {
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < path.points.size(); ++j) {
        total += prefix_sums[path.points[j + 1]] - prefix_sums[path.points[j]];
    }
    return total;
}

void TailTable::write_csv(std::ostream& out) const {
    out << "lambda,empirical_p,stderr,bound,lambda_multiple,implied_constant,n,trials,seed\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : rows) {
        out << row.lambda << ',' << row.empirical_p << ',' << row.std_error << ',' << row.bound << ','
            << row.lambda_multiple << ',' << row.implied_constant << ',' << n << ',' << trials << ',' << seed
            << '\n';
    }
    out.precision(old_precision);
}

TailTable mc_tail(const FamilySpec& spec, std::span<const double> scales, std::span<const double> lambda_multiples,
                  std::uint64_t trials, std::uint64_t seed, unsigned workers) {
    spec.validate();
    require(spec.independence() >= 4, "mc_tail needs a family that is at least 4-wise independent");
    require(scales.size() == spec.n, "mc_tail: one scale per index required");
    require(trials >= 1, "mc_tail needs trials >= 1");
    double total_variance = 0.0;
    for (double s : scales) {
        require(std::isfinite(s), "mc_tail: scales must be finite");
        total_variance += s * s;
    }
    require(total_variance > 0.0, "mc_tail: all scales are zero");

    const FamilySampler sampler(spec);
    const std::vector<double> sups = run_trials<double>(trials, seed, workers, [&](CounterRng& rng, std::size_t) {
        thread_local SignVector h;
        sampler.sample(rng, h);
        double running = 0.0, best = 0.0;
        for (std::size_t i = 0; i < scales.size(); ++i) {
            running += scales[i] * h[i];
            best = std::max(best, std::abs(running));
        }
        return best;
    });

    TailTable table;
    table.n = spec.n;
    table.trials = trials;
    table.seed = seed;
    table.total_variance = total_variance;
    for (double multiple : lambda_multiples) {
        require(multiple > 0.0, "lambda multiples must be positive");
        TailRow row;
        row.lambda_multiple = multiple;
        row.lambda = multiple * std::sqrt(total_variance);
        const auto hits = std::count_if(sups.begin(), sups.end(), [&](double s) { return s >= row.lambda; });
        const double p = static_cast<double>(hits) / static_cast<double>(trials);
        row.empirical_p = p;
        row.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
        row.bound = total_variance / (row.lambda * row.lambda);
        row.implied_constant = p / row.bound;
        table.fitted_constant = std::max(table.fitted_constant, row.implied_constant);
        table.rows.push_back(row);
    }
    return table;
}

std::vector<double> log_uniform_variances(std::size_t n, double decades, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> out(n);
    for (double& v : out) v = std::pow(10.0, decades * rng.uniform());
    return out;
}

}  // namespace kwalk::maximal
