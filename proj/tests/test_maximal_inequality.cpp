#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "kwalk/maximal_inequality.hpp"

using namespace kwalk;
using namespace kwalk::maximal;

namespace {

using NodeKey = std::tuple<std::size_t, std::size_t, unsigned, bool>;  // a, b, level, bad

// Straight recursive transcription of the split rule with a linear scan.
void oracle_split(const std::vector<double>& t, std::size_t a, std::size_t b, unsigned level, bool bad,
                  std::set<NodeKey>& out) {
    out.insert({a, b, level, bad});
    if (a == b) return;
    const double span = t[b] - t[a];
    for (std::size_t s = a; s <= b; ++s) {
        const double d = t[s] - t[a];
        if (d >= 0.45 * span && d <= 0.55 * span) {
            oracle_split(t, a, s, level + 1, false, out);
            oracle_split(t, s, b, level + 1, false, out);
            return;
        }
    }
    std::size_t left_b = a;
    for (std::size_t s = a; s <= b; ++s) {
        if (t[s] - t[a] <= 0.45 * span) left_b = s;
    }
    oracle_split(t, a, left_b, level + 1, true, out);
    oracle_split(t, left_b + 1, b, level + 1, true, out);
}

std::set<NodeKey> keys(const IntervalTree& tree) {
    std::set<NodeKey> out;
    for (const auto& node : tree.nodes) out.insert({node.a, node.b, node.level, node.bad});
    return out;
}

std::vector<double> unnormalized_prefix(const std::vector<double>& variances) {
    std::vector<double> t{0.0};
    for (double v : variances) t.push_back(t.back() + v);
    return t;
}

const IntervalNode* find(const IntervalTree& tree, std::size_t a, std::size_t b) {
    for (const auto& node : tree.nodes) {
        if (node.a == a && node.b == b) return &node;
    }
    return nullptr;
}

FamilySpec kwise(std::uint64_t n, unsigned k) {
    FamilySpec s;
    s.kind = FamilyKind::PolynomialKWise;
    s.n = n;
    s.k = k;
    return s;
}

}  // namespace

TEST_CASE("profile validation and compression") {
    CHECK_THROWS_AS(VarianceProfile(std::vector<double>{0.0, 0.0}), InvalidParameter);
    CHECK_THROWS_AS(VarianceProfile(std::vector<double>{1.0, -1.0}), InvalidParameter);
    CHECK_THROWS_AS(VarianceProfile(std::vector<double>{1.0, NAN}), InvalidParameter);
    const VarianceProfile p(std::vector<double>{0.0, 2.0, 0.0, 2.0, 0.0});
    CHECK(p.size() == 2);
    CHECK(p.original_size() == 5);
    CHECK(p.original_index(1) == 2);
    CHECK(p.original_index(2) == 4);
    CHECK(p.compressed_index(3) == 1);
    CHECK(p.compressed_index(5) == 2);
    CHECK(p.T(0) == 0.0);
    CHECK(p.T(2) == 1.0);
}

TEST_CASE("uniform profile has no bad nodes at the first split") {
    const std::vector<double> v(16, 1.0 / 16);
    const IntervalTree tree = build_tree(VarianceProfile(v));
    const auto& root = tree.nodes[0];
    CHECK(root.a == 0);
    CHECK(root.b == 16);
    CHECK_FALSE(tree.nodes[root.left].bad);
    CHECK(tree.nodes[root.left].b == 8);
    CHECK(keys(tree) == [&] {
        std::set<NodeKey> out;
        oracle_split(unnormalized_prefix(v), 0, 16, 0, false, out);
        return out;
    }());
}

TEST_CASE("two equal steps split in the middle") {
    const IntervalTree tree = build_tree(VarianceProfile(std::vector<double>{0.5, 0.5}));
    CHECK(tree.nodes[tree.nodes[0].left].b == 1);
    CHECK(tree.nodes[tree.nodes[0].right].a == 1);
    for (const auto& node : tree.nodes) {
        if (node.level == 1) CHECK_FALSE(node.bad);
    }
}

TEST_CASE("no split point in the window gives abutting bad children") {
    const IntervalTree tree = build_tree(VarianceProfile(std::vector<double>{0.44, 0.56}));
    const IntervalNode* left = find(tree, 0, 1);
    const IntervalNode* right = find(tree, 2, 2);
    REQUIRE(left != nullptr);
    REQUIRE(right != nullptr);
    CHECK(left->bad);
    CHECK(right->bad);
    CHECK(left->rank == 1);
    CHECK(right->rank == 1);
    CHECK(left->level == 1);
    // [0, 1] again has no interior point: its children are bad at rank 2
    const IntervalNode* inner = find(tree, 1, 1);
    REQUIRE(inner != nullptr);
    CHECK(inner->bad);
    CHECK(inner->rank == 2);
}

TEST_CASE("geometric profile nests bad intervals") {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(std::pow(0.3, i));
    const IntervalTree tree = build_tree(VarianceProfile(v));
    CHECK(max_rank(tree) >= 2);
    CHECK(check_tree(tree).ok);
}

TEST_CASE("trees match the oracle and satisfy all invariants on random profiles") {
    for (std::uint64_t id = 0; id < 200; ++id) {
        const auto v = log_uniform_variances(256, 4.0, mix(2024, id));
        const IntervalTree tree = build_tree(VarianceProfile(v));
        std::set<NodeKey> expect;
        oracle_split(unnormalized_prefix(v), 0, 256, 0, false, expect);
        CHECK(keys(tree) == expect);
        const InvariantReport report = check_tree(tree);
        CHECK(report.ok);
        for (unsigned q = 1; q <= max_rank(tree); ++q) CHECK(bad_mass(tree, q) <= std::pow(0.9, q) + 1e-12);
    }
}

TEST_CASE("adversarial geometric profile keeps the rank-mass bound") {
    std::vector<double> v;
    for (int i = 1; i <= 60; ++i) v.push_back(std::pow(0.55, i));
    const IntervalTree tree = build_tree(VarianceProfile(v));
    CHECK(check_tree(tree).ok);
    for (unsigned q = 1; q <= max_rank(tree); ++q) CHECK(bad_mass(tree, q) <= std::pow(0.9, q) + 1e-12);
    CHECK(bad_mass(tree, max_rank(tree) + 1) == 0.0);
}

TEST_CASE("level covers tile [0, n]") {
    const auto v = log_uniform_variances(64, 4.0, 5);
    const IntervalTree tree = build_tree(VarianceProfile(v));
    for (unsigned r = 0; r <= tree.depth; ++r) {
        const auto cover = tree.level_cover(r);
        std::set<std::size_t> seen;
        for (long id : cover) {
            const auto& node = tree.nodes[id];
            for (std::size_t i = node.a; i <= node.b; ++i) seen.insert(i);
        }
        CHECK(seen.size() == 65);
    }
}

TEST_CASE("chain paths telescope for every index") {
    for (std::uint64_t id = 0; id < 20; ++id) {
        const auto v = log_uniform_variances(256, 4.0, mix(7, id));
        const IntervalTree tree = build_tree(VarianceProfile(v));
        std::set<std::size_t> endpoints;
        for (const auto& node : tree.nodes) {
            endpoints.insert(node.a);
            endpoints.insert(node.b);
        }
        for (int realization = 0; realization < 100; ++realization) {
            CounterRng rng(mix(id, realization));
            std::vector<double> s{0.0};
            for (double var : v) s.push_back(s.back() + std::sqrt(var) * rng.sign());
            for (std::size_t i = 0; i <= 256; ++i) {
                const ChainPath path = chain_path(tree, s, i);
                REQUIRE(path.points.size() == path.hops.size() + 1);
                CHECK(path.points.front() == 0);
                CHECK(path.points.back() == i);
                CHECK(std::abs(telescope(path, s) - s[i]) <= 1e-9);
                if (realization == 0) {
                    for (std::size_t p : path.points) CHECK(endpoints.count(p) == 1);
                }
            }
        }
    }
}

TEST_CASE("chain path edge cases and hop kinds") {
    const std::vector<double> v(16, 1.0);
    const IntervalTree tree = build_tree(VarianceProfile(v));
    std::vector<double> s(17);
    for (std::size_t i = 0; i <= 16; ++i) s[i] = static_cast<double>(i % 3);
    const ChainPath zero = chain_path(tree, s, 0);
    for (std::size_t p : zero.points) CHECK(p == 0);
    const ChainPath full = chain_path(tree, s, 16);
    CHECK(full.points == std::vector<std::size_t>{0, 16});
    CHECK(full.hops == std::vector<HopKind>{HopKind::Root});
    CHECK_THROWS_AS(chain_path(tree, s, 17), InvalidParameter);
    CHECK_THROWS_AS(chain_path(tree, std::vector<double>(5), 1), InvalidParameter);
    // the good-split hop takes the smaller sibling increment
    const ChainPath mid = chain_path(tree, s, 8);
    CHECK(mid.hops.back() == HopKind::GoodMin);
    const double left_step = std::abs(s[8] - s[0]);
    const double right_step = std::abs(s[16] - s[8]);
    CHECK(mid.points[mid.points.size() - 2] == (left_step <= right_step ? 0u : 16u));

    const IntervalTree bad_tree = build_tree(VarianceProfile(std::vector<double>{0.44, 0.56}));
    const std::vector<double> s2{0.0, 1.0, -1.0};
    const ChainPath p1 = chain_path(bad_tree, s2, 1);
    CHECK(p1.points == std::vector<std::size_t>{0, 1});
    CHECK(p1.hops == std::vector<HopKind>{HopKind::Bad});
}

TEST_CASE("zero-variance indices become no-op hops") {
    const std::vector<double> v{0.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0};
    const IntervalTree tree = build_tree(VarianceProfile(v));
    CHECK(check_tree(tree).ok);
    CounterRng rng(9);
    std::vector<double> s{0.0};
    for (double var : v) s.push_back(s.back() + std::sqrt(var) * rng.sign());
    for (std::size_t i = 0; i <= v.size(); ++i) {
        const ChainPath path = chain_path(tree, s, i);
        CHECK(path.points.back() == i);
        CHECK(telescope(path, s) == doctest::Approx(s[i]));
    }
    const ChainPath p3 = chain_path(tree, s, 3);
    CHECK(p3.hops.back() == HopKind::ZeroVariance);
    CHECK(p3.points[p3.points.size() - 2] == 2);
}

TEST_CASE("tree dumps") {
    const IntervalTree tree = build_tree(VarianceProfile(std::vector<double>{0.44, 0.56}));
    std::ostringstream text;
    tree.write_text(text);
    CHECK(text.str().rfind("[0, 2] r=0 s=1\n", 0) == 0);
    CHECK(text.str().find("  [2, 2] r=1 s=2 bad rank=1") != std::string::npos);
    std::ostringstream js;
    tree.write_json(js);
    const auto parsed = nlohmann::json::parse(js.str());
    CHECK(parsed.size() == tree.nodes.size());
    CHECK(parsed[1]["bad"] == true);
    CHECK(parsed[1]["rank"] == 1);
}

TEST_CASE("tail estimates") {
    FamilySpec independent;
    independent.kind = FamilyKind::FullyIndependent;
    independent.n = 1024;
    const std::vector<double> ones(1024, 1.0);
    const std::vector<double> lambdas{2.0, 100.0};
    const TailTable t = mc_tail(independent, ones, lambdas, 20000, 3);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.total_variance == 1024.0);
    CHECK(t.rows[0].lambda == 64.0);
    CHECK(t.rows[0].empirical_p <= 0.25 + 3 * t.rows[0].std_error);
    CHECK(t.rows[1].empirical_p == 0.0);
    CHECK(t.fitted_constant == doctest::Approx(t.rows[0].implied_constant));

    const auto variances = log_uniform_variances(1024, 4.0, 12);
    std::vector<double> scales;
    for (double var : variances) scales.push_back(std::sqrt(var));
    const std::vector<double> multiples{2.0, 4.0, 8.0};
    const TailTable k4 = mc_tail(kwise(1024, 4), scales, multiples, 20000, 4);
    for (const auto& row : k4.rows) CHECK(row.empirical_p <= row.bound + 3 * row.std_error);

    std::ostringstream out;
    k4.write_csv(out);
    CHECK(out.str().rfind("lambda,empirical_p,stderr,bound,", 0) == 0);

    FamilySpec pairwise;
    pairwise.kind = FamilyKind::AdversarialStage;
    pairwise.n = 1024;
    CHECK_THROWS_AS(mc_tail(pairwise, ones, lambdas, 100, 1), InvalidParameter);
    CHECK_THROWS_AS(mc_tail(kwise(1024, 4), std::vector<double>(3, 1.0), lambdas, 100, 1), InvalidParameter);
}

TEST_CASE("tail estimates do not depend on the worker count") {
    const std::vector<double> ones(256, 1.0);
    const std::vector<double> multiples{1.0, 2.0};
    const TailTable a = mc_tail(kwise(256, 4), ones, multiples, 5000, 8, 1);
    const TailTable b = mc_tail(kwise(256, 4), ones, multiples, 5000, 8, 3);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.rows[i].empirical_p == b.rows[i].empirical_p);
}
