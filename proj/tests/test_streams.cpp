#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "kwalk/streams.hpp"

using namespace kwalk;
using namespace kwalk::streams;

namespace {

FamilySpec kwise(std::uint64_t n, unsigned k) {
    FamilySpec s;
    s.kind = FamilyKind::PolynomialKWise;
    s.n = n;
    s.k = k;
    return s;
}

FamilySpec adversarial(std::uint64_t n) {
    FamilySpec s;
    s.kind = FamilyKind::AdversarialStage;
    s.n = n;
    return s;
}

// dense prefix vectors z^(t), recomputed from scratch
std::vector<std::vector<std::int64_t>> prefixes(const InsertionStream& s) {
    std::vector<std::vector<std::int64_t>> z(s.m() + 1, std::vector<std::int64_t>(s.n, 0));
    for (std::size_t t = 1; t <= s.m(); ++t) {
        z[t] = z[t - 1];
        ++z[t][s.items[t - 1] - 1];
    }
    return z;
}

std::int64_t dist2(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
    std::int64_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

// greedy nets straight from the definition on dense vectors: times per level
std::vector<std::vector<std::uint64_t>> oracle_nets(const InsertionStream& s) {
    const auto z = prefixes(s);
    const std::int64_t total = dist2(z.back(), z.front());
    const unsigned top = 2 * static_cast<unsigned>(std::log2(static_cast<double>(s.m()))) + 1;
    std::vector<std::vector<std::uint64_t>> out(top + 1);
    for (unsigned r = 0; r <= top; ++r) {
        out[r].push_back(0);
        for (std::uint64_t t = 1; t <= s.m(); ++t) {
            // ||z^t - last|| > 2^{-r/2} ||z||  <=>  2^r dist^2 > ||z||^2
            if (std::ldexp(static_cast<double>(dist2(z[t], z[out[r].back()])), static_cast<int>(r)) >
                static_cast<double>(total)) {
                out[r].push_back(t);
            }
        }
    }
    return out;
}

std::vector<double> random_signs(std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = static_cast<double>(rng.sign());
    return x;
}

std::vector<InsertionStream> test_streams() {
    std::vector<InsertionStream> out;
    for (Generator g : all_generators()) {
        for (std::uint64_t m : {16, 64, 256}) out.push_back(generate(g, m, 16, m));
    }
    return out;
}

double brute_sup(const InsertionStream& s, std::span<const double> x) {
    const auto z = prefixes(s);
    double best = 0.0;
    for (std::size_t t = 1; t < z.size(); ++t) {
        double inner = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) inner += static_cast<double>(z[t][i]) * x[i];
        best = std::max(best, std::abs(inner));
    }
    return best;
}

}  // namespace

TEST_CASE("generators") {
    const InsertionStream id = generate(Generator::Identity, 8, 3);
    CHECK(id.n == 8);
    CHECK(id.items == std::vector<std::uint32_t>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(id.squared_norm() == 8);
    CHECK(id.top_level() == 7);
    const InsertionStream single = generate(Generator::SingleItem, 16, 5);
    CHECK(single.squared_norm() == 256);
    const InsertionStream two = generate(Generator::TwoPhaseHeavy, 8, 3);
    CHECK(two.items == std::vector<std::uint32_t>{1, 1, 1, 1, 2, 3, 2, 3});
    const InsertionStream bursts = generate(Generator::DyadicBursts, 8, 4);
    CHECK(bursts.items == std::vector<std::uint32_t>{1, 2, 2, 3, 3, 3, 3, 4});
    for (Generator g : all_generators()) {
        CHECK(parse_generator(to_string(g)) == g);
        const InsertionStream s = generate(g, 64, 16, 9);
        CHECK_NOTHROW(s.validate());
        CHECK(s.m() == 64);
    }
    CHECK_THROWS_AS(parse_generator("zigzag"), InvalidParameter);
    CHECK_THROWS_AS(generate(Generator::UniformRandom, 12, 4), InvalidParameter);
    CHECK_THROWS_AS(generate(Generator::TwoPhaseHeavy, 8, 1), InvalidParameter);
    InsertionStream bad{4, {1, 5}};
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    CHECK_THROWS_AS(build_nets(InsertionStream{4, {}}), InvalidParameter);
}

TEST_CASE("stream text round trip") {
    const InsertionStream s = generate(Generator::UniformRandom, 32, 10, 4);
    std::stringstream io;
    write_stream(s, io);
    const InsertionStream back = read_stream(io, 10);
    CHECK(back.items == s.items);
    CHECK(back.n == 10);
    std::istringstream plain("3\n1\n2\n2\n");
    const InsertionStream inferred = read_stream(plain);
    CHECK(inferred.n == 3);
    CHECK(inferred.m() == 4);
    std::istringstream junk("1\nx\n");
    CHECK_THROWS_AS(read_stream(junk), InvalidParameter);
}

TEST_CASE("identity stream nets by hand") {
    const NetHierarchy nets = build_nets(generate(Generator::Identity, 16, 16));
    CHECK(nets.top_level() == 9);
    CHECK(nets.d(0) == 0);
    // level r steps by the first squared distance above 16 * 2^-r
    const std::vector<std::uint64_t> step{17, 9, 5, 3, 2, 1};
    for (unsigned r = 1; r <= 5; ++r) {
        std::vector<std::uint64_t> expect{0};
        for (std::uint64_t t = step[r]; t <= 16; t += step[r]) expect.push_back(t);
        std::vector<std::uint64_t> got;
        for (const auto& p : nets.level(r)) got.push_back(p.time);
        CHECK(got == expect);
    }
    for (unsigned r = 5; r <= nets.top_level(); ++r) CHECK(nets.d(r) == 16);
    CHECK(nets.level(2)[1].parent == 0);
    CHECK(nets.level(3)[2].parent == 1);  // time 10, last level-2 point at or before is t = 5
}

TEST_CASE("single-item stream is a scalar walk") {
    const std::uint64_t m = 64;
    const NetHierarchy nets = build_nets(generate(Generator::SingleItem, m, 3));
    for (unsigned r = 0; r <= nets.top_level(); ++r) {
        const auto& level = nets.level(r);
        // spacing is the smallest integer strictly above m 2^{-r/2}
        std::uint64_t gap = 1;
        while (gap * gap * (1ull << r) <= m * m) ++gap;
        for (std::size_t s = 1; s < level.size(); ++s) CHECK(level[s].time - level[s - 1].time == gap);
        CHECK(level.size() == 1 + m / gap);
    }
}

TEST_CASE("nets match the dense oracle on every generator") {
    for (const auto& s : test_streams()) {
        const NetHierarchy nets = build_nets(s);
        const auto expect = oracle_nets(s);
        REQUIRE(nets.top_level() + 1 == expect.size());
        const auto z = prefixes(s);
        for (unsigned r = 0; r <= nets.top_level(); ++r) {
            std::vector<std::uint64_t> got;
            for (const auto& p : nets.level(r)) got.push_back(p.time);
            CHECK(got == expect[r]);
            CHECK(nets.d(r) <= (std::uint64_t{1} << std::min(r, 63u)));
            CHECK(coverage_check(nets, r));
            CHECK(separation_check(nets, r));
            if (r == 0) continue;
            for (const auto& p : nets.level(r)) {
                const auto& prev = nets.level(r - 1);
                CHECK(prev[p.parent].time <= p.time);
                if (p.parent + 1 < prev.size()) CHECK(prev[p.parent + 1].time > p.time);
            }
        }
        // every distinct prefix is a top-level point
        CHECK(nets.d(nets.top_level()) == s.m());
        for (std::size_t t = 0; t <= s.m(); ++t) {
            CHECK(nets.prefix_squared_norms()[t] == static_cast<std::uint64_t>(dist2(z[t], z[0])));
            if (t > 0) CHECK(squared_distance(s, t / 2, t) == static_cast<std::uint64_t>(dist2(z[t], z[t / 2])));
        }
    }
}

TEST_CASE("large streams keep the net invariants") {
    for (Generator g : all_generators()) {
        const NetHierarchy nets = build_nets(generate(g, 1 << 14, 64, 3));
        for (unsigned r = 0; r <= nets.top_level(); ++r) {
            CHECK(coverage_check(nets, r));
            CHECK(separation_check(nets, r));
        }
    }
}

TEST_CASE("net csv") {
    const NetHierarchy nets = build_nets(generate(Generator::Identity, 4, 4));
    std::ostringstream out;
    nets.write_csv(out);
    CHECK(out.str().rfind("r,s,time,parent_s\n0,0,0,\n1,0,0,0\n1,1,3,0\n2,0,0,0\n2,1,2,0\n2,2,4,1\n", 0) == 0);
}

TEST_CASE("chain forms on hand-sized inputs") {
    const NetHierarchy nets = build_nets(generate(Generator::Identity, 4, 4));
    const std::vector<double> zero(4, 0.0);
    CHECK(chain_form_quadratic(nets, zero) == 0.0);
    CHECK(chain_form_k(nets, zero, 4) == 0.0);
    // levels for m = n = 4: {0}, {0,3}, {0,2,4}, then every prefix for r = 3, 4, 5
    // r=1: 3^2 from 0; r=2: (2-0)^2, (4-3)^2; r=3: t=1 and t=3 one step past a level-2 point; r>=4: 0
    const std::vector<double> ones(4, 1.0);
    CHECK(chain_form_quadratic(nets, ones) == 9.0 + 4.0 + 1.0 + 2.0);
    const double k4 = std::exp2(0.5) * 81.0 + 2.0 * (16.0 + 1.0) + std::exp2(1.5) * 2.0;
    CHECK(chain_form_k(nets, ones, 4) == doctest::Approx(k4));
    CHECK_THROWS_AS(chain_form_quadratic(nets, std::vector<double>(3)), InvalidParameter);
    CHECK_THROWS_AS(chain_form_k(nets, ones, 3), InvalidParameter);
    CHECK_THROWS_AS(chain_form_k(nets, ones, 2), InvalidParameter);
}

TEST_CASE("sparse-delta and prefix routes agree") {
    for (const auto& s : test_streams()) {
        const NetHierarchy nets = build_nets(s);
        const auto x = random_signs(s.n, s.m());
        CHECK(chain_form_quadratic_sparse(nets, x) == doctest::Approx(chain_form_quadratic(nets, x)));
        CHECK(chain_form_k_sparse(nets, x, 4) == doctest::Approx(chain_form_k(nets, x, 4)));
        CHECK(chain_form_k_sparse(nets, x, 6) == doctest::Approx(chain_form_k(nets, x, 6)));
    }
}

TEST_CASE("geometric constant") {
    const double rho = std::exp2(-1.0 / 8.0);
    const double l = 2.0 * 10 + 1;
    CHECK(chain_constant(4, 1024) == doctest::Approx(std::pow((1 - rho) / (1 - std::pow(rho, l)), 4)));
    // the weights rho^{L-r} (1-rho)/(1-rho^L) sum to one
    double sum = 0.0;
    for (int r = 1; r <= 21; ++r) sum += std::pow(rho, 21 - r);
    CHECK(sum * std::pow(chain_constant(4, 1024), 0.25) == doctest::Approx(1.0));
    CHECK_THROWS_AS(chain_constant(3, 64), InvalidParameter);
    CHECK_THROWS_AS(chain_constant(4, 48), InvalidParameter);
}

TEST_CASE("deterministic chain dominance") {
    std::uint64_t realization = 0;
    for (const auto& s : test_streams()) {
        const NetHierarchy nets = build_nets(s);
        const double levels = static_cast<double>(s.top_level());
        for (int rep = 0; rep < 20; ++rep) {
            const auto x = random_signs(s.n, mix(99, ++realization));
            const auto p = prefix_inner_products(s, x);
            const double q = chain_form_quadratic(nets, x);
            for (double v : p) CHECK(q >= v * v / levels - 1e-9);
            const double sup = sup_inner(s, x);
            for (unsigned k : {4u, 6u}) {
                CHECK(chain_form_k(nets, x, k) >= chain_constant(k, s.m()) * std::pow(sup, k) * (1 - 1e-12));
            }
        }
    }
    // single item: sup is m |X_1| exactly
    const InsertionStream single = generate(Generator::SingleItem, 256, 2);
    const NetHierarchy nets = build_nets(single);
    const std::vector<double> x{-1.0, 1.0};
    CHECK(sup_inner(single, x) == 256.0);
    CHECK(chain_form_k(nets, x, 4) >= chain_constant(4, 256) * std::pow(256.0, 4));
}

TEST_CASE("sup_inner") {
    for (const auto& s : test_streams()) {
        const auto x = random_signs(s.n, 5 + s.m());
        CHECK(sup_inner(s, x) == brute_sup(s, x));
    }
    const InsertionStream s = generate(Generator::UniformRandom, 1024, 50, 8);
    std::vector<double> scaled(50);
    CounterRng rng(8);
    for (double& v : scaled) v = rng.uniform() - 0.5;
    CHECK(sup_inner(s, scaled) == doctest::Approx(brute_sup(s, scaled)));
    // identity stream reduces to the walk sup
    const InsertionStream id = generate(Generator::Identity, 128, 128);
    CounterRng signs(10);
    SignVector v(128);
    for (std::size_t i = 0; i < 128; ++i) v[i] = static_cast<std::int8_t>(signs.sign());
    CHECK(sup_inner(id, v) == static_cast<double>(sup_abs_prefix(v)));
    CHECK(sup_inner(generate(Generator::SingleItem, 64, 4), SignVector(4, -1)) == 64.0);
}

TEST_CASE("moment constants and exact moment checks") {
    CHECK(moment_constant(2) == 1.0);
    CHECK(moment_constant(4) == 3.0);
    CHECK_THROWS_AS(moment_constant(6), InvalidParameter);

    const std::vector<std::int64_t> e1{1, 0, 0, 0};
    for (unsigned k : {2u, 4u}) {
        const auto c = mz_moment_exact(e1, k, k);
        CHECK(c.moment == 1);
        CHECK(c.holds());
    }
    CounterRng rng(3);
    for (int t = 0; t < 10; ++t) {
        std::vector<std::int64_t> v(16);
        std::int64_t norm2 = 0;
        for (auto& a : v) {
            a = static_cast<std::int64_t>(rng.below(7)) - 3;
            norm2 += a * a;
        }
        if (norm2 == 0) continue;
        const auto two = mz_moment_exact(v, 2, 2);
        CHECK(two.moment == Rational(norm2));
        CHECK(two.family_size == 256);
        const auto four = mz_moment_exact(v, 4, 4);
        CHECK(four.moment == rademacher_fourth_moment(v));
        CHECK(four.bound == Rational(3 * norm2 * norm2));
        CHECK(four.holds());
        CHECK(four.family_size == 65536);
    }
    // 3||v||^4 - 2 sum v^4, by hand
    const std::vector<std::int64_t> v{1, 2};
    CHECK(rademacher_fourth_moment(v) == Rational(3 * 25 - 2 * 17));
    CHECK_THROWS_AS(mz_moment_exact(std::vector<std::int64_t>(17, 1), 2, 2), InvalidParameter);
    CHECK_THROWS_AS(mz_moment_exact(v, 6, 6), InvalidParameter);
}

TEST_CASE("Monte Carlo moment check") {
    std::vector<double> v(64);
    CounterRng rng(4);
    for (double& a : v) a = rng.uniform();
    const auto c = mz_moment_mc(v, 4, kwise(64, 4), 20000, 6);
    CHECK(c.holds());
    double norm2 = 0.0, quartic = 0.0;
    for (double a : v) {
        norm2 += a * a;
        quartic += a * a * a * a;
    }
    CHECK(std::abs(c.moment - (3 * norm2 * norm2 - 2 * quartic)) <= 5 * c.std_error);
    const auto h = mz_moment_mc(v, 2, adversarial(64), 20000, 6);
    CHECK(std::abs(h.moment - norm2) <= 5 * h.std_error);
    CHECK_THROWS_AS(mz_moment_mc(v, 4, adversarial(64), 100, 1), InvalidParameter);
}

TEST_CASE("sup moment estimates") {
    const InsertionStream id = generate(Generator::Identity, 256, 256);
    CHECK_THROWS_AS(mc_sup_moment(id, adversarial(256), 4, 100, 1), InvalidParameter);
    CHECK_THROWS_AS(mc_sup_moment(id, kwise(128, 4), 4, 100, 1), InvalidParameter);
    CHECK_NOTHROW(mc_sup_moment(id, adversarial(256), 2, 100, 1));

    // identity stream against the walks module
    const SupEstimate stream_side = mc_sup_moment(id, adversarial(256), 2, 4000, 21);
    const SupEstimate walk_side = estimate_sup_moment(adversarial(256), 2, 4000, 21);
    CHECK(stream_side.mean == doctest::Approx(walk_side.mean));
    CHECK(stream_side.n == 256);

    const InsertionStream s = generate(Generator::TwoPhaseHeavy, 1024, 32);
    const SupEstimate a = mc_sup_moment(s, kwise(32, 4), 4, 3000, 2, 1);
    const SupEstimate b = mc_sup_moment(s, kwise(32, 4), 4, 3000, 2, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.mean / std::pow(static_cast<double>(s.squared_norm()), 2) < 10.0);
}

TEST_CASE("chain expectation contract") {
    for (Generator g : all_generators()) {
        const InsertionStream s = generate(g, 256, g == Generator::Identity ? 256 : 16, 1);
        const NetHierarchy nets = build_nets(s);
        for (const FamilySpec& spec : {kwise(s.n, 2), adversarial(s.n)}) {
            const ChainExpectation e = mc_chain_quadratic(nets, spec, 2000, 3);
            CHECK(e.bound == doctest::Approx(2.0 * 17 * static_cast<double>(s.squared_norm())));
            CHECK(e.mean <= e.bound + 4 * e.std_error);
        }
    }
}
