#include "kwalk/streams.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "kwalk/parallel.hpp"

namespace kwalk::streams {

namespace {

double int_power(double x, unsigned k) {
    double out = 1.0;
    for (unsigned j = 0; j < k; ++j) out *= x;
    return out;
}

void require_even_order(unsigned k, unsigned minimum) {
    require(k >= minimum && k % 2 == 0,
            "moment order must be even and >= " + std::to_string(minimum) + " (got " + std::to_string(k) + ")");
}

void require_independence(const FamilySpec& spec, unsigned k) {
    const std::uint64_t needed = k <= 2 ? 2 : k;
    require(spec.independence() >= needed, "family " + to_string(spec.kind) + " is only " +
                                               std::to_string(spec.independence()) + "-wise independent; order " +
                                               std::to_string(k) + " needs " + std::to_string(needed));
}

}  // namespace

void InsertionStream::validate() const {
    require(!items.empty(), "stream is empty");
    require(std::has_single_bit(items.size()), "stream length must be a power of two (got " +
                                                   std::to_string(items.size()) + ")");
    require(n >= 1, "stream dimension must be positive");
    for (std::uint32_t p : items) {
        require(p >= 1 && p <= n, "stream item " + std::to_string(p) + " outside [1, " + std::to_string(n) + "]");
    }
}

std::uint64_t InsertionStream::squared_norm() const {
    std::vector<std::uint64_t> counts(n + 1, 0);
    std::uint64_t total = 0;
    for (std::uint32_t p : items) total += 2 * counts[p]++ + 1;
    return total;
}

unsigned InsertionStream::top_level() const {
    return 2 * static_cast<unsigned>(std::countr_zero(items.size())) + 1;
}

std::string to_string(Generator g) {
    switch (g) {
        case Generator::Identity: return "identity";
        case Generator::SingleItem: return "single-item";
        case Generator::TwoPhaseHeavy: return "two-phase-heavy";
        case Generator::UniformRandom: return "uniform-random";
        case Generator::DyadicBursts: return "dyadic-bursts";
    }
    return "?";
}

Generator parse_generator(const std::string& text) {
    for (Generator g : all_generators()) {
        if (to_string(g) == text) return g;
    }
    throw InvalidParameter("unknown stream generator '" + text + "'");
}

const std::vector<Generator>& all_generators() {
    static const std::vector<Generator> all{Generator::Identity, Generator::SingleItem, Generator::TwoPhaseHeavy,
                                            Generator::UniformRandom, Generator::DyadicBursts};
    return all;
}

InsertionStream generate(Generator g, std::uint64_t m, std::uint64_t n, std::uint64_t seed) {
    require(std::has_single_bit(m), "stream length must be a power of two");
    require(m <= (std::uint64_t{1} << 30), "stream length too large");
    InsertionStream s;
    s.n = g == Generator::Identity ? m : n;
    require(s.n >= 1 && s.n <= 0xFFFFFFFFu, "stream dimension out of range");
    s.items.reserve(m);
    switch (g) {
        case Generator::Identity:
            for (std::uint64_t j = 1; j <= m; ++j) s.items.push_back(static_cast<std::uint32_t>(j));
            break;
        case Generator::SingleItem:
            s.items.assign(m, 1);
            break;
        case Generator::TwoPhaseHeavy:
            require(n >= 2, "two-phase stream needs n >= 2");
            for (std::uint64_t j = 0; j < m; ++j) {
                s.items.push_back(j < m / 2 ? 1u : static_cast<std::uint32_t>((j - m / 2) % (n - 1) + 2));
            }
            break;
        case Generator::UniformRandom: {
            CounterRng rng(seed);
            for (std::uint64_t j = 0; j < m; ++j) s.items.push_back(static_cast<std::uint32_t>(rng.below(n) + 1));
            break;
        }
        case Generator::DyadicBursts:
            for (std::uint64_t b = 0; s.items.size() < m; ++b) {
                const auto item = static_cast<std::uint32_t>(b % n + 1);
                const std::uint64_t copies = std::min<std::uint64_t>(std::uint64_t{1} << std::min<std::uint64_t>(b, 40),
                                                                     m - s.items.size());
                s.items.insert(s.items.end(), copies, item);
            }
            break;
    }
    return s;
}

void write_stream(const InsertionStream& stream, std::ostream& out) {
    for (std::uint32_t p : stream.items) out << p << '\n';
}

InsertionStream read_stream(std::istream& in, std::uint64_t n) {
    InsertionStream s;
    std::string line;
    std::size_t line_no = 0;
    std::uint64_t largest = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string token = line.substr(first, last - first + 1);
        std::size_t used = 0;
        unsigned long long value = 0;
        try {
            value = std::stoull(token, &used, 10);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == token.size() && value >= 1 && value <= 0xFFFFFFFFull,
                "stream line " + std::to_string(line_no) + ": expected a positive item index, got '" + token + "'");
        s.items.push_back(static_cast<std::uint32_t>(value));
        largest = std::max<std::uint64_t>(largest, value);
    }
    s.n = n > 0 ? n : largest;
    s.validate();
    return s;
}

NetHierarchy::NetHierarchy(const InsertionStream& stream) : stream_(stream) {
    stream_.validate();
    const std::size_t m = stream_.m();
    const std::uint64_t n = stream_.n;
    {
        std::vector<std::uint64_t> counts(n + 1, 0);
        prefix_norms_.assign(m + 1, 0);
        for (std::size_t t = 1; t <= m; ++t) {
            prefix_norms_[t] = prefix_norms_[t - 1] + 2 * counts[stream_.items[t - 1]]++ + 1;
        }
        squared_norm_ = prefix_norms_[m];
    }
    const unsigned top = stream_.top_level();
    levels_.resize(top + 1);

    // distance to the last net point via counts since that point; stamps avoid clearing
    std::vector<std::uint64_t> diff(n + 1, 0);
    std::vector<std::uint64_t> stamp(n + 1, 0);
    std::uint64_t epoch = 0;
    const auto z2 = static_cast<unsigned __int128>(squared_norm_);
    for (unsigned r = 0; r <= top; ++r) {
        auto& level = levels_[r];
        level.push_back({0, 0});
        ++epoch;
        unsigned __int128 dist2 = 0;
        for (std::size_t t = 1; t <= m; ++t) {
            const std::uint32_t p = stream_.items[t - 1];
            if (stamp[p] != epoch) {
                stamp[p] = epoch;
                diff[p] = 0;
            }
            dist2 += 2 * static_cast<unsigned __int128>(diff[p]) + 1;
            ++diff[p];
            if ((dist2 << r) > z2) {
                level.push_back({t, 0});
                ++epoch;
                dist2 = 0;
            }
        }
        if (r == 0) continue;
        const auto& previous = levels_[r - 1];
        std::size_t parent = 0;
        for (auto& point : level) {
            while (parent + 1 < previous.size() && previous[parent + 1].time <= point.time) ++parent;
            point.parent = parent;
        }
    }
}

void NetHierarchy::write_csv(std::ostream& out) const {
    out << "r,s,time,parent_s\n";
    for (unsigned r = 0; r < levels_.size(); ++r) {
        for (std::size_t s = 0; s < levels_[r].size(); ++s) {
            out << r << ',' << s << ',' << levels_[r][s].time << ',';
            if (r > 0) out << levels_[r][s].parent;
            out << '\n';
        }
    }
}

NetHierarchy build_nets(const InsertionStream& stream) { return NetHierarchy(stream); }

std::uint64_t squared_distance(const InsertionStream& stream, std::uint64_t u, std::uint64_t t) {
    require(u <= t && t <= stream.m(), "squared_distance: need u <= t <= m");
    std::map<std::uint32_t, std::uint64_t> counts;
    for (std::uint64_t j = u; j < t; ++j) ++counts[stream.items[j]];
    std::uint64_t total = 0;
    for (const auto& [item, c] : counts) total += c * c;
    return total;
}

bool coverage_check(const NetHierarchy& nets, unsigned r) {
    require(r <= nets.top_level(), "coverage_check: level out of range");
    const auto& stream = nets.stream();
    const auto& level = nets.level(r);
    const auto z2 = static_cast<unsigned __int128>(nets.squared_norm());
    std::map<std::uint32_t, std::uint64_t> diff;
    unsigned __int128 dist2 = 0;
    std::size_t next = 1;
    if (level.empty() || level[0].time != 0) return false;
    for (std::size_t t = 1; t <= stream.m(); ++t) {
        std::uint64_t& c = diff[stream.items[t - 1]];
        dist2 += 2 * static_cast<unsigned __int128>(c) + 1;
        ++c;
        if (next < level.size() && level[next].time == t) {
            diff.clear();
            dist2 = 0;
            ++next;
        }
        if ((dist2 << r) > z2) return false;
    }
    return next == level.size();
}

bool separation_check(const NetHierarchy& nets, unsigned r) {
    require(r <= nets.top_level(), "separation_check: level out of range");
    const auto& level = nets.level(r);
    if (r < 64 && level.size() - 1 > (std::uint64_t{1} << r)) return false;
    const auto z2 = static_cast<unsigned __int128>(nets.squared_norm());
    const auto& norms = nets.prefix_squared_norms();
    for (std::size_t s = 1; s < level.size(); ++s) {
        if (level[s].time <= level[s - 1].time) return false;
        const std::uint64_t d2 = squared_distance(nets.stream(), level[s - 1].time, level[s].time);
        if (!((static_cast<unsigned __int128>(d2) << r) > z2)) return false;
        // insertion-only: ||z^(t)||^2 - ||z^(u)||^2 >= ||z^(t) - z^(u)||^2
        if (norms[level[s].time] - norms[level[s - 1].time] < d2) return false;
    }
    return true;
}

std::vector<double> prefix_inner_products(const InsertionStream& stream, std::span<const double> x) {
    require(x.size() == stream.n, "inner product: X must have length n");
    std::vector<double> p(stream.m() + 1, 0.0);
    for (std::size_t t = 1; t <= stream.m(); ++t) p[t] = p[t - 1] + x[stream.items[t - 1] - 1];
    return p;
}

namespace {

template <typename Term>
double chain_sum(const NetHierarchy& nets, Term term) {
    double total = 0.0;
    for (unsigned r = 1; r <= nets.top_level(); ++r) {
        const auto& level = nets.level(r);
        const auto& previous = nets.level(r - 1);
        double level_sum = 0.0;
        for (const auto& point : level) level_sum += term(previous[point.parent].time, point.time);
        total += level_sum;
    }
    return total;
}

template <typename Term>
double weighted_chain_sum(const NetHierarchy& nets, Term term) {
    double total = 0.0;
    for (unsigned r = 1; r <= nets.top_level(); ++r) {
        const auto& level = nets.level(r);
        const auto& previous = nets.level(r - 1);
        double level_sum = 0.0;
        for (const auto& point : level) level_sum += term(previous[point.parent].time, point.time);
        total += std::exp2(0.5 * r) * level_sum;
    }
    return total;
}

double sparse_delta_inner(const InsertionStream& stream, std::span<const double> x, std::uint64_t u,
                          std::uint64_t t) {
    std::map<std::uint32_t, std::int64_t> delta;
    for (std::uint64_t j = u; j < t; ++j) ++delta[stream.items[j]];
    double inner = 0.0;
    for (const auto& [item, c] : delta) inner += static_cast<double>(c) * x[item - 1];
    return inner;
}

}  // namespace

double chain_form_quadratic(const NetHierarchy& nets, std::span<const double> x) {
    const auto p = prefix_inner_products(nets.stream(), x);
    return chain_sum(nets, [&](std::uint64_t u, std::uint64_t t) {
        const double d = p[t] - p[u];
        return d * d;
    });
}

double chain_form_k(const NetHierarchy& nets, std::span<const double> x, unsigned k) {
    require_even_order(k, 4);
    const auto p = prefix_inner_products(nets.stream(), x);
    return weighted_chain_sum(nets, [&](std::uint64_t u, std::uint64_t t) { return int_power(p[t] - p[u], k); });
}

double chain_form_quadratic_sparse(const NetHierarchy& nets, std::span<const double> x) {
    require(x.size() == nets.stream().n, "inner product: X must have length n");
    return chain_sum(nets, [&](std::uint64_t u, std::uint64_t t) {
        const double d = sparse_delta_inner(nets.stream(), x, u, t);
        return d * d;
    });
}

double chain_form_k_sparse(const NetHierarchy& nets, std::span<const double> x, unsigned k) {
    require_even_order(k, 4);
    require(x.size() == nets.stream().n, "inner product: X must have length n");
    return weighted_chain_sum(nets, [&](std::uint64_t u, std::uint64_t t) {
        return int_power(sparse_delta_inner(nets.stream(), x, u, t), k);
    });
}

double chain_constant(unsigned k, std::uint64_t m) {
    require_even_order(k, 2);
    require(std::has_single_bit(m), "m must be a power of two");
    const double rho = std::exp2(-1.0 / (2.0 * k));
    const double levels = 2.0 * std::countr_zero(m) + 1.0;
    return int_power((1.0 - rho) / (1.0 - std::pow(rho, levels)), k);
}

double sup_inner(const InsertionStream& stream, std::span<const double> x) {
    require(x.size() == stream.n, "sup_inner: X must have length n");
    double running = 0.0, best = 0.0;
    for (std::uint32_t p : stream.items) {
        running += x[p - 1];
        best = std::max(best, std::abs(running));
    }
    return best;
}

double sup_inner(const InsertionStream& stream, const SignVector& x) {
    require(x.size() == stream.n, "sup_inner: X must have length n");
    std::int64_t running = 0, best = 0;
    for (std::uint32_t p : stream.items) {
        running += x[p - 1];
        best = std::max(best, running < 0 ? -running : running);
    }
    return static_cast<double>(best);
}

double moment_constant(unsigned k) {
    if (k == 2) return 1.0;
    if (k == 4) return 3.0;
    throw InvalidParameter("moment constant only available for k = 2 and k = 4 (got " + std::to_string(k) + ")");
}

Rational rademacher_fourth_moment(std::span<const std::int64_t> v) {
    mpz_class norm2 = 0, quartic = 0;
    for (std::int64_t x : v) {
        const mpz_class sq = mpz_class(static_cast<long>(x)) * static_cast<long>(x);
        norm2 += sq;
        quartic += sq * sq;
    }
    return Rational(3 * norm2 * norm2 - 2 * quartic);
}

ExactMomentCheck mz_moment_exact(std::span<const std::int64_t> v, unsigned k, unsigned family_k) {
    moment_constant(k);
    require(!v.empty() && v.size() <= 16, "exact moment check needs 1 <= n <= 16");
    const auto n = static_cast<std::uint64_t>(v.size());
    const KWiseSampler sampler(n, family_k, BinaryField::for_domain(n).width());
    mpz_class total = 0;
    std::uint64_t count = 0;
    sampler.for_each_polynomial([&](const SignVector& h) {
        std::int64_t inner = 0;
        for (std::size_t i = 0; i < v.size(); ++i) inner += v[i] * h[i];
        mpz_class power = 1;
        for (unsigned j = 0; j < k; ++j) power *= static_cast<long>(inner);
        total += power;
        ++count;
    });
    mpz_class norm2 = 0;
    for (std::int64_t x : v) norm2 += mpz_class(static_cast<long>(x)) * static_cast<long>(x);
    mpz_class norm_k = 1;
    for (unsigned j = 0; j < k / 2; ++j) norm_k *= norm2;

    ExactMomentCheck check;
    check.moment = Rational(total, mpz_class(static_cast<unsigned long>(count)));
    check.moment.canonicalize();
    check.bound = Rational(norm_k * static_cast<long>(moment_constant(k)));
    check.family_size = count;
    return check;
}

McMomentCheck mz_moment_mc(std::span<const double> v, unsigned k, const FamilySpec& spec, std::uint64_t trials,
                           std::uint64_t seed, unsigned workers) {
    const double b = moment_constant(k);
    spec.validate();
    require_independence(spec, k);
    require(v.size() == spec.n, "mz_moment_mc: v must have length n");
    const FamilySampler sampler(spec);
    const auto values = run_trials<double>(trials, seed, workers, [&](CounterRng& rng, std::size_t) {
        thread_local SignVector h;
        sampler.sample(rng, h);
        double inner = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) inner += v[i] * h[i];
        return int_power(inner, k);
    });
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    const MeanStderr stats = mean_and_stderr(values);
    return McMomentCheck{stats.mean, stats.std_error, b * std::pow(norm2, k / 2.0)};
}

SupEstimate mc_sup_moment(const InsertionStream& stream, const FamilySpec& spec, unsigned k, std::uint64_t trials,
                          std::uint64_t seed, unsigned workers) {
    stream.validate();
    spec.validate();
    require(k >= 1, "moment order must be positive");
    require_independence(spec, k);
    require(spec.n == stream.n, "family size must equal the stream dimension");
    require(trials >= 2, "mc_sup_moment needs trials >= 2");
    const FamilySampler sampler(spec);
    const auto values = run_trials<double>(trials, seed, workers, [&](CounterRng& rng, std::size_t) {
        thread_local SignVector h;
        sampler.sample(rng, h);
        return int_power(sup_inner(stream, h), k);
    });
    const MeanStderr stats = mean_and_stderr(values);
    return SupEstimate{k, stats.mean, stats.std_error, trials, stream.m()};
}

ChainExpectation mc_chain_quadratic(const NetHierarchy& nets, const FamilySpec& spec, std::uint64_t trials,
                                    std::uint64_t seed, unsigned workers) {
    spec.validate();
    require_independence(spec, 2);
    require(spec.n == nets.stream().n, "family size must equal the stream dimension");
    const FamilySampler sampler(spec);
    const auto values = run_trials<double>(trials, seed, workers, [&](CounterRng& rng, std::size_t) {
        thread_local SignVector h;
        thread_local std::vector<double> x;
        sampler.sample(rng, h);
        x.assign(h.entries().begin(), h.entries().end());
        return chain_form_quadratic(nets, x);
    });
    const MeanStderr stats = mean_and_stderr(values);
    const double bound =
        2.0 * moment_constant(2) * nets.top_level() * static_cast<double>(nets.squared_norm());
    return ChainExpectation{stats.mean, stats.std_error, bound};
}

}  // namespace kwalk::streams
