#include "kwalk/walks.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include "kwalk/parallel.hpp"

namespace kwalk {

std::vector<std::int64_t> prefix_sums(const SignVector& v) {
    std::vector<std::int64_t> sums(v.size() + 1, 0);
    for (std::size_t i = 0; i < v.size(); ++i) sums[i + 1] = sums[i] + v[i];
    return sums;
}

std::int64_t sup_abs_prefix(std::span<const std::int8_t> v) {
    std::int64_t running = 0;
    std::int64_t best = 0;
    for (std::int8_t step : v) {
        running += step;
        best = std::max(best, std::abs(running));
    }
    return best;
}

std::int64_t sup_abs_prefix(const SignVector& v) { return sup_abs_prefix(v.entries()); }

SupEstimate estimate_sup_moment(const FamilySpec& spec, unsigned moment_order, std::uint64_t trials,
                                std::uint64_t seed, unsigned workers) {
    require(trials >= 100, "estimate_sup_moment needs trials >= 100");
    require(moment_order >= 1, "moment order must be positive");
    const FamilySampler sampler(spec);
    auto values = run_trials<double>(trials, seed, workers, [&](CounterRng& rng, std::size_t) {
        thread_local SignVector h;
        sampler.sample(rng, h);
        return std::pow(static_cast<double>(sup_abs_prefix(h)), static_cast<double>(moment_order));
    });
    const MeanStderr stats = mean_and_stderr(values);
    return SupEstimate{moment_order, stats.mean, stats.std_error, trials, spec.n};
}

Rational drift_check_h1(const AdversarialParams& params, std::uint64_t block) {
    require(block >= 1 && block <= params.root, "block index out of range");
    Rational sum = 0;
    for (std::uint64_t c = 1; c <= block; ++c) sum += params.f[c - 1];
    sum *= static_cast<unsigned long>(params.root);
    sum.canonicalize();
    return sum;
}

void ScalingTable::write_csv(std::ostream& out) const {
    out << "n,moment_order,mean,stderr,trials,seed\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : rows) {
        out << row.n << ',' << row.estimate.moment_order << ',' << row.estimate.mean << ','
            << row.estimate.std_error << ',' << row.estimate.trials << ',' << seed << '\n';
    }
    out.precision(old_precision);
}

ScalingTable scaling_table(const FamilySpec& spec_template, std::span<const std::uint64_t> ns,
                           unsigned moment_order, std::uint64_t trials, std::uint64_t seed, unsigned workers) {
    ScalingTable table;
    table.seed = seed;
    std::uint64_t previous = 0;
    for (std::uint64_t n : ns) {
        require(is_power_of_four(n), "scaling table sizes must be powers of 4 (got " + std::to_string(n) + ")");
        require(n > previous, "scaling table sizes must be strictly increasing");
        previous = n;
        FamilySpec spec = spec_template.with_n(n);
        table.rows.push_back({n, estimate_sup_moment(spec, moment_order, trials, mix(seed, n), workers)});
    }
    return table;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "fit needs equal-length inputs");
    require(x.size() >= 3, "fit needs at least 3 points");
    const auto count = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, "fit needs at least two distinct x values");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        rss += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
    fit.slope_std_error = std::sqrt(rss / (count - 2.0) / sxx);
    return fit;
}

double normalized_mean(const ScalingRow& row) {
    const auto n = static_cast<double>(row.n);
    const double scale = std::pow(n, static_cast<double>(row.estimate.moment_order) / 2.0);
    return row.estimate.mean / scale;
}

LineFit fit_log_growth(const ScalingTable& table) {
    require(table.rows.size() >= 3, "fit_log_growth needs at least 3 rows");
    std::vector<double> x, y;
    for (const auto& row : table.rows) {
        x.push_back(std::log2(static_cast<double>(row.n)));
        y.push_back(normalized_mean(row));
    }
    return fit_line(x, y);
}

}  // namespace kwalk
