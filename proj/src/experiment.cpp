#include "kwalk/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "kwalk/dyadic_matrix.hpp"
#include "kwalk/maximal_inequality.hpp"
#include "kwalk/streams.hpp"
#include "kwalk/walks.hpp"

namespace kwalk {

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::FamilyVerify: return "family-verify";
        case ExperimentKind::WalkScaling: return "walk-scaling";
        case ExperimentKind::MatrixCheck: return "matrix-check";
        case ExperimentKind::MaximalMc: return "maximal-mc";
        case ExperimentKind::StreamTrack: return "stream-track";
        case ExperimentKind::NetAudit: return "net-audit";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    for (auto kind : {ExperimentKind::FamilyVerify, ExperimentKind::WalkScaling, ExperimentKind::MatrixCheck,
                      ExperimentKind::MaximalMc, ExperimentKind::StreamTrack, ExperimentKind::NetAudit}) {
        if (to_string(kind) == text) return kind;
    }
    throw InvalidParameter("unknown experiment kind '" + text + "'");
}

namespace {

std::uint64_t to_u64(const std::string& key, const std::string& text) {
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw InvalidParameter("'" + key + "' must be a non-negative integer");
    return value;
}

double to_double(const std::string& key, const std::string& text) {
    double value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw InvalidParameter("'" + key + "' must be a number");
    }
    return value;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = item.find_last_not_of(" \t");
        parts.push_back(item.substr(a, b - a + 1));
    }
    return parts;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) out += format_double(values[i]);
        else out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_pairs(const std::map<std::string, std::string>& pairs) {
    ExperimentConfig c;
    std::map<std::string, std::string> family;
    bool has_kind = false;
    for (const auto& [key, value] : pairs) {
        if (key.rfind("family.", 0) == 0) {
            family[key.substr(7)] = value;
        } else if (key == "experiment.kind") {
            c.kind = parse_experiment_kind(value);
            has_kind = true;
        } else if (key == "experiment.trials") {
            c.trials = to_u64(key, value);
        } else if (key == "experiment.seed") {
            c.seed = to_u64(key, value);
        } else if (key == "experiment.workers") {
            c.workers = static_cast<unsigned>(to_u64(key, value));
        } else if (key == "experiment.output") {
            c.output = value;
        } else if (key == "params.sizes") {
            c.sizes.clear();
            for (const auto& s : split_list(value)) c.sizes.push_back(to_u64(key, s));
        } else if (key == "params.moment_order") {
            c.moment_order = static_cast<unsigned>(to_u64(key, value));
        } else if (key == "params.lambdas") {
            c.lambda_multiples.clear();
            for (const auto& s : split_list(value)) c.lambda_multiples.push_back(to_double(key, s));
        } else if (key == "params.generator") {
            c.generator = value;
        } else if (key == "params.stream_n") {
            c.stream_n = to_u64(key, value);
        } else if (key == "params.decades") {
            c.decades = to_double(key, value);
        } else if (key == "params.expect") {
            require(value == "growth" || value == "flat" || value == "bounded" || value == "none",
                    "'params.expect' must be growth, flat, bounded or none");
            c.expect = value;
        } else if (key == "params.min_r_squared") {
            c.min_r_squared = to_double(key, value);
        } else if (key == "params.max_ratio") {
            c.max_ratio = to_double(key, value);
        } else {
            throw InvalidParameter("unknown config key '" + key + "'");
        }
    }
    require(has_kind, "config is missing experiment.kind");
    if (!family.empty()) {
        c.family = FamilySpec::from_fields(family);
        c.has_family = true;
    }
    c.family.seed = c.seed;
    return c;
}

std::map<std::string, std::string> ExperimentConfig::to_pairs() const {
    std::map<std::string, std::string> p;
    p["experiment.kind"] = to_string(kind);
    p["experiment.trials"] = std::to_string(trials);
    p["experiment.seed"] = std::to_string(seed);
    p["experiment.workers"] = std::to_string(workers);
    if (!output.empty()) p["experiment.output"] = output;
    if (has_family) {
        for (const auto& [k, v] : family.to_fields()) {
            if (k != "seed") p["family." + k] = v;
        }
    }
    if (!sizes.empty()) p["params.sizes"] = join(sizes);
    p["params.moment_order"] = std::to_string(moment_order);
    p["params.lambdas"] = join(lambda_multiples);
    p["params.generator"] = generator;
    p["params.stream_n"] = std::to_string(stream_n);
    p["params.decades"] = format_double(decades);
    p["params.expect"] = expect;
    p["params.min_r_squared"] = format_double(min_r_squared);
    p["params.max_ratio"] = format_double(max_ratio);
    return p;
}

ExperimentConfig parse_config(std::istream& in, const std::map<std::string, std::string>& overrides) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InvalidParameter(std::string("config: ") + e.what());
    }
    std::map<std::string, std::string> pairs;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw InvalidParameter("config key '" + section + "' must live in a section");
        for (const auto& [key, value] : body) pairs[section + "." + key] = value.data();
    }
    for (const auto& [key, value] : overrides) pairs[key] = value;
    if (pairs.empty()) throw InvalidParameter("config is empty");
    return ExperimentConfig::from_pairs(pairs);
}

ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot open config '" + path + "'");
    return parse_config(in, overrides);
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char ch : value) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return ec == std::errc() ? std::string(buffer, ptr) : std::string("nan");
}

bool ResultTable::all_pass() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

void ResultTable::write_csv(std::ostream& out) const {
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_field(row[i]);
        }
        out << "\r\n";
    };
    write_row(header);
    for (const auto& row : rows) write_row(row);
    for (const auto& [key, value] : footer) out << "# " << key << '=' << value << "\r\n";
}

void ResultTable::write_summary(std::ostream& out) const {
    for (const auto& a : assertions) {
        out << a.name << ": " << (a.pass ? "PASS" : "FAIL");
        if (!a.detail.empty()) out << " (" << a.detail << ')';
        out << '\n';
    }
}

namespace {

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

Assertion ratio_assertion(const std::string& name, const std::vector<double>& values, double max_ratio) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double ratio = *lo > 0.0 ? *hi / *lo : INFINITY;
    return {name, ratio <= max_ratio, "max/min=" + fmt(ratio) + " limit " + fmt(max_ratio)};
}

const FamilySpec& need_family(const ExperimentConfig& c) {
    require(c.has_family, to_string(c.kind) + " needs a [family] section");
    return c.family;
}

ResultTable run_family_verify(const ExperimentConfig& c) {
    const FamilySpec& spec = need_family(c);
    ResultTable t;
    t.header = {"n", "check", "value", "trials", "seed"};
    if (spec.kind == FamilyKind::AdversarialStage) {
        const MomentSummary m = exact_moments(spec);
        const bool zero = m.means_all_zero();
        const bool identity = m.covariance_is_identity();
        t.rows.push_back({fmt(spec.n), "exact_off_diagonal_abs_sum", to_string(m.off_diagonal_abs_sum()), "0",
                          fmt(c.seed)});
        t.assertions.push_back({"mean=0", zero, "exact"});
        t.assertions.push_back({"covariance=identity", identity, "exact"});
    }
    if (c.trials > 0 && spec.n <= 1024) {
        const FamilySampler sampler(spec);
        const EmpiricalMoments e = empirical_moments(sampler, c.trials, c.seed, c.workers);
        double max_mean = 0.0, max_off = 0.0, max_diag_err = 0.0;
        for (std::uint64_t i = 1; i <= spec.n; ++i) {
            max_mean = std::max(max_mean, std::abs(e.mean[i - 1]));
            for (std::uint64_t j = 1; j <= spec.n; ++j) {
                if (i == j) max_diag_err = std::max(max_diag_err, std::abs(e.cov(i, j) - 1.0));
                else max_off = std::max(max_off, std::abs(e.cov(i, j)));
            }
        }
        t.rows.push_back({fmt(spec.n), "empirical_max_abs_mean", fmt(max_mean), fmt(c.trials), fmt(c.seed)});
        t.rows.push_back({fmt(spec.n), "empirical_max_abs_off_diagonal", fmt(max_off), fmt(c.trials), fmt(c.seed)});
        t.rows.push_back({fmt(spec.n), "empirical_max_diagonal_error", fmt(max_diag_err), fmt(c.trials), fmt(c.seed)});
        // 5 standard errors of a +-1 average, union-bounded loosely over n^2 entries
        const double tolerance = 6.0 / std::sqrt(static_cast<double>(c.trials));
        t.assertions.push_back({"empirical moments within tolerance",
                                max_mean <= tolerance && max_off <= tolerance && max_diag_err == 0.0,
                                "tolerance " + fmt(tolerance)});
    }
    return t;
}

ResultTable run_walk_scaling(const ExperimentConfig& c) {
    const FamilySpec& spec = need_family(c);
    require(c.sizes.size() >= 1, "walk-scaling needs params.sizes");
    const ScalingTable table = scaling_table(spec, c.sizes, c.moment_order, c.trials, c.seed, c.workers);
    ResultTable t;
    t.header = {"n", "moment_order", "mean", "stderr", "normalized", "log_normalized", "trials", "seed"};
    std::vector<double> log_normalized;
    for (const auto& row : table.rows) {
        const double norm = normalized_mean(row);
        const double lg = std::log2(static_cast<double>(row.n));
        const double ln = norm / std::pow(lg, static_cast<double>(c.moment_order));
        log_normalized.push_back(ln);
        t.rows.push_back({fmt(row.n), std::to_string(c.moment_order), fmt(row.estimate.mean),
                          fmt(row.estimate.std_error), fmt(norm), fmt(ln), fmt(row.estimate.trials),
                          fmt(mix(c.seed, row.n))});
    }
    if (table.rows.size() >= 3) {
        const LineFit fit = fit_log_growth(table);
        t.footer["fit_slope"] = fmt(fit.slope);
        t.footer["fit_slope_stderr"] = fmt(fit.slope_std_error);
        t.footer["fit_r_squared"] = fmt(fit.r_squared);
        const std::string detail = "slope=" + fmt(fit.slope) + " se=" + fmt(fit.slope_std_error) +
                                   " R2=" + fmt(fit.r_squared);
        if (c.expect == "growth") {
            t.assertions.push_back(
                {"normalized mean grows with lg n", fit.slope > 0.0 && fit.r_squared >= c.min_r_squared, detail});
        } else if (c.expect == "flat") {
            t.assertions.push_back({"normalized mean flat in lg n",
                                    std::abs(fit.slope) <= 2.0 * fit.slope_std_error, detail});
        }
    }
    if (c.expect == "bounded") {
        t.assertions.push_back(ratio_assertion("normalized by lg^order n bounded", log_normalized, c.max_ratio));
    }
    return t;
}

ResultTable run_matrix_check(const ExperimentConfig& c) {
    ResultTable t;
    t.header = {"n", "trace", "expected_trace", "min_constrained", "inverse_lg_n", "corollary_normalized", "seed"};
    std::vector<std::uint64_t> sizes = c.sizes.empty() ? std::vector<std::uint64_t>{8} : c.sizes;
    bool traces = true, mins = true, corollaries = true;
    for (std::uint64_t n : sizes) {
        const unsigned lg = dyadic::log2_order(n);
        const std::int64_t trace = dyadic::trace(n);
        std::int64_t diagonal = 0;
        for (std::uint64_t i = 1; i <= n; ++i) diagonal += dyadic::entry(n, i, i);
        traces = traces && trace == diagonal && trace == static_cast<std::int64_t>(n * lg);
        std::string min_text = "", cor_text = "";
        if (n <= 1024) {
            const auto forms = dyadic::prefix_inverse_forms(n);
            const double min_value = 1.0 / *std::max_element(forms.begin(), forms.end());
            const double corollary = dyadic::corollary_ratio(n) / (static_cast<double>(n) * lg * lg);
            mins = mins && min_value >= 1.0 / lg - 1e-9;
            corollaries = corollaries && corollary > 0.0 && corollary <= 1.0;
            min_text = fmt(min_value);
            cor_text = fmt(corollary);
        }
        t.rows.push_back({fmt(n), std::to_string(trace), fmt(n * lg), min_text, fmt(1.0 / lg), cor_text,
                          fmt(c.seed)});
        if (n == 8) {
            static const int displayed[8][8] = {{3, 2, 1, 1, 0, 0, 0, 0}, {2, 3, 1, 1, 0, 0, 0, 0},
                                                {1, 1, 3, 2, 0, 0, 0, 0}, {1, 1, 2, 3, 0, 0, 0, 0},
                                                {0, 0, 0, 0, 3, 2, 1, 1}, {0, 0, 0, 0, 2, 3, 1, 1},
                                                {0, 0, 0, 0, 1, 1, 3, 2}, {0, 0, 0, 0, 1, 1, 2, 3}};
            bool match = true;
            for (int i = 0; i < 8; ++i) {
                for (int j = 0; j < 8; ++j) match = match && dyadic::entry(8, i + 1, j + 1) == displayed[i][j];
            }
            t.assertions.push_back({"displayed-matrix match", match, ""});
        }
    }
    t.assertions.push_back({"trace = n lg n", traces, ""});
    t.assertions.push_back({"constrained min >= 1/lg n", mins, ""});
    t.assertions.push_back({"corollary ratio in (0, 1]", corollaries, ""});
    return t;
}

ResultTable run_maximal_mc(const ExperimentConfig& c) {
    const FamilySpec& spec = need_family(c);
    const std::vector<double> variances = maximal::log_uniform_variances(spec.n, c.decades, mix(c.seed, 0x5CA1E));
    std::vector<double> scales(variances.size());
    std::transform(variances.begin(), variances.end(), scales.begin(), [](double v) { return std::sqrt(v); });
    const maximal::TailTable table = maximal::mc_tail(spec, scales, c.lambda_multiples, c.trials, c.seed, c.workers);
    ResultTable t;
    t.header = {"lambda", "empirical_p", "stderr", "bound", "lambda_multiple", "implied_constant", "n", "trials",
                "seed"};
    bool ok = true;
    for (const auto& row : table.rows) {
        t.rows.push_back({fmt(row.lambda), fmt(row.empirical_p), fmt(row.std_error), fmt(row.bound),
                          fmt(row.lambda_multiple), fmt(row.implied_constant), fmt(table.n), fmt(table.trials),
                          fmt(table.seed)});
        ok = ok && row.empirical_p <= row.bound + 3.0 * row.std_error;
    }
    t.footer["fitted_constant"] = fmt(table.fitted_constant);
    t.assertions.push_back({"P(sup >= lambda) <= sum sigma^2 / lambda^2 + 3 stderr", ok,
                            "fitted constant " + fmt(table.fitted_constant)});
    return t;
}

ResultTable run_stream_track(const ExperimentConfig& c) {
    const FamilySpec& base = need_family(c);
    require(!c.sizes.empty(), "stream-track needs params.sizes (m list)");
    const streams::Generator g = streams::parse_generator(c.generator);
    ResultTable t;
    t.header = {"m", "n", "generator", "moment_order", "mean", "stderr", "normalized", "trials", "seed"};
    std::vector<double> normalized;
    for (std::uint64_t m : c.sizes) {
        const streams::InsertionStream stream = streams::generate(g, m, c.stream_n, mix(c.seed, m));
        const FamilySpec spec = base.with_n(stream.n);
        const std::uint64_t row_seed = mix(c.seed, m);
        const SupEstimate e = streams::mc_sup_moment(stream, spec, c.moment_order, c.trials, row_seed, c.workers);
        const double z2 = static_cast<double>(stream.squared_norm());
        double scale = std::pow(z2, c.moment_order / 2.0);
        if (c.moment_order == 2) {
            const double lg = std::log2(static_cast<double>(m));
            scale *= lg * lg;
        }
        normalized.push_back(e.mean / scale);
        t.rows.push_back({fmt(m), fmt(stream.n), c.generator, std::to_string(c.moment_order), fmt(e.mean),
                          fmt(e.std_error), fmt(e.mean / scale), fmt(c.trials), fmt(row_seed)});
    }
    if (c.expect == "bounded") t.assertions.push_back(ratio_assertion("normalized moment bounded", normalized, c.max_ratio));
    return t;
}

ResultTable run_net_audit(const ExperimentConfig& c) {
    require(!c.sizes.empty(), "net-audit needs params.sizes (m list)");
    const streams::Generator g = streams::parse_generator(c.generator);
    ResultTable t;
    t.header = {"m", "r", "d_r", "limit", "coverage", "separation", "seed"};
    bool sizes_ok = true, coverage_ok = true, separation_ok = true, dominance_ok = true;
    for (std::uint64_t m : c.sizes) {
        const streams::InsertionStream stream = streams::generate(g, m, c.stream_n, mix(c.seed, m));
        const streams::NetHierarchy nets = streams::build_nets(stream);
        for (unsigned r = 0; r <= nets.top_level(); ++r) {
            const bool cov = streams::coverage_check(nets, r);
            const bool sep = streams::separation_check(nets, r);
            const std::uint64_t limit = std::uint64_t{1} << r;
            sizes_ok = sizes_ok && nets.d(r) <= limit;
            coverage_ok = coverage_ok && cov;
            separation_ok = separation_ok && sep;
            t.rows.push_back({fmt(m), std::to_string(r), fmt(static_cast<std::uint64_t>(nets.d(r))), fmt(limit),
                              cov ? "1" : "0", sep ? "1" : "0", fmt(mix(c.seed, m))});
        }
        const double levels = nets.top_level();
        const double c4 = streams::chain_constant(4, m);
        for (std::uint64_t trial = 0; trial < c.trials; ++trial) {
            CounterRng rng(mix(mix(c.seed, m), trial));
            std::vector<double> x(stream.n);
            for (double& v : x) v = rng.sign();
            const auto p = streams::prefix_inner_products(stream, x);
            double sup = 0.0;
            for (double v : p) sup = std::max(sup, std::abs(v));
            const double q = streams::chain_form_quadratic(nets, x);
            const double k4 = streams::chain_form_k(nets, x, 4);
            dominance_ok = dominance_ok && q * (1 + 1e-12) >= sup * sup / levels &&
                           k4 * (1 + 1e-12) >= c4 * std::pow(sup, 4);
        }
    }
    t.assertions.push_back({"d_r <= 2^r", sizes_ok, ""});
    t.assertions.push_back({"coverage", coverage_ok, "exact"});
    t.assertions.push_back({"separation", separation_ok, "exact"});
    t.assertions.push_back({"chain dominance", dominance_ok, fmt(c.trials) + " realizations per stream"});
    return t;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    ResultTable t;
    switch (config.kind) {
        case ExperimentKind::FamilyVerify: t = run_family_verify(config); break;
        case ExperimentKind::WalkScaling: t = run_walk_scaling(config); break;
        case ExperimentKind::MatrixCheck: t = run_matrix_check(config); break;
        case ExperimentKind::MaximalMc: t = run_maximal_mc(config); break;
        case ExperimentKind::StreamTrack: t = run_stream_track(config); break;
        case ExperimentKind::NetAudit: t = run_net_audit(config); break;
    }
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    t.footer["experiment"] = to_string(config.kind);
    t.footer["seed"] = std::to_string(config.seed);
    t.footer["version"] = kVersion;
    t.footer["wall_time_s"] = format_double(std::round(elapsed * 1000.0) / 1000.0);
    return t;
}

// ---------------------------------------------------------------------------
// verify

namespace {

void check(std::vector<Assertion>& out, std::string name, bool pass, std::string detail = "") {
    out.push_back({std::move(name), pass, std::move(detail)});
}

template <typename Fn>
void guarded(std::vector<Assertion>& out, const std::string& name, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        check(out, name, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

std::vector<Assertion> verify_suite(const VerifyOptions& options) {
    std::vector<Assertion> out;

    for (std::uint64_t n : {16, 64, 256}) {
        guarded(out, "family H n=" + std::to_string(n), [&] {
            std::vector<Rational> g = g_table(exact_sqrt(n));
            if (options.inject_sign_flip) g[1] = -g[1];  // entry (1, 2)
            const AdversarialParams params = adversarial_params_from_table(n, std::move(g));
            const MomentSummary m = exact_moments(params, Stage::H);
            check(out, "family H n=" + std::to_string(n) + " mean=0", m.means_all_zero(), "exact");
            check(out, "family H n=" + std::to_string(n) + " covariance=identity", m.covariance_is_identity(),
                  "off-diagonal |sum| " + to_string(m.off_diagonal_abs_sum()));
        });
    }

    guarded(out, "construction constants n=16", [&] {
        const AdversarialParams p = adversarial_params(16);
        const bool ok = p.g_at(1, 1) == Rational(5, 8) && p.g_scale == Rational(9, 4) && p.c6 == Rational(20, 9) &&
                        p.p == Rational(3, 8);
        check(out, "construction constants n=16", ok,
              "g11=" + to_string(p.g_at(1, 1)) + " gScale=" + to_string(p.g_scale) + " C6=" + to_string(p.c6) +
                  " p=" + to_string(p.p));
    });

    guarded(out, "H1 drift", [&] {
        const bool ok = drift_check_h1(adversarial_params(16), 2) == 6 && drift_check_h1(adversarial_params(16), 4) == 0 &&
                        drift_check_h1(adversarial_params(64), 4) == Rational(50, 3);
        check(out, "H1 drift values", ok);
    });

    guarded(out, "k-wise moments", [&] {
        bool second = true, fourth = true;
        CounterRng rng(7);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::int64_t> v(16);
            for (auto& x : v) x = static_cast<std::int64_t>(rng.below(21)) - 10;
            const auto two = streams::mz_moment_exact(v, 2, 2);
            second = second && two.moment == two.bound;
            const auto four = streams::mz_moment_exact(v, 4, 4);
            fourth = fourth && four.moment == streams::rademacher_fourth_moment(v) && four.holds();
        }
        check(out, "pairwise GF(16) second moment = ||v||^2", second, "exhaustive");
        check(out, "4-wise GF(16) fourth moment = 3||v||^4 - 2 sum v^4", fourth, "exhaustive");
    });

    guarded(out, "k-wise routes", [&] {
        const KWiseSampler sampler(64, 4);
        CounterRng rng(11);
        bool same = true;
        SignVector a, b;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::uint64_t> coefficients(4);
            for (auto& c : coefficients) c = rng();
            sampler.signs_for(coefficients, a);
            sampler.signs_by_evaluation(coefficients, b);
            same = same && a == b;
        }
        check(out, "k-wise mask route = evaluation route", same);
    });

    guarded(out, "dyadic matrix", [&] {
        bool traces = true;
        for (std::uint64_t n = 4; n <= 4096; n *= 2) {
            traces = traces && dyadic::trace(n) == static_cast<std::int64_t>(n * dyadic::log2_order(n));
        }
        check(out, "trace = n lg n, n = 4..4096", traces);
        static const int displayed[8][8] = {{3, 2, 1, 1, 0, 0, 0, 0}, {2, 3, 1, 1, 0, 0, 0, 0},
                                            {1, 1, 3, 2, 0, 0, 0, 0}, {1, 1, 2, 3, 0, 0, 0, 0},
                                            {0, 0, 0, 0, 3, 2, 1, 1}, {0, 0, 0, 0, 2, 3, 1, 1},
                                            {0, 0, 0, 0, 1, 1, 3, 2}, {0, 0, 0, 0, 1, 1, 2, 3}};
        bool match = true;
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 8; ++j) match = match && dyadic::entry(8, i + 1, j + 1) == displayed[i][j];
        }
        check(out, "n=8 matrix matches displayed matrix", match);
        bool blocks = true, mins = true, corollary = true;
        for (std::uint64_t n = 4; n <= 256; n *= 2) {
            const auto a = dyadic::dense(n);
            const auto b = dyadic::dense_from_blocks(n);
            for (std::size_t e = 0; e < a.size(); ++e) blocks = blocks && a[e] == static_cast<double>(b[e]);
            const auto forms = dyadic::prefix_inverse_forms(n);
            const double lg = dyadic::log2_order(n);
            for (double f : forms) mins = mins && 1.0 / f >= 1.0 / lg - 1e-9;
            const double ratio = dyadic::corollary_ratio(n) / (n * lg * lg);
            corollary = corollary && ratio > 0.0 && ratio <= 1.0;
        }
        check(out, "entry formula = dyadic block sum, n <= 256", blocks);
        check(out, "constrained min >= 1/lg n, n <= 256", mins);
        check(out, "corollary ratio / (n lg^2 n) in (0, 1], n <= 256", corollary);
    });

    guarded(out, "interval trees", [&] {
        bool invariants = true, telescopes = true;
        for (std::uint64_t profile_id = 0; profile_id < 20; ++profile_id) {
            const auto variances = maximal::log_uniform_variances(256, 4.0, mix(99, profile_id));
            const auto tree = maximal::build_tree(maximal::VarianceProfile(variances));
            invariants = invariants && maximal::check_tree(tree).ok;
            CounterRng rng(mix(100, profile_id));
            std::vector<double> s(257, 0.0);
            for (std::size_t i = 1; i <= 256; ++i) s[i] = s[i - 1] + std::sqrt(variances[i - 1]) * rng.sign();
            for (std::size_t i = 0; i <= 256; ++i) {
                const auto path = maximal::chain_path(tree, s, i);
                telescopes = telescopes && path.points.front() == 0 && path.points.back() == i &&
                             std::abs(maximal::telescope(path, s) - s[i]) <= 1e-9 * (1 + std::abs(s[i]));
            }
        }
        check(out, "interval tree invariants and rank mass, 20 profiles", invariants);
        check(out, "chain paths telescope", telescopes);
    });

    guarded(out, "nets", [&] {
        bool sizes = true, coverage = true, separation = true, dominance = true;
        for (auto g : streams::all_generators()) {
            for (std::uint64_t m : {64, 1024}) {
                const auto stream = streams::generate(g, m, 64, mix(5, m));
                const auto nets = streams::build_nets(stream);
                for (unsigned r = 0; r <= nets.top_level(); ++r) {
                    sizes = sizes && nets.d(r) <= (std::uint64_t{1} << r);
                    coverage = coverage && streams::coverage_check(nets, r);
                    separation = separation && streams::separation_check(nets, r);
                }
                const double levels = nets.top_level();
                const double c4 = streams::chain_constant(4, m);
                for (std::uint64_t trial = 0; trial < 10; ++trial) {
                    CounterRng rng(mix(m, trial));
                    std::vector<double> x(stream.n);
                    for (double& v : x) v = rng.sign();
                    const double sup = streams::sup_inner(stream, x);
                    dominance = dominance && streams::chain_form_quadratic(nets, x) * (1 + 1e-12) >= sup * sup / levels &&
                                streams::chain_form_k(nets, x, 4) * (1 + 1e-12) >= c4 * std::pow(sup, 4);
                }
            }
        }
        check(out, "net sizes d_r <= 2^r", sizes);
        check(out, "net coverage (exact)", coverage);
        check(out, "net separation (exact)", separation);
        check(out, "chain dominance, quadratic and k=4", dominance);
    });

    return out;
}

void write_assertions_json(const std::vector<Assertion>& assertions, std::ostream& out) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["passed"] = std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
    j["checks"] = nlohmann::json::array();
    for (const auto& a : assertions) {
        j["checks"].push_back({{"name", a.name}, {"status", a.pass ? "PASS" : "FAIL"}, {"detail", a.detail}});
    }
    out << j.dump(2) << '\n';
}

}  // namespace kwalk
