#include "kwalk/sign_families.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <stdexcept>

#include "kwalk/parallel.hpp"

namespace kwalk {

// ---------------------------------------------------------------------------
// FamilySpec

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::FullyIndependent: return "FullyIndependent";
        case FamilyKind::PolynomialKWise: return "PolynomialKWise";
        case FamilyKind::AdversarialStage: return "AdversarialStage";
    }
    return "?";
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::H1: return "H1";
        case Stage::H2: return "H2";
        case Stage::H3: return "H3";
        case Stage::H: return "H";
    }
    return "?";
}

FamilyKind parse_family_kind(const std::string& text) {
    if (text == "FullyIndependent") return FamilyKind::FullyIndependent;
    if (text == "PolynomialKWise") return FamilyKind::PolynomialKWise;
    if (text == "AdversarialStage") return FamilyKind::AdversarialStage;
    throw InvalidParameter("unknown family kind '" + text + "'");
}

Stage parse_stage(const std::string& text) {
    if (text == "H1") return Stage::H1;
    if (text == "H2") return Stage::H2;
    if (text == "H3") return Stage::H3;
    if (text == "H") return Stage::H;
    throw InvalidParameter("unknown stage '" + text + "'");
}

bool is_power_of_two(std::uint64_t n) noexcept { return std::has_single_bit(n); }

bool is_power_of_four(std::uint64_t n) noexcept {
    return std::has_single_bit(n) && (std::countr_zero(n) % 2 == 0);
}

std::uint64_t exact_sqrt(std::uint64_t n) noexcept {
    std::uint64_t r = 0;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

void FamilySpec::validate() const {
    require(n >= 1, "n must be positive");
    switch (kind) {
        case FamilyKind::FullyIndependent:
            break;
        case FamilyKind::PolynomialKWise:
            require(k >= 2, "k-wise family needs k >= 2 (got k=" + std::to_string(k) + ")");
            require(k <= n, "k-wise family needs k <= n (got k=" + std::to_string(k) + ", n=" +
                                std::to_string(n) + ")");
            break;
        case FamilyKind::AdversarialStage:
            require(is_power_of_four(n) && n >= 16,
                    "adversarial family needs n a power of 4 with n >= 16 (got n=" + std::to_string(n) + ")");
            break;
    }
}

std::uint64_t FamilySpec::independence() const {
    switch (kind) {
        case FamilyKind::FullyIndependent: return n;
        case FamilyKind::PolynomialKWise: return k;
        case FamilyKind::AdversarialStage: return stage == Stage::H ? 2 : 0;
    }
    return 0;
}

FamilySpec FamilySpec::with_n(std::uint64_t new_n) const {
    FamilySpec copy = *this;
    copy.n = new_n;
    return copy;
}

std::map<std::string, std::string> FamilySpec::to_fields() const {
    std::map<std::string, std::string> fields;
    fields["kind"] = to_string(kind);
    fields["n"] = std::to_string(n);
    fields["seed"] = std::to_string(seed);
    if (kind == FamilyKind::PolynomialKWise) fields["k"] = std::to_string(k);
    if (kind == FamilyKind::AdversarialStage) fields["stage"] = to_string(stage);
    return fields;
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &used, 10);
    } catch (const std::exception&) {
        throw InvalidParameter("field '" + key + "' is not a decimal integer: '" + text + "'");
    }
    if (used != text.size() || text.empty() || text[0] == '-') {
        throw InvalidParameter("field '" + key + "' is not a decimal integer: '" + text + "'");
    }
    return value;
}

}  // namespace

FamilySpec FamilySpec::from_fields(const std::map<std::string, std::string>& fields) {
    FamilySpec spec;
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = fields.find(key);
        return it == fields.end() ? nullptr : &it->second;
    };
    const std::string* kind = get("kind");
    if (kind == nullptr) throw InvalidParameter("family spec is missing 'kind'");
    spec.kind = parse_family_kind(*kind);
    const std::string* n = get("n");
    if (n == nullptr) throw InvalidParameter("family spec is missing 'n'");
    spec.n = parse_u64("n", *n);
    if (const std::string* seed = get("seed")) spec.seed = parse_u64("seed", *seed);
    if (spec.kind == FamilyKind::PolynomialKWise) {
        const std::string* k = get("k");
        if (k == nullptr) throw InvalidParameter("PolynomialKWise spec is missing 'k'");
        spec.k = static_cast<unsigned>(parse_u64("k", *k));
    }
    if (spec.kind == FamilyKind::AdversarialStage) {
        const std::string* stage = get("stage");
        spec.stage = stage == nullptr ? Stage::H : parse_stage(*stage);
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// SignVector

SignVector::SignVector(std::vector<std::int8_t> entries) : entries_(std::move(entries)) {}

SignVector SignVector::negated() const {
    SignVector out(*this);
    for (auto& e : out.entries_) e = static_cast<std::int8_t>(-e);
    return out;
}

bool SignVector::valid() const noexcept {
    return std::all_of(entries_.begin(), entries_.end(), [](std::int8_t e) { return e == 1 || e == -1; });
}

std::string to_string(const Rational& value) { return value.get_str(); }

// ---------------------------------------------------------------------------
// Closed-form constants

std::vector<Rational> f_values(std::uint64_t root) {
    require(root >= 2 && root % 2 == 0, "block count must be even and >= 2 (got " + std::to_string(root) + ")");
    const std::uint64_t ell = root / 2;
    std::vector<Rational> f;
    f.reserve(root);
    for (std::uint64_t c = 1; c <= root; ++c) {
        if (c <= ell) {
            f.emplace_back(1, static_cast<unsigned long>(ell + 1 - c));
        } else {
            Rational value(1, static_cast<unsigned long>(c - ell));
            f.push_back(-value);
        }
    }
    for (auto& v : f) v.canonicalize();
    return f;
}

std::vector<Rational> g_table(std::uint64_t root) {
    const std::vector<Rational> f = f_values(root);
    // g depends only on (c2 - c1) mod root, so compute one row and rotate.
    std::vector<Rational> by_offset(root);
    for (std::uint64_t offset = 0; offset < root; ++offset) {
        Rational sum = 0;
        for (std::uint64_t d = 0; d < root; ++d) sum += f[d] * f[(d + offset) % root];
        by_offset[offset] = sum / static_cast<unsigned long>(root);
    }
    std::vector<Rational> g(root * root);
    for (std::uint64_t c1 = 0; c1 < root; ++c1) {
        for (std::uint64_t c2 = 0; c2 < root; ++c2) {
            g[c1 * root + c2] = by_offset[(c2 + root - c1) % root];
        }
    }
    return g;
}

AdversarialParams adversarial_params_from_table(std::uint64_t n, std::vector<Rational> g) {
    require(is_power_of_four(n) && n >= 16,
            "adversarial family needs n a power of 4 with n >= 16 (got n=" + std::to_string(n) + ")");
    AdversarialParams params;
    params.n = n;
    params.root = exact_sqrt(n);
    params.ell = params.root / 2;
    params.f = f_values(params.root);
    require(g.size() == params.root * params.root, "g-table has the wrong size");
    params.g = std::move(g);

    const std::uint64_t root = params.root;
    params.g_scale = 1;
    for (std::uint64_t c1 = 1; c1 <= root; ++c1) {
        for (std::uint64_t c2 = c1 + 1; c2 <= root; ++c2) params.g_scale += abs(params.g_at(c1, c2));
    }
    // E_{H3}[h_i h_j] for i != j in block 1: (g_11 + sum_{c != 1} |g_1c|) / gScale.
    Rational row = params.g_at(1, 1);
    for (std::uint64_t c = 2; c <= root; ++c) row += abs(params.g_at(1, c));
    params.c6 = row / params.g_scale * static_cast<unsigned long>(root);
    const Rational root_q(static_cast<unsigned long>(root));
    params.p = 1 / (1 + params.c6 * (root_q - 1) / root_q);
    return params;
}

AdversarialParams adversarial_params(std::uint64_t n) {
    require(is_power_of_four(n) && n >= 16,
            "adversarial family needs n a power of 4 with n >= 16 (got n=" + std::to_string(n) + ")");
    return adversarial_params_from_table(n, g_table(exact_sqrt(n)));
}

// ---------------------------------------------------------------------------
// Adversarial sampler

AdversarialSampler::AdversarialSampler(AdversarialParams params) : params_(std::move(params)) {
    const std::uint64_t root = params_.root;
    plus_probability_.resize(root);
    for (std::uint64_t c = 0; c < root; ++c) {
        plus_probability_[c] = Rational((1 + params_.f[c]) / 2).get_d();
    }
    Rational cumulative = 1 / params_.g_scale;
    h3_cdf_.push_back(cumulative.get_d());
    for (std::uint64_t c1 = 1; c1 <= root; ++c1) {
        for (std::uint64_t c2 = c1 + 1; c2 <= root; ++c2) {
            pairs_.emplace_back(c1, c2);
            pair_second_sign_.push_back(sgn(params_.g_at(c1, c2)) >= 0 ? -1 : 1);
            cumulative += abs(params_.g_at(c1, c2)) / params_.g_scale;
            h3_cdf_.push_back(cumulative.get_d());
        }
    }
    h3_cdf_.back() = 1.0;
    p_ = params_.p.get_d();
}

std::size_t AdversarialSampler::select_h3_mode(double u) const noexcept {
    auto it = std::upper_bound(h3_cdf_.begin(), h3_cdf_.end(), u);
    if (it == h3_cdf_.end()) --it;
    return static_cast<std::size_t>(it - h3_cdf_.begin());
}

void AdversarialSampler::sample_h1(CounterRng& rng, SignVector& out) const {
    const std::uint64_t root = params_.root;
    out.resize(params_.n);
    for (std::uint64_t c = 0; c < root; ++c) {
        const double p_plus = plus_probability_[c];
        for (std::uint64_t i = c * root; i < (c + 1) * root; ++i) out[i] = rng.bernoulli(p_plus) ? 1 : -1;
    }
}

void AdversarialSampler::shift_blocks(const SignVector& in, std::uint64_t d, SignVector& out) const {
    const std::uint64_t n = params_.n;
    const std::uint64_t offset = (d % params_.root) * params_.root;
    out.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = in[(i + offset) % n];
}

void AdversarialSampler::sample_h2(CounterRng& rng, SignVector& out) const {
    SignVector base;
    sample_h1(rng, base);
    const std::uint64_t d = rng.below(params_.root);
    shift_blocks(base, d, out);
}

void AdversarialSampler::sample_pair_mode(std::uint64_t c1, std::uint64_t c2, CounterRng& rng,
                                          SignVector& out) const {
    const std::uint64_t root = params_.root;
    require(c1 >= 1 && c1 < c2 && c2 <= root, "pair mode needs 1 <= c1 < c2 <= root");
    const std::int8_t second = sgn(params_.g_at(c1, c2)) >= 0 ? -1 : 1;
    out.resize(params_.n);
    for (std::uint64_t c = 1; c <= root; ++c) {
        for (std::uint64_t i = (c - 1) * root; i < c * root; ++i) {
            if (c == c1) {
                out[i] = 1;
            } else if (c == c2) {
                out[i] = second;
            } else {
                out[i] = static_cast<std::int8_t>(rng.sign());
            }
        }
    }
}

void AdversarialSampler::sample_h3(CounterRng& rng, SignVector& out) const {
    const std::size_t mode = select_h3_mode(rng.uniform());
    if (mode == 0) {
        sample_h2(rng, out);
        return;
    }
    const auto [c1, c2] = pairs_[mode - 1];
    sample_pair_mode(c1, c2, rng, out);
}

void AdversarialSampler::sample_balanced_blocks(CounterRng& rng, SignVector& out) const {
    const std::uint64_t root = params_.root;
    const std::uint64_t ell = params_.ell;
    out.resize(params_.n);
    for (std::uint64_t c = 0; c < root; ++c) {
        const std::uint64_t base = c * root;
        for (std::uint64_t j = 0; j < root; ++j) out[base + j] = j < ell ? 1 : -1;
        // Fisher-Yates over the block.
        for (std::uint64_t j = root - 1; j > 0; --j) {
            const std::uint64_t swap_with = rng.below(j + 1);
            std::swap(out[base + j], out[base + swap_with]);
        }
    }
}

void AdversarialSampler::sample_h(CounterRng& rng, SignVector& out) const {
    if (rng.bernoulli(p_)) {
        sample_h3(rng, out);
        if (rng.sign() < 0) {
            for (auto& e : out.entries()) e = static_cast<std::int8_t>(-e);
        }
        return;
    }
    sample_balanced_blocks(rng, out);
}

void AdversarialSampler::sample(Stage stage, CounterRng& rng, SignVector& out) const {
    switch (stage) {
        case Stage::H1: sample_h1(rng, out); return;
        case Stage::H2: sample_h2(rng, out); return;
        case Stage::H3: sample_h3(rng, out); return;
        case Stage::H: sample_h(rng, out); return;
    }
}

// ---------------------------------------------------------------------------
// Polynomial k-wise sampler

KWiseSampler::KWiseSampler(std::uint64_t n, unsigned k, unsigned field_width)
    : n_(n), k_(k), field_(field_width) {
    require(k >= 2, "k-wise family needs k >= 2 (got k=" + std::to_string(k) + ")");
    require(k <= n, "k-wise family needs k <= n");
    require(field_.order() >= n, "field GF(2^" + std::to_string(field_width) + ") is smaller than n=" +
                                     std::to_string(n));
    rows_.resize(n_ * (k_ - 1));
    for (std::uint64_t i = 0; i < n_; ++i) {
        std::uint64_t power = 1;
        for (unsigned j = 1; j < k_; ++j) {
            power = field_.mul(power, i);
            rows_[i * (k_ - 1) + (j - 1)] = field_.lsb_row(power);
        }
    }
}

void KWiseSampler::signs_for(std::span<const std::uint64_t> coefficients, SignVector& out) const {
    require(coefficients.size() == k_, "expected k coefficients");
    out.resize(n_);
    const std::uint64_t constant_bit = coefficients[0] & 1;
    for (std::uint64_t i = 0; i < n_; ++i) {
        std::uint64_t bit = constant_bit;
        const std::uint64_t* row = rows_.data() + i * (k_ - 1);
        for (unsigned j = 1; j < k_; ++j) bit ^= static_cast<std::uint64_t>(std::popcount(coefficients[j] & row[j - 1]));
        out[i] = (bit & 1) ? -1 : 1;
    }
}

void KWiseSampler::signs_by_evaluation(std::span<const std::uint64_t> coefficients, SignVector& out) const {
    require(coefficients.size() == k_, "expected k coefficients");
    out.resize(n_);
    for (std::uint64_t i = 0; i < n_; ++i) out[i] = (field_.evaluate(coefficients, i) & 1) ? -1 : 1;
}

void KWiseSampler::sample(CounterRng& rng, SignVector& out) const {
    std::uint64_t coefficients[64];
    for (unsigned j = 0; j < k_; ++j) coefficients[j] = rng() & field_.mask();
    signs_for(std::span<const std::uint64_t>(coefficients, k_), out);
}

KWiseSampler make_kwise(std::uint64_t n, unsigned k, unsigned field_width) {
    require(k >= 2 && k <= n, "k-wise family needs 2 <= k <= n");
    require(k <= 64, "k above 64 is not supported");
    return KWiseSampler(n, k, field_width);
}

// ---------------------------------------------------------------------------
// FamilySampler

FamilySampler::FamilySampler(const FamilySpec& spec, unsigned field_width) : spec_(spec) {
    spec_.validate();
    switch (spec_.kind) {
        case FamilyKind::FullyIndependent:
            break;
        case FamilyKind::PolynomialKWise:
            impl_.emplace<KWiseSampler>(make_kwise(spec_.n, spec_.k, field_width));
            break;
        case FamilyKind::AdversarialStage:
            impl_.emplace<AdversarialSampler>(adversarial_params(spec_.n));
            break;
    }
}

void FamilySampler::sample(CounterRng& rng, SignVector& out) const {
    switch (spec_.kind) {
        case FamilyKind::FullyIndependent: {
            out.resize(spec_.n);
            // 64 signs per draw.
            std::uint64_t bits = 0;
            for (std::uint64_t i = 0; i < spec_.n; ++i) {
                if (i % 64 == 0) bits = rng();
                out[i] = (bits & 1) ? -1 : 1;
                bits >>= 1;
            }
            return;
        }
        case FamilyKind::PolynomialKWise:
            std::get<KWiseSampler>(impl_).sample(rng, out);
            return;
        case FamilyKind::AdversarialStage:
            std::get<AdversarialSampler>(impl_).sample(spec_.stage, rng, out);
            return;
    }
}

SignVector FamilySampler::sample(CounterRng& rng) const {
    SignVector out;
    sample(rng, out);
    return out;
}

// ---------------------------------------------------------------------------
// Exact moments

MomentSummary::MomentSummary(std::uint64_t n, std::uint64_t root, std::vector<Rational> block_mean,
                             std::vector<Rational> block_cov)
    : n_(n), root_(root), block_mean_(std::move(block_mean)), block_cov_(std::move(block_cov)) {}

Rational MomentSummary::mean(std::uint64_t i) const { return block_mean_[(i - 1) / root_]; }

Rational MomentSummary::covariance(std::uint64_t i, std::uint64_t j) const {
    if (i == j) return 1;
    return block_cov_[((i - 1) / root_) * root_ + (j - 1) / root_];
}

bool MomentSummary::means_all_zero() const {
    return std::all_of(block_mean_.begin(), block_mean_.end(), [](const Rational& v) { return v == 0; });
}

bool MomentSummary::covariance_is_identity() const {
    return std::all_of(block_cov_.begin(), block_cov_.end(), [](const Rational& v) { return v == 0; });
}

bool MomentSummary::covariance_symmetric() const {
    for (std::uint64_t a = 0; a < root_; ++a) {
        for (std::uint64_t b = 0; b < a; ++b) {
            if (block_cov_[a * root_ + b] != block_cov_[b * root_ + a]) return false;
        }
    }
    return true;
}

Rational MomentSummary::off_diagonal_abs_sum() const {
    // Each block pair holds root^2 ordered index pairs, minus the diagonal
    // when the blocks coincide.
    Rational total = 0;
    const unsigned long block = static_cast<unsigned long>(root_);
    for (std::uint64_t a = 0; a < root_; ++a) {
        for (std::uint64_t b = 0; b < root_; ++b) {
            const unsigned long pairs = a == b ? block * (block - 1) : block * block;
            total += abs(block_cov_[a * root_ + b]) * pairs;
        }
    }
    return total;
}

void MomentSummary::write_covariance_csv(std::ostream& out) const {
    out << "row,col,value\n";
    for (std::uint64_t i = 1; i <= n_; ++i) {
        for (std::uint64_t j = 1; j <= n_; ++j) out << i << ',' << j << ',' << covariance(i, j).get_str() << '\n';
    }
}

namespace {

// Block-level moments accumulated as a weighted mixture.
struct BlockMoments {
    std::uint64_t root;
    std::vector<Rational> mean;
    std::vector<Rational> cov;

    explicit BlockMoments(std::uint64_t r) : root(r), mean(r, Rational(0)), cov(r * r, Rational(0)) {}
    Rational& at(std::uint64_t a, std::uint64_t b) { return cov[a * root + b]; }
};

BlockMoments moments_h1(const AdversarialParams& params) {
    BlockMoments m(params.root);
    for (std::uint64_t a = 0; a < params.root; ++a) {
        m.mean[a] = params.f[a];
        for (std::uint64_t b = 0; b < params.root; ++b) m.at(a, b) = params.f[a] * params.f[b];
    }
    return m;
}

BlockMoments moments_h2(const AdversarialParams& params) {
    // Averaging H1 over the root cyclic block shifts.
    const std::uint64_t root = params.root;
    const BlockMoments base = moments_h1(params);
    BlockMoments m(root);
    const Rational weight(1, static_cast<unsigned long>(root));
    for (std::uint64_t d = 0; d < root; ++d) {
        for (std::uint64_t a = 0; a < root; ++a) {
            m.mean[a] += weight * base.mean[(a + d) % root];
            for (std::uint64_t b = 0; b < root; ++b) {
                m.at(a, b) += weight * base.cov[((a + d) % root) * root + (b + d) % root];
            }
        }
    }
    return m;
}

BlockMoments moments_h3(const AdversarialParams& params) {
    const std::uint64_t root = params.root;
    BlockMoments m = moments_h2(params);
    const Rational h2_weight = 1 / params.g_scale;
    for (auto& v : m.mean) v *= h2_weight;
    for (auto& v : m.cov) v *= h2_weight;
    // Pair mode (a, b): blocks a and b are constant (+1 and s_b), every other
    // entry is an independent uniform sign. Only these entries are nonzero.
    for (std::uint64_t a = 0; a < root; ++a) {
        for (std::uint64_t b = a + 1; b < root; ++b) {
            const Rational& gab = params.g[a * root + b];
            const Rational w = abs(gab) / params.g_scale;
            const int second = sgn(gab) >= 0 ? -1 : 1;
            m.mean[a] += w;
            m.mean[b] += w * second;
            m.at(a, a) += w;
            m.at(b, b) += w;
            m.at(a, b) += w * second;
            m.at(b, a) += w * second;
        }
    }
    return m;
}

BlockMoments moments_h(const AdversarialParams& params) {
    const std::uint64_t root = params.root;
    const std::uint64_t ell = params.ell;
    const BlockMoments h3 = moments_h3(params);
    BlockMoments m(root);
    const Rational half(1, 2);
    // Negated H3 with probability 1/2: means cancel, products are unchanged.
    for (std::uint64_t a = 0; a < root; ++a) {
        m.mean[a] = params.p * (half * h3.mean[a] - half * h3.mean[a]);
    }
    for (std::size_t e = 0; e < m.cov.size(); ++e) m.cov[e] = params.p * h3.cov[e];
    // Balanced blocks: blocks independent with mean 0; inside a block, of the
    // root*(root-1) ordered pairs 2*ell*(ell-1) agree and 2*ell^2 disagree.
    const unsigned long agree = static_cast<unsigned long>(2 * ell * (ell - 1));
    const unsigned long disagree = static_cast<unsigned long>(2 * ell * ell);
    const Rational within = (Rational(agree) - Rational(disagree)) / static_cast<unsigned long>(root * (root - 1));
    for (std::uint64_t a = 0; a < root; ++a) m.at(a, a) += (1 - params.p) * within;
    return m;
}

}  // namespace

MomentSummary exact_moments(const AdversarialParams& params, Stage stage) {
    if (params.n > kMaxExactMomentsN) {
        throw ResourceError("exact moments are limited to n <= " + std::to_string(kMaxExactMomentsN));
    }
    BlockMoments m(params.root);
    switch (stage) {
        case Stage::H1: m = moments_h1(params); break;
        case Stage::H2: m = moments_h2(params); break;
        case Stage::H3: m = moments_h3(params); break;
        case Stage::H: m = moments_h(params); break;
    }
    for (auto& v : m.mean) v.canonicalize();
    for (auto& v : m.cov) v.canonicalize();
    return MomentSummary(params.n, params.root, std::move(m.mean), std::move(m.cov));
}

MomentSummary exact_moments(const FamilySpec& spec) {
    require(spec.kind == FamilyKind::AdversarialStage, "exact moments are defined for adversarial stages only");
    spec.validate();
    if (spec.n > kMaxExactMomentsN) {
        throw ResourceError("exact moments are limited to n <= " + std::to_string(kMaxExactMomentsN));
    }
    return exact_moments(adversarial_params(spec.n), spec.stage);
}

// ---------------------------------------------------------------------------
// Empirical moments

void EmpiricalMoments::write_covariance_csv(std::ostream& out) const {
    out << "row,col,value\n";
    const auto old_precision = out.precision(17);
    for (std::uint64_t i = 1; i <= n; ++i) {
        for (std::uint64_t j = 1; j <= n; ++j) out << i << ',' << j << ',' << cov(i, j) << '\n';
    }
    out.precision(old_precision);
}

EmpiricalMoments empirical_moments(const FamilySampler& sampler, std::uint64_t trials, std::uint64_t seed,
                                   unsigned workers) {
    require(trials >= 1, "trials must be >= 1");
    const std::uint64_t n = sampler.spec().n;
    if (n > kMaxExactMomentsN) throw ResourceError("empirical covariance is limited to n <= 4096");

    // Fixed-size chunks of trials; each trial keeps its own substream, and
    // sums of +-1 products are integers, so the reduction is exact.
    constexpr std::uint64_t kChunk = 4096;
    const std::uint64_t chunks = (trials + kChunk - 1) / kChunk;
    struct Sums {
        std::vector<std::int64_t> first;
        std::vector<std::int64_t> second;
    };
    auto chunk_sums = run_trials<Sums>(chunks, seed, workers, [&](CounterRng&, std::size_t chunk) {
        Sums sums{std::vector<std::int64_t>(n, 0), std::vector<std::int64_t>(n * n, 0)};
        SignVector h;
        const std::uint64_t begin = chunk * kChunk;
        const std::uint64_t end = std::min(trials, begin + kChunk);
        for (std::uint64_t t = begin; t < end; ++t) {
            CounterRng rng(mix(seed, t));
            sampler.sample(rng, h);
            for (std::uint64_t i = 0; i < n; ++i) {
                sums.first[i] += h[i];
                std::int64_t* row = sums.second.data() + i * n;
                const int hi = h[i];
                for (std::uint64_t j = 0; j < n; ++j) row[j] += hi * h[j];
            }
        }
        return sums;
    });

    EmpiricalMoments out;
    out.n = n;
    out.trials = trials;
    out.mean.assign(n, 0.0);
    out.covariance.assign(n * n, 0.0);
    std::vector<std::int64_t> first(n, 0), second(n * n, 0);
    for (const auto& s : chunk_sums) {
        for (std::uint64_t i = 0; i < n; ++i) first[i] += s.first[i];
        for (std::uint64_t e = 0; e < n * n; ++e) second[e] += s.second[e];
    }
    const auto count = static_cast<double>(trials);
    for (std::uint64_t i = 0; i < n; ++i) out.mean[i] = static_cast<double>(first[i]) / count;
    for (std::uint64_t e = 0; e < n * n; ++e) out.covariance[e] = static_cast<double>(second[e]) / count;
    return out;
}

}  // namespace kwalk
