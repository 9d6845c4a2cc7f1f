#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kwalk/sign_families.hpp"

namespace kwalk {

inline constexpr const char* kVersion = "0.3.0";

enum class ExperimentKind { FamilyVerify, WalkScaling, MatrixCheck, MaximalMc, StreamTrack, NetAudit };
std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

/// One experiment. INI layout:
///   [experiment] kind, trials, seed, workers, output
///   [family]     kind, n, k, stage (FamilySpec fields)
///   [params]     sizes, moment_order, lambdas, generator, stream_n, decades,
///                expect, min_r_squared, max_ratio
/// `sizes` is the n list (walk-scaling, matrix-check) or m list (streams).
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::FamilyVerify;
    bool has_family = false;
    FamilySpec family;
    std::vector<std::uint64_t> sizes;
    unsigned moment_order = 1;
    std::vector<double> lambda_multiples{2.0, 4.0, 8.0};
    std::string generator = "identity";
    std::uint64_t stream_n = 64;
    double decades = 4.0;
    std::string expect = "none";  // growth | flat | bounded | none
    double min_r_squared = 0.9;
    double max_ratio = 3.0;
    std::uint64_t trials = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    std::string output;  // empty: stdout

    /// Flat key -> value pairs ("section.key"); overrides go through the same path.
    static ExperimentConfig from_pairs(const std::map<std::string, std::string>& pairs);
    std::map<std::string, std::string> to_pairs() const;
};

/// Parses INI text; `overrides` ("section.key" -> value) win over the file.
ExperimentConfig parse_config(std::istream& in, const std::map<std::string, std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {});

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ResultTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> footer;  // seed, version, wall_time, ...
    std::vector<Assertion> assertions;

    bool all_pass() const;
    /// Header, data rows, then '#'-prefixed footer lines. Data rows are a pure
    /// function of the config; the footer carries the wall time.
    void write_csv(std::ostream& out) const;
    void write_summary(std::ostream& out) const;
};

/// RFC 4180 field quoting.
std::string csv_field(const std::string& value);
/// Shortest round-trip decimal form.
std::string format_double(double value);

ResultTable run_experiment(const ExperimentConfig& config);

struct VerifyOptions {
    bool inject_sign_flip = false;  // flips the sign of one g-table entry
};

/// Exact and deterministic invariants only; no Monte Carlo.
std::vector<Assertion> verify_suite(const VerifyOptions& options = {});
void write_assertions_json(const std::vector<Assertion>& assertions, std::ostream& out);

}  // namespace kwalk
