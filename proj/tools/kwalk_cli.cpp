// kwalk_cli: verify / run <config> / dump-matrix / dump-net
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "kwalk/dyadic_matrix.hpp"
#include "kwalk/experiment.hpp"
#include "kwalk/streams.hpp"

int main(int argc, char** argv) {
    CLI::App app{"k-wise sign families, random walks and stream chaining experiments"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify", "run the exact invariant suite");
    bool json = false, inject = false;
    verify->add_flag("--json", json, "machine-readable summary");
    verify->add_flag("--inject-sign-flip", inject, "flip one g-table sign (mutation check)");

    auto* run = app.add_subcommand("run", "run one experiment config");
    std::string config_path;
    std::vector<std::string> sets;
    std::string output;
    unsigned workers = 0;
    bool have_workers = false;
    run->add_option("config", config_path, "INI experiment file")->required();
    run->add_option("--set", sets, "override section.key=value")->take_all();
    run->add_option("-o,--output", output, "CSV path (overrides experiment.output)");
    run->add_option("-j,--workers", workers, "worker threads")->each([&](const std::string&) { have_workers = true; });

    auto* dump_matrix = app.add_subcommand("dump-matrix", "print the dyadic matrix as CSV");
    std::uint64_t matrix_n = 8;
    dump_matrix->add_option("--n", matrix_n, "order, a power of two in [4, 64]")->required();

    auto* dump_net = app.add_subcommand("dump-net", "print the net hierarchy of a stream as CSV");
    std::string stream_path;
    dump_net->add_option("--stream", stream_path, "newline-delimited item file ('-' for stdin)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*verify) {
            const auto results = kwalk::verify_suite({inject});
            bool ok = true;
            for (const auto& a : results) ok = ok && a.pass;
            if (json) {
                kwalk::write_assertions_json(results, std::cout);
            } else {
                for (const auto& a : results) {
                    std::cout << a.name << ": " << (a.pass ? "PASS" : "FAIL");
                    if (!a.detail.empty()) std::cout << " (" << a.detail << ')';
                    std::cout << '\n';
                }
            }
            return ok ? 0 : 1;
        }
        if (*run) {
            std::map<std::string, std::string> overrides;
            for (const auto& s : sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw kwalk::InvalidParameter("--set expects section.key=value");
                overrides[s.substr(0, eq)] = s.substr(eq + 1);
            }
            if (!output.empty()) overrides["experiment.output"] = output;
            if (have_workers) overrides["experiment.workers"] = std::to_string(workers);
            const kwalk::ExperimentConfig config = kwalk::load_config(config_path, overrides);
            const kwalk::ResultTable table = kwalk::run_experiment(config);
            if (config.output.empty()) {
                table.write_csv(std::cout);
            } else {
                std::ofstream out(config.output, std::ios::binary);
                if (!out) throw kwalk::ResourceError("cannot write '" + config.output + "'");
                table.write_csv(out);
            }
            table.write_summary(std::cerr);
            return table.all_pass() ? 0 : 1;
        }
        if (*dump_matrix) {
            kwalk::dyadic::write_dense_csv(matrix_n, std::cout);
            return 0;
        }
        if (*dump_net) {
            kwalk::streams::InsertionStream stream;
            if (stream_path == "-") {
                stream = kwalk::streams::read_stream(std::cin);
            } else {
                std::ifstream in(stream_path);
                if (!in) throw kwalk::InvalidParameter("cannot open stream '" + stream_path + "'");
                stream = kwalk::streams::read_stream(in);
            }
            kwalk::streams::build_nets(stream).write_csv(std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
