// SPDX-License-Identifier: Apache-2.0
// bnnv: solve verification queries over sign/ReLU/max networks.

#include "bnnv/error.hpp"
#include "bnnv/generator.hpp"
#include "bnnv/network_json.hpp"
#include "bnnv/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>

namespace {

void print_summary(const bnnv::QueryOutcome &q, std::ostream &err)
{
    err << bnnv::to_string(q.verdict) << " in " << q.wall.count() << " s";
    if ( q.label )
        err << " (label " << *q.label << ")";
    err << "; splits " << q.stats.splits << ", phases fixed " << q.stats.phases_fixed << ", simplex pivots "
        << q.stats.pivots << "\n";
    if ( q.verdict == bnnv::VerdictKind::Sat )
    {
        err << "witness (replayed):";
        for ( std::size_t i = 0; i < q.witness.size(); ++i )
            err << " x" << i + 1 << "=" << q.witness[i];
        err << "\n";
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{ "Verifier for feed-forward networks with sign, ReLU, max and weighted-sum layers" };
    app.set_version_flag("--version", "bnnv 0.1.0");

    std::string net_path;
    std::string prop_path;
    std::string robustness_path;
    std::string log_path;
    std::optional<double> timeout;
    unsigned workers = 1;
    bool no_merge = false;
    bool no_lp = false;
    bool no_sbt = false;
    bool no_polarity = false;
    double epsilon = 1e-6;
    std::uint64_t seed = 0;

    app.add_option("--net", net_path, "Network JSON file")->check(CLI::ExistingFile);
    auto *prop_opt = app.add_option("--prop", prop_path, "Property JSON file")->check(CLI::ExistingFile);
    auto *rob_opt = app.add_option("--robustness", robustness_path, "Robustness spec JSON file (one query per label)")
                        ->check(CLI::ExistingFile);
    prop_opt->excludes(rob_opt);
    app.add_option("--timeout", timeout, "Wall-clock budget in seconds (default: none)")->check(CLI::NonNegativeNumber);
    app.add_option("--workers", workers, "Parallel workers; 1 runs the sequential engine")->check(CLI::PositiveNumber);
    app.add_flag("--no-merge-ws", no_merge, "Do not merge consecutive weighted-sum layers");
    app.add_flag("--no-lp", no_lp, "Skip LP-relaxation preprocessing");
    app.add_flag("--no-sbt", no_sbt, "Skip symbolic bound tightening");
    app.add_flag("--no-polarity", no_polarity, "Split input intervals instead of sign constraints");
    app.add_option("--epsilon", epsilon, "Gap excluded below zero in negative sign cases")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random starting assignment (0: start from zero)");
    app.add_option("--log", log_path, "Write the split-and-conquer run log here ('-' for stderr)");

    auto *gen = app.add_subcommand("gen", "Print a deterministic random BNN as network JSON");
    bnnv::GeneratorOptions gen_options;
    gen_options.widths.clear();
    gen->add_option("--seed", gen_options.seed, "Generator seed");
    gen->add_option("--inputs", gen_options.inputs, "Input size")->check(CLI::PositiveNumber);
    gen->add_option("--outputs", gen_options.outputs, "Output size")->check(CLI::PositiveNumber);
    gen->add_option("--widths", gen_options.widths, "Width of each binary block")->required();
    gen->add_flag("--omit-first-sign", gen_options.omit_first_sign, "First block has no sign layer");

    try
    {
        app.parse(argc, argv);
    }
    catch ( const CLI::ParseError &e )
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try
    {
        if ( gen->parsed() )
        {
            std::cout << bnnv::network_to_json(bnnv::gen_random_bnn(gen_options)).dump(1) << "\n";
            return 0;
        }
        if ( net_path.empty() || (prop_path.empty() && robustness_path.empty()) )
        {
            std::cerr << "error: --net and one of --prop / --robustness are required\n" << app.help();
            return 1;
        }

        bnnv::RunOptions options;
        options.engine.epsilon = epsilon;
        options.engine.merge_ws = !no_merge;
        options.engine.lp_relax = !no_lp;
        options.engine.sbt = !no_sbt;
        options.engine.polarity_snc = !no_polarity;
        options.engine.seed = seed;
        if ( timeout )
            options.engine.timeout = bnnv::Seconds(*timeout);
        options.workers = workers;

        std::unique_ptr<std::ofstream> log_file;
        std::ostream *log_stream = nullptr;
        if ( log_path == "-" )
            log_stream = &std::cerr;
        else if ( !log_path.empty() )
        {
            log_file = std::make_unique<std::ofstream>(log_path);
            if ( !*log_file )
                throw bnnv::ConfigError("cannot open log file " + log_path);
            log_stream = log_file.get();
        }
        if ( log_stream )
            options.log = [log_stream](const bnnv::snc::RunLogEntry &e) {
                *log_stream << bnnv::snc::format(e) << std::endl;
            };

        const bnnv::Network net = bnnv::load_network(net_path);
        if ( !prop_path.empty() )
        {
            const bnnv::Property prop = bnnv::load_property(prop_path);
            const bnnv::QueryOutcome outcome = bnnv::run_query(net, prop, options);
            std::cout << bnnv::report(outcome, options).dump(2) << std::endl;
            print_summary(outcome, std::cerr);
            return bnnv::exit_code(outcome.verdict);
        }

        const bnnv::RobustnessSpec spec = bnnv::load_robustness(robustness_path);
        const bnnv::RobustnessOutcome outcome = bnnv::run_robustness(net, spec, options);
        std::cout << bnnv::report(outcome, options).dump(2) << std::endl;
        for ( const bnnv::QueryOutcome &q : outcome.queries )
            print_summary(q, std::cerr);
        std::cerr << (outcome.verdict == bnnv::VerdictKind::Sat     ? "not robust"
                      : outcome.verdict == bnnv::VerdictKind::Unsat ? "robust"
                                                                    : "unknown (timeout)")
                  << " at delta " << spec.delta << "\n";
        return bnnv::exit_code(outcome.verdict);
    }
    catch ( const std::exception &e )
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
