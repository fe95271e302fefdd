// Command-line front end: configuration-driven landscape scans, source
// location runs, noise-table studies and optimizer comparisons.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "qwloc/config.hpp"
#include "qwloc/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "output directory (overrides the config)");
    cmd->add_option("--seed", args.seed, "RNG seed (overrides the config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
}

int run(const std::string& kind, const CommonArgs& args) {
    qwloc::ExperimentSetup setup;
    try {
        setup = qwloc::load_experiment(qwloc::ConfigFile::parse_file(args.config));
        if (setup.kind != kind)
            throw qwloc::ConfigError("config is for experiment '" + setup.kind +
                                     "', expected '" + kind + "'");
        if (!args.out.empty()) setup.output_dir = args.out;
        if (setup.output_dir.empty())
            throw qwloc::ConfigError("no output directory: set [experiment] output or --out");
        if (args.seed_set) setup.seed = args.seed;
        if (args.threads >= 0) setup.threads = static_cast<unsigned>(args.threads);
    } catch (const qwloc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        qwloc::run_experiment(setup);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    std::printf("%s done, outputs in %s\n", kind.c_str(), setup.output_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadratic-Wasserstein earthquake location experiments"};
    app.require_subcommand(1);

    CommonArgs landscape_args, locate_args, table_args, compare_args;
    add_common(app.add_subcommand("landscape", "objective cross-section over hypocenters"),
               landscape_args);
    add_common(app.add_subcommand("locate", "invert hypocenter and origin time"), locate_args);
    add_common(app.add_subcommand("noise-table", "regularized-misfit noise study"), table_args);
    add_common(app.add_subcommand("compare", "LMF / GN / BFGS ensemble comparison"),
               compare_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.got_subcommand("landscape")) return run("landscape", landscape_args);
    if (app.got_subcommand("locate")) return run("locate", locate_args);
    if (app.got_subcommand("noise-table")) return run("noise-table", table_args);
    if (app.got_subcommand("compare")) return run("compare", compare_args);
    return 2;
}
