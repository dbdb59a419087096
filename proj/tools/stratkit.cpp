#include <iostream>

#include <CLI11.hpp>

#include "stratkit/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"stratkit: prognostic-score stratified experiment design"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> backend;

    for (const char* name : {"predict", "design", "simulate", "report"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON run configuration")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out", out, "override the output directory");
        sub->add_option("--backend", backend, "override the backend name");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : stratkit::cli::ConfigErrorExit;
    }

    stratkit::cli::Overrides overrides;
    overrides.seed = seed;
    if (out) overrides.out = *out;
    overrides.backend = backend;
    const std::string command = app.get_subcommands().front()->get_name();
    return stratkit::cli::run_command(command, config, overrides, std::cout, std::cerr);
}
