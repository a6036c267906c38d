// loposem: batch front-end for EM / OS-EM / loping OS-EM reconstructions.

#include "loposem/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"EM, OS-EM and loping OS-EM for the circular Radon transform"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "run configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "noise seed (overrides seed)");
        sub->add_flag("--quiet", quiet, "suppress progress output");
    };
    auto* run = app.add_subcommand("run", "simulate data and reconstruct");
    auto* verify = app.add_subcommand("verify", "check the method's assumptions without reconstructing");
    auto* phantom = app.add_subcommand("phantom", "render the phantom only");
    for (auto* sub : {run, verify, phantom})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : loposem::cli::exit_config;
    }

    loposem::cli::Overrides ov;
    ov.quiet = quiet;
    if (!out_dir.empty())
        ov.output_dir = out_dir;
    for (auto* sub : {run, verify, phantom})
        if (sub->count("--seed"))
            ov.seed = seed;

    if (*run)
        return loposem::cli::run(config, ov, std::cout, std::cerr);
    if (*verify)
        return loposem::cli::verify(config, ov, std::cout, std::cerr);
    return loposem::cli::phantom(config, ov, std::cout, std::cerr);
}
