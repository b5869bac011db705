#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gdiff/workflow.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Text-conditioned discrete graph diffusion"};
    app.require_subcommand(1, 1);

    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    for (const auto& [verb, _] : gdiff::commands()) {
        auto* sub = app.add_subcommand(verb, "run the " + verb + " step from a JSON config");
        sub->add_option("--config,-c", config, "run config (JSON, schema_version 1)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed-override", seed, "replace every seed in the config");
        sub->add_option("--out,-o", out, "output run directory (overrides config 'out')");
    }
    CLI11_PARSE(app, argc, argv);

    const auto* sub = app.get_subcommands().front();
    gdiff::RunOptions opt;
    if (sub->count("--seed-override")) opt.seed_override = seed;
    if (sub->count("--out")) opt.out_override = out;
    try {
        const auto res = gdiff::run_command(sub->get_name(), config, opt);
        std::cout << res.summary << '\n';
    } catch (const std::exception& e) {
        std::cerr << "gdiff " << sub->get_name() << ": error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
