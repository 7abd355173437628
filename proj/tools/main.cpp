#include "cdmfg/cli_io.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Controlled-diffusion mean field game solver"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string from;
    std::uint64_t seed = 0;
    bool quiet = false;
    bool inject = false;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve-hjb", "HJB solve with couplings frozen at m0; writes u/ and residual.csv"},
        {"solve-fp", "HJB then Fokker-Planck at the frozen couplings; writes u/ and m/"},
        {"solve-mfg", "damped Picard fixed point; writes u/, m/, report.csv and summary.txt"},
        {"verify-sde", "Monte-Carlo checks against a prior solve (--from)"},
        {"diagnose", "regularity, hypothesis and class-M reports"},
        {"wasserstein", "pairwise d1 table and Hoelder fit of a density path"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (overrides output.directory)");
        sub->add_option("--seed", seed, "Monte-Carlo seed (overrides mc.seed)");
        sub->add_flag("--quiet", quiet, "log to run.log only");
        if (name == "verify-sde" || name == "wasserstein") {
            sub->add_option("--from", from, "directory of a prior solve");
        }
        if (name == "solve-fp") {
            sub->add_flag("--inject-negative-density", inject)->group("");
        }
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    cdmfg::RunOptions options;
    options.quiet = quiet;
    options.inject_negative_density = inject;
    std::string name;
    for (CLI::App* sub : subs) {
        if (sub->parsed()) {
            name = sub->get_name();
            if (sub->count("--out")) options.out = out;
            if (sub->count("--seed")) options.seed = seed;
            if (!sub->get_options([](const CLI::Option* o) { return o->get_name() == "--from"; }).empty() &&
                sub->count("--from")) {
                options.from = from;
            }
        }
    }
    return cdmfg::run_from_file(name, config, options, std::cerr);
}
