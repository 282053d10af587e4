#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recon/cli/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Solution reconstruction with explicit constraint forces"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::vector<std::string> results;

    auto* run = app.add_subcommand("run", "Run one experiment config");
    run->add_option("config,--config", config, "JSON config")->required();
    run->add_option("--out", out, "Output directory (overrides output_dir)");
    auto* run_seed = run->add_option("--seed-override", seed, "Seed for measurements and network init");

    auto* sweep = app.add_subcommand("sweep", "Run a config with one list-valued key");
    sweep->add_option("config,--config", config, "JSON config")->required();
    sweep->add_option("--out", out, "Output directory (overrides output_dir)");
    auto* sweep_seed =
        sweep->add_option("--seed-override", seed, "Seed for measurements and network init");

    auto* compare = app.add_subcommand("compare", "Pairwise L2 distances between results");
    compare->add_option("results", results, "result.json files")->required();
    compare->add_option("--out", out, "Directory for comparison.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    const std::optional<std::string> out_dir = out.empty() ? std::nullopt : std::optional(out);
    if (run->parsed())
        return recon::cli::run_command(config, out_dir,
                                       run_seed->count() ? std::optional(seed) : std::nullopt);
    if (sweep->parsed())
        return recon::cli::sweep_command(config, out_dir,
                                         sweep_seed->count() ? std::optional(seed) : std::nullopt);
    return recon::cli::compare_command(results, out_dir);
}
