// Command-line surface for the elicitation pipeline:
//   elicit <stage> --config run.json [--seed N] [--out DIR] [--providers P]
// Stages: ingest, split, segment, annotate, shuffle-baseline, evaluate,
// evaluate-shuffled, train, report.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "elicit/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"corpus-to-report toolkit for information-elicitation dialogues"};

    std::string stage;
    std::string config_path;
    std::string out_dir;
    std::string providers_profile;
    long long seed = -1;

    app.add_option("stage,--stage", stage,
                   "pipeline stage (ingest|split|segment|annotate|shuffle-baseline|"
                   "evaluate|evaluate-shuffled|train|report)");
    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--seed", seed, "override split/training seed");
    app.add_option("--out", out_dir, "override output directory");
    app.add_option("--providers", providers_profile,
                   "provider profile override (e.g. reference)");

    CLI11_PARSE(app, argc, argv);

    if (stage.empty()) {
        std::cerr << "config error: no stage given\n";
        return 2;
    }

    elicit::RunConfig cfg;
    try {
        cfg = elicit::RunConfig::from_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (seed >= 0) {
        cfg.split_seed = static_cast<std::uint64_t>(seed);
        cfg.awr.seed = static_cast<std::uint64_t>(seed);
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (providers_profile == "reference") {
        cfg.providers.tokenizer = "reference";
        cfg.providers.embedder = "reference";
        cfg.providers.extractor = "reference";
    } else if (!providers_profile.empty()) {
        std::cerr << "config error: unknown provider profile \"" << providers_profile
                  << "\"\n";
        return 2;
    }

    const char* cache_dir = std::getenv("ELICIT_PROVIDER_CACHE");
    if (cache_dir) cfg.raw["provider_cache"] = cache_dir;

    return elicit::run_command(stage, cfg, std::cout);
}
